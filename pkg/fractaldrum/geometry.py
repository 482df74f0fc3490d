"""
geometry.py — Snowflake prefractals for Fractal Drum.

Builds the classic (Koch) and quadratic snowflake polygons from their
iterated function systems and evaluates the closed-form areas and
box-counting dimensions of both families.

Coordinate frames
-----------------
classic:   base triangle (0,0), (1,0), (1/2, sqrt(3)/2)
quadratic: base square (0,0) .. (2a+b, 2a+b), side 1 since 2a + b = 1

Every side of the base polygon is replaced by the level-m curve of the IFS,
placed so that the curve's bumps point out of the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from fractaldrum.errors import GeometryError, InvalidConfigError

# ---------------------------------------------------------------------------
# Limits and presets
# ---------------------------------------------------------------------------

MAX_LEVEL: Dict[str, int] = {
    "classic": 8,
    "quadratic": 8,
}

SQRT3 = math.sqrt(3.0)
LATTICE_B = 3.0 - 2.0 * math.sqrt(2.0)

# The three quadratic families of the snowflake study, keyed by their a value.
QUADRATIC_PRESETS: Dict[str, float] = {
    "a=0.45": 0.1,
    "a=0.4": 0.2,
    "lattice": LATTICE_B,
}

_CONSTRAINT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> linear @ x + offset, one branch of an IFS (or a symmetry)."""

    linear: np.ndarray   # (2, 2)
    offset: np.ndarray   # (2,)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.linear.T + self.offset

    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.linear, 2))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.linear))))


@dataclass(frozen=True, eq=False)
class Polygon:
    """
    Closed polygon; the closing vertex is implicit.

    Attributes
    ----------
    vertices:
        (n, 2) array in counterclockwise order.
    """

    vertices: np.ndarray

    @property
    def n_edges(self) -> int:
        return int(self.vertices.shape[0])

    def signed_area(self) -> float:
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def area(self) -> float:
        return abs(self.signed_area())

    def edge_lengths(self) -> np.ndarray:
        d = np.roll(self.vertices, -1, axis=0) - self.vertices
        return np.hypot(d[:, 0], d[:, 1])

    def perimeter(self) -> float:
        return float(self.edge_lengths().sum())

    def bounds(self) -> Tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax)"""
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    def centroid(self) -> np.ndarray:
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        xn = np.roll(x, -1)
        yn = np.roll(y, -1)
        cross = x * yn - xn * y
        a6 = 3.0 * cross.sum()
        return np.array([((x + xn) * cross).sum() / a6, ((y + yn) * cross).sum() / a6])


@dataclass(frozen=True)
class SnowflakeSpec:
    """
    Which snowflake, at which level.

    ``a`` and ``b`` are only meaningful for ``kind == "quadratic"``.
    """

    kind: str = "classic"
    level: int = 0
    a: float = 0.0
    b: float = 0.0

    @classmethod
    def classic(cls, level: int) -> "SnowflakeSpec":
        return cls(kind="classic", level=level)

    @classmethod
    def quadratic(cls, b: float, level: int) -> "SnowflakeSpec":
        return cls(kind="quadratic", level=level, a=(1.0 - b) / 2.0, b=b)

    def with_level(self, level: int) -> "SnowflakeSpec":
        return SnowflakeSpec(kind=self.kind, level=level, a=self.a, b=self.b)

    def validate(self) -> "SnowflakeSpec":
        if self.kind not in MAX_LEVEL:
            raise InvalidConfigError(f"unknown snowflake kind '{self.kind}' (classic | quadratic)")
        if self.level < 0:
            raise InvalidConfigError(f"level must be >= 0, got {self.level}")
        limit = MAX_LEVEL[self.kind]
        if self.level > limit:
            raise InvalidConfigError(
                f"{self.kind} snowflake level {self.level} exceeds the limit of {limit}"
            )
        if self.kind == "quadratic":
            if not 0.0 < self.b < 1.0:
                raise InvalidConfigError(f"quadratic b must lie in (0, 1), got {self.b}")
            if abs(2.0 * self.a + self.b - 1.0) > _CONSTRAINT_TOL:
                raise InvalidConfigError(
                    f"quadratic parameters violate 2a + b = 1 (a={self.a}, b={self.b})"
                )
        return self

    @property
    def label(self) -> str:
        if self.kind == "classic":
            return f"classic-L{self.level}"
        return f"quadratic-b{self.b:.6g}-L{self.level}"


def quadratic_preset(name: str, level: int) -> SnowflakeSpec:
    if name not in QUADRATIC_PRESETS:
        raise InvalidConfigError(
            f"unknown quadratic preset '{name}' (choose from {', '.join(QUADRATIC_PRESETS)})"
        )
    return SnowflakeSpec.quadratic(QUADRATIC_PRESETS[name], level)


# ---------------------------------------------------------------------------
# IFS branches
# ---------------------------------------------------------------------------


def _map(m: Sequence[Sequence[float]], t: Sequence[float] = (0.0, 0.0)) -> AffineMap:
    return AffineMap(np.array(m, dtype=float), np.array(t, dtype=float))


def ifs_branches(spec: SnowflakeSpec) -> List[AffineMap]:
    """The 4 classic or 5 quadratic maps, acting on the unit segment [0,1]x{0}."""
    spec.validate()
    if spec.kind == "classic":
        third = 1.0 / 3.0
        s = SQRT3 / 6.0
        return [
            _map([[third, 0.0], [0.0, third]]),
            _map([[1.0 / 6.0, -s], [s, 1.0 / 6.0]], [third, 0.0]),
            _map([[1.0 / 6.0, s], [-s, 1.0 / 6.0]], [0.5, s]),
            _map([[third, 0.0], [0.0, third]], [2.0 * third, 0.0]),
        ]
    a, b = spec.a, spec.b
    return [
        _map([[a, 0.0], [0.0, a]]),
        _map([[0.0, -b], [b, 0.0]], [a, 0.0]),
        _map([[b, 0.0], [0.0, b]], [a, b]),
        _map([[0.0, b], [-b, 0.0]], [a + b, b]),
        _map([[a, 0.0], [0.0, a]], [a + b, 0.0]),
    ]


def curve_points(spec: SnowflakeSpec) -> np.ndarray:
    """
    Vertices of one side's level-m curve from (0,0) to (1,0), both ends included.

    Consecutive branches share endpoints (f_i(1,0) == f_{i+1}(0,0)), so the
    level-m curve is the concatenation of every branch applied to the
    level-(m-1) curve with the shared points dropped.
    """
    maps = ifs_branches(spec)
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    for _ in range(spec.level):
        pieces = [f(pts)[:-1] for f in maps]
        pieces.append(pts[-1:])
        pts = np.concatenate(pieces, axis=0)
    return pts


def _base_polygon(spec: SnowflakeSpec) -> np.ndarray:
    if spec.kind == "classic":
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2.0]])
    side = 2.0 * spec.a + spec.b
    return np.array([[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]])


def snowflake_polygon(spec: SnowflakeSpec) -> Polygon:
    """Level-m snowflake as a CCW polygon (3*4^m or 4*5^m edges)."""
    spec.validate()
    local = curve_points(spec)[:-1]
    base = _base_polygon(spec)
    sides = []
    for p, q in zip(base, np.roll(base, -1, axis=0)):
        d = q - p
        outward = np.array([d[1], -d[0]])   # right of a CCW edge
        sides.append(p + np.outer(local[:, 0], d) + np.outer(local[:, 1], outward))
    return Polygon(np.concatenate(sides, axis=0))


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def _quadratic_ratio(spec: SnowflakeSpec) -> float:
    return 2.0 * spec.a ** 2 + 3.0 * spec.b ** 2


def area_at_level(spec: SnowflakeSpec) -> float:
    spec.validate()
    m = spec.level
    if spec.kind == "classic":
        a0 = SQRT3 / 4.0
        return a0 / 5.0 * (8.0 - 3.0 * (4.0 / 9.0) ** m)
    q = _quadratic_ratio(spec)
    partial = float(sum(q ** j for j in range(m)))
    return (2.0 * spec.a + spec.b) ** 2 + 4.0 * spec.b ** 2 * partial


def area_limit(spec: SnowflakeSpec) -> float:
    spec.validate()
    if spec.kind == "classic":
        return 2.0 * SQRT3 / 5.0
    q = _quadratic_ratio(spec)
    if q >= 1.0:
        raise GeometryError(f"area series diverges: 2a^2 + 3b^2 = {q:.6g} >= 1")
    return (2.0 * spec.a + spec.b) ** 2 + 4.0 * spec.b ** 2 / (1.0 - q)


def dimension_residual(spec: SnowflakeSpec, d: float) -> float:
    """Left side minus right side of 2a^d + 3b^d = 1."""
    return 2.0 * spec.a ** d + 3.0 * spec.b ** d - 1.0


def boxdim_closed_form(spec: SnowflakeSpec) -> float:
    spec.validate()
    if spec.kind == "classic":
        return math.log(4.0) / math.log(3.0)
    lo, hi = dimension_residual(spec, 1.0), dimension_residual(spec, 2.0)
    if lo * hi > 0.0:
        raise GeometryError(
            f"no dimension root in [1, 2] for b={spec.b} (residuals {lo:.3g}, {hi:.3g})"
        )
    return float(bisect(lambda d: dimension_residual(spec, d), 1.0, 2.0, xtol=1e-15))


# ---------------------------------------------------------------------------
# Symmetries
# ---------------------------------------------------------------------------


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _reflection(theta: float) -> np.ndarray:
    """Reflection across the line through the origin at angle theta."""
    c, s = math.cos(2.0 * theta), math.sin(2.0 * theta)
    return np.array([[c, s], [s, -c]])


def symmetry_center(spec: SnowflakeSpec) -> np.ndarray:
    if spec.kind == "classic":
        return np.array([0.5, SQRT3 / 6.0])
    half = (2.0 * spec.a + spec.b) / 2.0
    return np.array([half, half])


def symmetry_maps(spec: SnowflakeSpec) -> List[AffineMap]:
    """
    Dihedral group of the snowflake about its centre, identity first.

    12 elements (D6) for the classic snowflake, 8 (D4) for the quadratic one.
    """
    spec.validate()
    n = 6 if spec.kind == "classic" else 4
    center = symmetry_center(spec)
    mats = [_rotation(2.0 * math.pi * k / n) for k in range(n)]
    mats += [_reflection(math.pi * k / n) for k in range(n)]
    return [AffineMap(m, center - m @ center) for m in mats]


REFLECTION_NAMES = ("identity", "mirror_horizontal", "mirror_vertical", "half_turn")


def axis_reflections(center: Sequence[float]) -> List[AffineMap]:
    """Identity, reflections across the horizontal and vertical lines through ``center``, half-turn."""
    center = np.asarray(center, dtype=float)
    mats = [np.eye(2), np.diag([1.0, -1.0]), np.diag([-1.0, 1.0]), -np.eye(2)]
    return [AffineMap(m, center - m @ center) for m in mats]
