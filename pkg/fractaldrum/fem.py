"""
fem.py — P1 finite elements for the Laplacian eigenproblem -Δu = λu.

Pipeline: ``assemble`` (stiffness K, mass M) -> ``apply_bc`` (Dirichlet by
elimination, Neumann natural) -> ``solve_smallest`` (shift-invert Lanczos
through ARPACK plus a Rayleigh-Ritz pass) -> ``Spectrum``.

``compute_spectrum`` runs the whole chain and puts the boundary zeros back
so every eigenvector lives on all mesh vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, splu
from matplotlib.tri import LinearTriInterpolator, Triangulation
from scipy.spatial import cKDTree

from fractaldrum.errors import (
    BoundaryConditionError,
    InvalidConfigError,
    MeshError,
    SolverError,
)
from fractaldrum.geometry import AffineMap
from fractaldrum.meshing import TriMesh

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BOUNDARY_CONDITIONS = (DIRICHLET, NEUMANN)

GRADIENT = "gradient"
EDGE_NORMAL = "edge-normal"
ENERGY_VARIANTS = (GRADIENT, EDGE_NORMAL)

DEFAULT_TOL = 1e-8
MAX_RESTARTS = 500

# Below this many unknowns a dense generalized eigh is faster than ARPACK.
_DENSE_LIMIT = 400
_DEGENERATE_AREA = 1e-14
_NEUMANN_SHIFT = 1e-8
_POLISH_ROUNDS = 3

_MASS_LOCAL = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def parse_bc(bc: str) -> str:
    name = str(bc).strip().lower()
    if name not in BOUNDARY_CONDITIONS:
        raise InvalidConfigError(f"unknown boundary condition '{bc}' (dirichlet | neumann)")
    return name


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def _gradients(mesh: TriMesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-triangle (b, c, area): grad(phi_i) = (b_i, c_i) / (2 area)."""
    p = mesh.vertices[mesh.triangles]                          # (t, 3, 2)
    x, y = p[..., 0], p[..., 1]
    b = np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)        # y_j - y_k
    c = np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)        # x_k - x_j
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    return b, c, area


def assemble(mesh: TriMesh) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """
    Global stiffness and mass matrices in CSR layout.

    K_loc = (b b^T + c c^T) / (4 area),  M_loc = area / 12 * [[2,1,1],[1,2,1],[1,1,2]].
    Duplicate entries are summed in triangle order, so both matrices are
    symmetric bit for bit.
    """
    b, c, area = _gradients(mesh)
    scale = max(mesh.h, 1e-300) ** 2
    bad = np.flatnonzero(area < _DEGENERATE_AREA * scale)
    if bad.size:
        raise MeshError(
            f"{bad.size} degenerate or inverted triangle(s), first is #{int(bad[0])} "
            f"(area {float(area[bad[0]]):.3g})"
        )

    k_loc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area[:, None, None])
    m_loc = area[:, None, None] * _MASS_LOCAL[None, :, :]

    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sort_indices()
    M.sort_indices()
    return K, M


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """K and M restricted to the free vertices ``dofs``."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    dofs: np.ndarray
    n_vertices: int
    bc: str

    @property
    def n_dofs(self) -> int:
        return int(self.dofs.size)

    def expand(self, vectors: np.ndarray) -> np.ndarray:
        """Reduced (n_dofs,) or (n_dofs, k) vectors -> full length, zeros elsewhere."""
        vectors = np.asarray(vectors, dtype=float)
        full = np.zeros((self.n_vertices,) + vectors.shape[1:])
        full[self.dofs] = vectors
        return full


def apply_bc(K: sp.csr_matrix, M: sp.csr_matrix, mesh: TriMesh, bc: str) -> ReducedSystem:
    bc = parse_bc(bc)
    n = mesh.n_vertices
    if K.shape != (n, n) or M.shape != (n, n):
        raise MeshError(f"matrices of shape {K.shape} do not match a mesh with {n} vertices")
    if bc == NEUMANN:
        return ReducedSystem(K=K, M=M, dofs=np.arange(n), n_vertices=n, bc=bc)
    dofs = np.flatnonzero(~mesh.is_boundary)
    if dofs.size == 0:
        raise BoundaryConditionError("Dirichlet problem has no interior vertices; refine the mesh")
    return ReducedSystem(
        K=K[dofs][:, dofs].tocsr(),
        M=M[dofs][:, dofs].tocsr(),
        dofs=dofs,
        n_vertices=n,
        bc=bc,
    )


# ---------------------------------------------------------------------------
# Eigensolver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumMeta:
    domain: str = ""
    bc: str = DIRICHLET
    resolution: float = 0.0       # mesh edge length h
    tol: float = DEFAULT_TOL
    seed: int = 0
    n_dofs: int = 0


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Ascending eigenvalues with optional mass-orthonormal eigenvectors.

    ``eigenvectors`` has one column per eigenvalue. ``residuals`` are the
    relative residuals |Ku - λMu| / |Mu| and ``converged``
    flags the pairs that meet ``meta.tol``.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    meta: SpectrumMeta = field(default_factory=SpectrumMeta)
    residuals: Optional[np.ndarray] = None
    converged: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def index_base(self) -> int:
        """1 for Dirichlet (λ1 first), 0 for Neumann (λ0 = 0 first)."""
        return 0 if self.meta.bc == NEUMANN else 1

    def indices(self) -> np.ndarray:
        return self.index_base + np.arange(len(self))

    @property
    def complete(self) -> bool:
        """True when every eigenvalue of the discrete problem was computed."""
        return self.meta.n_dofs > 0 and len(self) == self.meta.n_dofs

    @property
    def all_converged(self) -> bool:
        return self.converged is None or bool(np.all(self.converged))


def residual_norms(K: sp.spmatrix, M: sp.spmatrix, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    Ku = K @ vectors
    Mu = M @ vectors
    num = np.linalg.norm(Ku - Mu * values[None, :], axis=0)
    den = np.linalg.norm(Mu, axis=0)
    return num / np.where(den > 0.0, den, 1.0)


def _normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive."""
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0.0] = 1.0
    return vectors * signs[None, :]


def _rayleigh_ritz(K: sp.spmatrix, M: sp.spmatrix, basis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # columns scaled to unit M-norm
    basis = basis / np.sqrt(np.einsum("ij,ij->j", basis, M @ basis))[None, :]
    A = basis.T @ (K @ basis)
    B = basis.T @ (M @ basis)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    values, coeffs = scipy.linalg.eigh(A, B)
    return values, basis @ coeffs


def _shift(K: sp.spmatrix, bc: str) -> float:
    if bc == DIRICHLET:
        return 0.0
    # K is singular (constants); shift just below zero
    return -_NEUMANN_SHIFT * float(K.diagonal().sum()) / K.shape[0]


def _finish(K, M, values, vectors, k, tol, meta) -> Spectrum:
    order = np.argsort(values, kind="stable")[:k]
    values = np.asarray(values)[order]
    vectors = _normalize_signs(np.asarray(vectors)[:, order])
    residuals = residual_norms(K, M, values, vectors)
    return Spectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        meta=meta,
        residuals=residuals,
        converged=residuals <= tol,
    )


def _polish(K, M, sigma: float, spectrum: Spectrum, tol: float, meta: SpectrumMeta) -> Spectrum:
    """A few rounds of shift-invert subspace iteration on the Ritz vectors."""
    lu = splu(sp.csc_matrix(K - sigma * M))
    k = len(spectrum)
    for _ in range(_POLISH_ROUNDS):
        values, vectors = _rayleigh_ritz(K, M, lu.solve(M @ spectrum.eigenvectors))
        spectrum = _finish(K, M, values, vectors, k, tol, meta)
        if spectrum.all_converged:
            break
    return spectrum


def solve_smallest(
    K: sp.spmatrix,
    M: sp.spmatrix,
    k: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    bc: str = DIRICHLET,
    domain: str = "",
    resolution: float = 0.0,
) -> Spectrum:
    """
    The k smallest eigenpairs of K u = λ M u.

    Raises SolverError (with the partial spectrum attached) when ARPACK
    stops early or any returned pair misses the residual tolerance.
    """
    bc = parse_bc(bc)
    n = K.shape[0]
    if not 0.0 < tol < 1.0:
        raise InvalidConfigError(f"tol must lie in (0, 1), got {tol}")
    if k < 1 or k > n:
        raise InvalidConfigError(f"k must lie in [1, {n}] for this problem, got {k}")
    meta = SpectrumMeta(domain=domain, bc=bc, resolution=resolution, tol=tol, seed=seed, n_dofs=n)

    if n <= _DENSE_LIMIT or k >= n - 1:
        values, vectors = scipy.linalg.eigh(
            K.toarray(), M.toarray(), subset_by_index=[0, k - 1]
        )
        spectrum = _finish(K, M, values, vectors, k, tol, meta)
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        ncv = min(n, max(2 * k + 1, 20))
        try:
            _, basis = eigsh(
                K, k=k, M=M, sigma=_shift(K, bc), which="LM",
                v0=v0, ncv=ncv, maxiter=MAX_RESTARTS, tol=tol * 1e-3,
            )
        except ArpackNoConvergence as exc:
            partial = None
            if exc.eigenvectors is not None and exc.eigenvectors.shape[1] > 0:
                values, vectors = _rayleigh_ritz(K, M, exc.eigenvectors)
                partial = _finish(K, M, values, vectors, k, tol, meta)
            raise SolverError(
                f"ARPACK did not converge within {MAX_RESTARTS} restarts "
                f"({0 if partial is None else len(partial)} of {k} pairs recovered)",
                partial=partial,
            ) from exc
        values, vectors = _rayleigh_ritz(K, M, basis)
        spectrum = _finish(K, M, values, vectors, k, tol, meta)
        if not spectrum.all_converged:
            spectrum = _polish(K, M, _shift(K, bc), spectrum, tol, meta)

    if not spectrum.all_converged:
        worst = float(np.max(spectrum.residuals))
        raise SolverError(
            f"{int(np.sum(~spectrum.converged))} of {k} eigenpairs miss the residual "
            f"tolerance {tol:g} (worst {worst:.3g})",
            partial=spectrum,
        )
    return spectrum


def compute_spectrum(
    mesh: TriMesh,
    bc: str,
    k: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    label: str = "",
) -> Spectrum:
    """assemble -> apply_bc -> solve_smallest, eigenvectors on every vertex."""
    K, M = assemble(mesh)
    reduced = apply_bc(K, M, mesh, bc)
    try:
        spectrum = solve_smallest(
            reduced.K, reduced.M, k, tol=tol, seed=seed, bc=reduced.bc,
            domain=label, resolution=mesh.h,
        )
    except SolverError as exc:
        if exc.partial is not None and exc.partial.eigenvectors is not None:
            exc.partial = _expanded(exc.partial, reduced)
        raise
    return _expanded(spectrum, reduced)


def _expanded(spectrum: Spectrum, reduced: ReducedSystem) -> Spectrum:
    return Spectrum(
        eigenvalues=spectrum.eigenvalues,
        eigenvectors=reduced.expand(spectrum.eigenvectors),
        meta=spectrum.meta,
        residuals=spectrum.residuals,
        converged=spectrum.converged,
    )


# ---------------------------------------------------------------------------
# Energy distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnergyField:
    """One nonnegative value per triangle of the mesh with ``mesh_fingerprint``."""

    values: np.ndarray
    variant: str
    mesh_fingerprint: str

    def total(self) -> float:
        return float(self.values.sum())


def energy_distribution(mesh: TriMesh, u: np.ndarray, variant: str = GRADIENT) -> EnergyField:
    """
    gradient:    |grad u|^2 * area per triangle (sums to u^T K u).
    edge-normal: sum over the triangle's edges of (grad u . n)^2 * edge length.
    """
    if variant not in ENERGY_VARIANTS:
        raise InvalidConfigError(f"unknown energy variant '{variant}' ({' | '.join(ENERGY_VARIANTS)})")
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise MeshError(f"field has {u.size} values, mesh has {mesh.n_vertices} vertices")

    b, c, area = _gradients(mesh)
    ut = u[mesh.triangles]
    gx = (ut * b).sum(axis=1) / (2.0 * area)
    gy = (ut * c).sum(axis=1) / (2.0 * area)
    if variant == GRADIENT:
        values = (gx ** 2 + gy ** 2) * area
    else:
        p = mesh.vertices[mesh.triangles]
        e = np.roll(p, -1, axis=1) - p                          # (t, 3, 2) edge vectors
        length = np.hypot(e[..., 0], e[..., 1])
        dn = gx[:, None] * e[..., 1] - gy[:, None] * e[..., 0]  # grad u . (e_y, -e_x)
        values = (dn ** 2 / length).sum(axis=1)
    return EnergyField(values=values, variant=variant, mesh_fingerprint=mesh.fingerprint)


def energy_combination(
    field_a: EnergyField,
    field_b: EnergyField,
    weights: Sequence[float] = (1.0, 1.0),
) -> EnergyField:
    if field_a.mesh_fingerprint != field_b.mesh_fingerprint or field_a.values.shape != field_b.values.shape:
        raise MeshError("energy fields live on different meshes")
    if field_a.variant != field_b.variant:
        raise InvalidConfigError(
            f"cannot combine a '{field_a.variant}' field with a '{field_b.variant}' field"
        )
    if len(weights) != 2:
        raise InvalidConfigError(f"need two weights, got {len(weights)}")
    wa, wb = (float(w) for w in weights)
    return EnergyField(
        values=wa * field_a.values + wb * field_b.values,
        variant=field_a.variant,
        mesh_fingerprint=field_a.mesh_fingerprint,
    )


# ---------------------------------------------------------------------------
# Symmetry
# ---------------------------------------------------------------------------


def _match(points: np.ndarray, images: np.ndarray, h: float, what: str) -> np.ndarray:
    dist, idx = cKDTree(points).query(images)
    tol = 1e-6 * max(h, 1e-12)
    if dist.size and float(dist.max()) > tol:
        raise MeshError(f"mesh {what} are not invariant under the map (mismatch {float(dist.max()):.3g})")
    return idx


def vertex_permutation(mesh: TriMesh, g: AffineMap) -> np.ndarray:
    """perm with g(vertices[i]) == vertices[perm[i]]."""
    return _match(mesh.vertices, g(mesh.vertices), mesh.h, "vertices")


def triangle_permutation(mesh: TriMesh, g: AffineMap) -> np.ndarray:
    """perm with g(centroid[i]) == centroid[perm[i]]."""
    centroids = mesh.centroids()
    return _match(centroids, g(centroids), mesh.h, "triangles")


def _pullback(mesh: TriMesh, u: np.ndarray, g: AffineMap) -> np.ndarray:
    """u o g at every vertex by P1 interpolation; zero where g leaves the mesh."""
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    images = g(mesh.vertices)
    sampled = LinearTriInterpolator(tri, u)(images[:, 0], images[:, 1])
    return np.ma.filled(sampled.astype(float), 0.0)


def symmetry_signature(
    mesh: TriMesh,
    u: np.ndarray,
    maps: Sequence[AffineMap],
    M: Optional[sp.spmatrix] = None,
    exact: bool = True,
) -> np.ndarray:
    """
    For every map g, the M-weighted correlation <u o g, u> / <u, u>.

    +1 means u is symmetric under g, -1 skew-symmetric; values in between
    indicate u belongs to a higher-dimensional eigenspace.

    ``exact`` requires g to permute the mesh vertices. Otherwise u o g is
    interpolated, which suits pixel domains that are only nearly symmetric.
    """
    u = np.asarray(u, dtype=float)
    if M is None:
        _, M = assemble(mesh)
    Mu = M @ u
    norm = float(u @ Mu)
    if norm <= 0.0:
        raise InvalidConfigError("cannot classify the symmetry of a zero field")
    out: List[float] = []
    for g in maps:
        moved = u[vertex_permutation(mesh, g)] if exact else _pullback(mesh, u, g)
        out.append(float(moved @ Mu) / norm)
    return np.array(out)
