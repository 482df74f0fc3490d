import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fractaldrum.errors import BoundaryConditionError, InvalidConfigError
from fractaldrum.fem import Spectrum, SpectrumMeta, compute_spectrum
from fractaldrum.julia import (
    BASILICA,
    QUASICIRCLE_MULTIPLICITIES,
    RABBIT,
    JuliaSpec,
    interior_components,
    pixel_area,
    rasterize_filled,
)
from fractaldrum.spectral import (
    REFERENCE_LENGTH_SCALE,
    SolveSettings,
    _representative_ranks,
    counting_series,
    iteration_comparison,
    julia_spectrum,
    parameter_slice,
    quasicircle_parts,
    two_term_weyl,
    union_spectrum,
    weyl_term,
)

DISK_LAMBDA1 = 2.404825557695773 ** 2


def _spectrum(values, bc="dirichlet", n_dofs=100):
    return Spectrum(eigenvalues=np.array(values, dtype=float),
                    meta=SpectrumMeta(bc=bc, n_dofs=n_dofs))


class TestCounting:

    def test_grid_and_counts(self):
        series = counting_series(_spectrum([1.0, 2.0, 2.0, 5.0]), area=1.0, dimension=1.0)
        assert series.t.tolist() == [0.5, 1.0, 1.5, 2.0, 3.5, 5.0]
        assert series.N.tolist() == [0, 1, 1, 3, 3, 4]
        assert series.index_base == 1
        assert not series.truncated

    def test_remainders(self):
        series = counting_series(_spectrum([1.0, 2.0, 2.0, 5.0]), area=4 * math.pi, dimension=1.5)
        assert_allclose(series.weyl, series.t)
        assert_allclose(series.D1, series.N - series.t)
        assert series.beta == 0.75
        assert_allclose(series.D2, series.D1 / series.t ** 0.75)

    def test_neumann_zero_mode(self):
        series = counting_series(_spectrum([0.0, 1.0, 1.0], bc="neumann"), area=1.0, dimension=1.2)
        assert series.index_base == 0
        assert series.t.tolist() == [0.0, 0.5, 1.0]
        assert series.N.tolist() == [1, 1, 3]
        assert math.isnan(series.D2[0])
        assert not np.isnan(series.D2[1:]).any()

    def test_truncation_of_incomplete_spectrum(self):
        series = counting_series(_spectrum([1.0, 2.0, 5.0]), area=1.0, dimension=1.0, t_max=10.0)
        assert series.truncated
        assert series.t[-1] == 5.0

    def test_complete_spectrum_is_not_truncated(self):
        series = counting_series(_spectrum([1.0, 2.0, 5.0], n_dofs=3), area=1.0, dimension=1.0, t_max=10.0)
        assert not series.truncated

    def test_t_max_cuts_the_grid(self):
        series = counting_series(_spectrum([1.0, 2.0, 2.0, 5.0]), area=1.0, dimension=1.0, t_max=1.5)
        assert series.t.tolist() == [0.5, 1.0, 1.5]

    def test_snowflake_exponent(self):
        d = math.log(4) / math.log(3)
        series = counting_series(_spectrum([3.0, 4.0]), area=0.69, dimension=d)
        assert series.beta == pytest.approx(0.6309, abs=1e-4)

    @pytest.mark.parametrize("values, area, dimension", [
        ([], 1.0, 1.0),
        ([1.0], 0.0, 1.0),
        ([1.0], 1.0, 2.5),
        ([1.0], 1.0, 0.5),
    ])
    def test_invalid(self, values, area, dimension):
        with pytest.raises(InvalidConfigError):
            counting_series(_spectrum(values), area=area, dimension=dimension)

    def test_weyl_terms(self):
        t = np.array([4 * math.pi ** 2])
        assert weyl_term(t, 1.0)[0] == pytest.approx(math.pi)
        assert two_term_weyl(t, 1.0, 4.0, "dirichlet")[0] == pytest.approx(math.pi - 2.0)
        assert two_term_weyl(t, 1.0, 4.0, "neumann")[0] == pytest.approx(math.pi + 2.0)

    def test_square_follows_weyl(self, unit_square_mesh):
        spec = compute_spectrum(unit_square_mesh, "dirichlet", k=100)
        series = counting_series(spec, area=unit_square_mesh.area(), dimension=1.0)
        ratio = series.N[-1] / series.weyl[-1]
        assert 0.8 <= ratio <= 1.1
        assert series.N[-1] == 100


class TestUnion:

    def test_multiplicities_and_labels(self):
        union = union_spectrum([
            (_spectrum([2.0]), 1, "QC1"),
            (_spectrum([1.0, 3.0]), 2, "QC2"),
        ])
        assert union.eigenvalues.tolist() == [1.0, 1.0, 2.0, 3.0, 3.0]
        assert union.labels == ("QC2", "QC2", "QC1", "QC2", "QC2")
        assert union.entries()[2] == (2.0, "QC1")
        assert len(union) == 5

    def test_ties_keep_part_order(self):
        union = union_spectrum([(_spectrum([1.0, 3.0]), 1, "A"), (_spectrum([1.0]), 1, "B")])
        assert union.labels == ("A", "B", "A")

    def test_neumann_part_is_rejected(self):
        with pytest.raises(BoundaryConditionError):
            union_spectrum([(_spectrum([0.0, 1.0], bc="neumann"), 1, "QC1")])

    def test_zero_multiplicity(self):
        with pytest.raises(InvalidConfigError):
            union_spectrum([(_spectrum([1.0]), 0, "QC1")])

    def test_empty(self):
        assert len(union_spectrum([])) == 0


class TestJulia:

    def test_disk(self):
        spectrum, mesh, grid = julia_spectrum(0j, 100, SolveSettings(k=3, resolution=64))
        assert spectrum.eigenvalues[0] == pytest.approx(DISK_LAMBDA1, rel=0.05)
        assert mesh.area() == pytest.approx(pixel_area(grid), rel=1e-12)
        assert "c=+0+0i" in spectrum.meta.domain

    def test_disk_counting_approaches_weyl(self):
        spectrum, mesh, _ = julia_spectrum(0j, 100, SolveSettings(k=50, resolution=64))
        series = counting_series(spectrum, area=mesh.area(), dimension=1.0, perimeter=2 * math.pi)
        assert series.N[-1] >= 50
        # the boundary term still holds N near 0.87 of the area term here
        assert 0.8 <= series.N[-1] / series.weyl[-1] <= 1.1
        assert series.N[-1] / series.weyl2[-1] == pytest.approx(1.0, abs=0.1)

    def test_representative_ranks(self):
        assert _representative_ranks(QUASICIRCLE_MULTIPLICITIES["basilica"]) == [1, 2, 4, 6]
        assert _representative_ranks(QUASICIRCLE_MULTIPLICITIES["rabbit"]) == [1, 2, 4]

    def test_length_scale_multiplies_eigenvalues(self):
        unit, _, _ = julia_spectrum(0j, 100, SolveSettings(k=3, resolution=32))
        half, mesh, grid = julia_spectrum(0j, 100, SolveSettings(k=3, resolution=32, length_scale=0.5))
        assert_allclose(half.eigenvalues, 4.0 * unit.eigenvalues, rtol=1e-6)
        assert mesh.area() == pytest.approx(pixel_area(grid), rel=1e-12)

    def test_disk_is_one_quasicircle(self):
        parts = quasicircle_parts(0j, (1,), SolveSettings(k=2, resolution=32))
        assert len(parts) == 1
        part = parts[0]
        assert (part.label, part.rank, part.multiplicity) == ("QC1", 1, 1)
        assert part.pixels == part.mesh.raster.filled_count
        assert part.spectrum.eigenvalues[0] == pytest.approx(DISK_LAMBDA1, rel=0.1)
        assert part.as_part() == (part.spectrum, 1, "QC1")

    def test_too_few_components(self):
        with pytest.raises(InvalidConfigError, match="interior components"):
            quasicircle_parts(0j, (1, 1), SolveSettings(k=2, resolution=32))

    def test_iteration_comparison_on_fixed_domain(self):
        rows = iteration_comparison(0j, [20, 40], SolveSettings(k=2, resolution=32))
        assert [r.iterations for r in rows] == [20, 40]
        assert all(r.error == "" for r in rows)
        assert_allclose(rows[0].eigenvalues, rows[1].eigenvalues, rtol=1e-6)

    @pytest.mark.parametrize("counts", [[], [10, 10], [20, 10]])
    def test_iteration_counts_must_ascend(self, counts):
        with pytest.raises(InvalidConfigError):
            iteration_comparison(0j, counts)

    def test_failures_become_rows(self):
        rows = iteration_comparison(0j, [10, 20], SolveSettings(k=2, resolution=32, pixel_budget=100))
        assert all(r.eigenvalues is None for r in rows)
        assert all("budget" in r.error for r in rows)

    def test_parameter_slice(self):
        settings = SolveSettings(k=2, resolution=32)
        rows = parameter_slice([0j, 3 + 0j], settings, iterations=50)
        assert [r.c for r in rows] == [0j, 3 + 0j]
        assert rows[0].eigenvalues[0] == pytest.approx(DISK_LAMBDA1, rel=0.1)
        assert rows[1].eigenvalues is None and rows[1].error

        threaded = parameter_slice([0j, 3 + 0j], settings, iterations=50, workers=2)
        assert np.array_equal(threaded[0].eigenvalues, rows[0].eigenvalues)
        assert threaded[1].error == rows[1].error

    def test_parameter_slice_is_dirichlet_only(self):
        with pytest.raises(BoundaryConditionError):
            parameter_slice([0j], SolveSettings(bc="neumann"))
        with pytest.raises(InvalidConfigError):
            parameter_slice([])


@pytest.mark.slow
class TestReportedValues:
    """Reference eigenvalue tables measure lengths in units of REFERENCE_LENGTH_SCALE."""

    def test_basilica_twenty_iterations(self):
        settings = SolveSettings(k=1, resolution=256, length_scale=REFERENCE_LENGTH_SCALE)
        spectrum, _, _ = julia_spectrum(BASILICA, 20, settings)
        assert spectrum.eigenvalues[0] == pytest.approx(55.93, rel=0.05)

    def test_basilica_union(self):
        parts = quasicircle_parts(BASILICA, QUASICIRCLE_MULTIPLICITIES["basilica"],
                                  SolveSettings(k=5, resolution=256, length_scale=REFERENCE_LENGTH_SCALE))
        union = union_spectrum([p.as_part() for p in parts])
        assert_allclose(union.eigenvalues[:5], [56.01, 131.96, 151.74, 213.40, 213.40], rtol=0.05)

    def test_rabbit_union(self):
        parts = quasicircle_parts(RABBIT, QUASICIRCLE_MULTIPLICITIES["rabbit"],
                                  SolveSettings(k=5, resolution=256, length_scale=REFERENCE_LENGTH_SCALE))
        union = union_spectrum([p.as_part() for p in parts])
        assert_allclose(union.eigenvalues[:5], [98.59, 218.01, 279.41, 283.77, 283.77], rtol=0.05)

    def test_rabbit_domains_are_nested(self):
        settings = SolveSettings(k=1, resolution=256)
        coarse, _, _ = julia_spectrum(RABBIT, 10, settings)
        fine, _, _ = julia_spectrum(RABBIT, 20, settings)
        qc1 = quasicircle_parts(RABBIT, (1,), settings)[0]
        assert coarse.eigenvalues[0] <= fine.eigenvalues[0] <= qc1.spectrum.eigenvalues[0]

    def test_rabbit_mirror_pair(self):
        grid = rasterize_filled(JuliaSpec(c=RABBIT, max_iter=170, resolution=256))
        comps = interior_components(grid, separation=2)
        assert comps.areas[1] == pytest.approx(comps.areas[2], rel=0.02)
        first = grid.with_bits(comps.mask(2)).filled_centers().mean(axis=0)
        second = grid.with_bits(comps.mask(3)).filled_centers().mean(axis=0)
        assert_allclose(first, -second, atol=0.02)

    def test_basilica_flanking_components(self):
        grid = rasterize_filled(JuliaSpec(c=BASILICA, max_iter=170, resolution=256))
        comps = interior_components(grid, separation=2)
        assert comps.areas[1] == pytest.approx(comps.areas[2], rel=0.01)

    def test_disk_fine(self):
        spectrum, _, _ = julia_spectrum(0j, 100, SolveSettings(k=5, resolution=512))
        assert spectrum.eigenvalues[0] == pytest.approx(DISK_LAMBDA1, rel=0.02)

    def test_c02_area(self):
        grid = rasterize_filled(JuliaSpec(c=0.2 + 0j, max_iter=1000, resolution=512))
        assert pixel_area(grid) == pytest.approx(3.0305, abs=0.05)
