"""Band filters, band norms, paraproducts, and per-band derivative ratios."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oddflow.grid import (
    Grid,
    ScalarField,
    VectorField,
    dealias,
    l2_norm,
    max_abs,
    random_band_limited,
)
from oddflow.littlewood_paley import (
    GAMMA,
    bernstein_ratio,
    besov_norm,
    block_max,
    bony_decompose,
    build_partition,
    chemin_lerner_norm,
    dyadic_block,
    low_cutoff,
    refine,
    sobolev_norm,
    time_norm,
)

GRID = Grid(32)
PART = build_partition(GRID)


def random_field(seed, kmax=10):
    return random_band_limited(GRID, np.random.default_rng(seed), kmax=kmax, rms=1.0)


class TestPartition:
    @pytest.mark.parametrize("n,expected", [(16, 3), (32, 4), (64, 5)])
    def test_top_band_index(self, n, expected):
        assert build_partition(Grid(n)).j_max == expected

    def test_filters_sum_to_one_on_retained_band(self):
        total = PART.chi + sum(PART.phis)
        assert np.abs(total - 1.0).max() == 0.0  # power of two: whole lattice
        g24 = Grid(24)
        p24 = build_partition(g24)
        t24 = p24.chi + sum(p24.phis)
        assert np.abs(t24[g24.dealias_mask] - 1.0).max() < 1e-12
        # outside the retained band the corners of a non power-of-two
        # lattice sit beyond the top annulus
        assert np.abs(t24 - 1.0).max() > 0.1

    def test_filters_take_values_in_unit_interval(self):
        for m in (PART.chi, *PART.phis):
            assert m.min() >= 0.0 and m.max() <= 1.0

    def test_cap_covers_origin_only_up_to_inner_radius(self):
        kmag = GRID.wavenumber_magnitude_int()
        assert PART.chi[0, 0] == 1.0
        assert kmag[PART.chi > 0.0].max() <= 4.0 / 3.0 + 1e-12

    def test_annulus_supports(self):
        kmag = GRID.wavenumber_magnitude_int()
        for j, phi in enumerate(PART.phis):
            nz = phi > 0.0
            if nz.any():
                assert kmag[nz].min() > 0.75 * 2.0**j - 1e-12
                assert kmag[nz].max() < 8.0 / 3.0 * 2.0**j + 1e-12


class TestBlocks:
    def test_reconstruction(self):
        u = random_field(0)
        rec = dyadic_block(PART, u, -1)
        for j in range(PART.j_max + 1):
            rec = rec + dyadic_block(PART, u, j)
        assert max_abs(rec - u) < 1e-13

    def test_constant_lives_in_cap_band(self):
        c = ScalarField(GRID, np.full((32, 32), 3.7))
        assert max_abs(dyadic_block(PART, c, -1) - c) == 0.0
        for j in range(PART.j_max + 1):
            assert max_abs(dyadic_block(PART, c, j)) == 0.0

    def test_pure_dyadic_mode_spans_two_bands(self):
        # |k| = 4 = 2^2: the filters split it between bands 1 and 2 with
        # closed-form weights exp(-9/40) and 1 - exp(-9/40)
        mode = ScalarField(GRID, np.cos(4.0 * GRID.mesh_x))
        amps = {j: max_abs(dyadic_block(PART, mode, j)) for j in range(-1, PART.j_max + 1)}
        live = [j for j, a in amps.items() if a > 1e-12]
        assert live == [1, 2]
        assert abs(amps[1] - math.exp(-9.0 / 40.0)) < 1e-12
        assert abs(amps[2] - (1.0 - math.exp(-9.0 / 40.0))) < 1e-12

    def test_distant_bands_annihilate(self):
        u = random_field(5)
        for j in range(-1, PART.j_max + 1):
            bj = dyadic_block(PART, u, j)
            for k in range(-1, PART.j_max + 1):
                if abs(j - k) >= 2:
                    assert max_abs(dyadic_block(PART, bj, k)) < 1e-15

    def test_low_cutoff_telescopes(self):
        u = random_field(1)
        assert max_abs(low_cutoff(PART, u, -1)) == 0.0
        for j in range(0, PART.j_max + 1):
            step = low_cutoff(PART, u, j + 1) - low_cutoff(PART, u, j)
            assert max_abs(step - dyadic_block(PART, u, j)) < 1e-13
        full = low_cutoff(PART, dealias(u), PART.j_max + 1)
        assert max_abs(full - dealias(u)) < 1e-13

    def test_band_index_bounds(self):
        u = random_field(2)
        with pytest.raises(ValueError, match="band index"):
            dyadic_block(PART, u, PART.j_max + 1)
        with pytest.raises(ValueError, match="band index"):
            dyadic_block(PART, u, -2)
        with pytest.raises(ValueError, match="cutoff index"):
            low_cutoff(PART, u, PART.j_max + 2)

    def test_vector_fields_filter_componentwise(self):
        u = random_field(3)
        v = random_field(4)
        w = VectorField(u, v)
        blk = dyadic_block(PART, w, 1)
        assert max_abs(blk.x - dyadic_block(PART, u, 1)) == 0.0
        assert max_abs(blk.y - dyadic_block(PART, v, 1)) == 0.0
        assert block_max(PART, w, 1) == max(max_abs(blk.x), max_abs(blk.y))


class TestNorms:
    def test_zero_field(self):
        z = ScalarField(GRID, np.zeros((32, 32)))
        assert sobolev_norm(z, 1.5) == 0.0
        assert besov_norm(PART, z, 1.5, 2) == 0.0

    @pytest.mark.parametrize("s", [-1.0, 0.5, 2.0])
    def test_single_mode_closed_form(self, s):
        amp, k = 0.37, 3
        u = ScalarField(GRID, amp * np.sin(k * GRID.mesh_x))
        closed = (1.0 + k * k) ** (s / 2.0) * l2_norm(u)
        assert abs(sobolev_norm(u, s) - closed) < 1e-13 * closed

    def test_zeroth_order_norm_is_l2(self):
        u = random_field(6)
        assert abs(sobolev_norm(u, 0.0) - l2_norm(u)) < 1e-12

    def test_equivalence_bracket_over_field_family(self):
        rng = np.random.default_rng(42)
        ratios = []
        for _ in range(100):
            u = random_band_limited(GRID, rng, kmax=10, rms=1.0)
            ratios.append(besov_norm(PART, u, 1.0, 2) / sobolev_norm(u, 1.0))
        assert 1.0 / 3.0 <= min(ratios) and max(ratios) <= 3.0

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), s=st.sampled_from([-1.0, 0.5, 2.0]))
    def test_equivalence_bracket_any_smoothness(self, seed, s):
        u = random_field(seed)
        ratio = besov_norm(PART, u, s, 2) / sobolev_norm(u, s)
        assert 1.0 / 3.0 <= ratio <= 3.0

    def test_band_exponent_infinity_takes_largest_term(self):
        u = random_field(7)
        terms = [
            2.0 ** (j * 1.0) * l2_norm(dyadic_block(PART, u, j))
            for j in range(-1, PART.j_max + 1)
        ]
        assert abs(besov_norm(PART, u, 1.0, np.inf) - max(terms)) < 1e-14


class TestTimeBandNorms:
    def make_series(self, seed, m=11):
        rng = np.random.default_rng(seed)
        return [random_band_limited(GRID, rng, kmax=8, rms=1.0) for _ in range(m)]

    def test_time_constant_series_reduces_to_static_norm(self):
        u = random_field(8)
        cl = chemin_lerner_norm(PART, [u] * 11, 0.01, 1.0, np.inf)
        assert abs(cl - besov_norm(PART, u, 1.0, 2)) < 1e-13 * cl

    def test_quadratic_time_norm_orders_swap_exactly(self):
        series = self.make_series(9)
        cl = chemin_lerner_norm(PART, series, 0.01, 1.0, 2.0)
        per_time = [besov_norm(PART, f, 1.0, 2) for f in series]
        assert abs(cl - time_norm(per_time, 0.01, 2.0)) < 1e-13 * cl

    def test_minkowski_orderings(self):
        series = self.make_series(10)
        per_time = [besov_norm(PART, f, 1.0, 2) for f in series]
        assert chemin_lerner_norm(PART, series, 0.01, 1.0, np.inf) >= time_norm(
            per_time, 0.01, np.inf
        ) * (1.0 - 1e-12)
        assert chemin_lerner_norm(PART, series, 0.01, 1.0, 1.0) <= time_norm(
            per_time, 0.01, 1.0
        ) * (1.0 + 1e-12)

    def test_interpolation_inequality(self):
        series = self.make_series(11)
        s = 0.5
        lhs = chemin_lerner_norm(PART, series, 0.01, s + 1.0, 2.0)
        rhs = math.sqrt(
            chemin_lerner_norm(PART, series, 0.01, s, np.inf)
            * chemin_lerner_norm(PART, series, 0.01, s + 2.0, 1.0)
        )
        assert lhs <= rhs * (1.0 + 1e-12)

    def test_ragged_series_rejected(self):
        u = random_field(12)
        with pytest.raises(ValueError, match="two uniform samples"):
            chemin_lerner_norm(PART, [u], 0.01, 1.0, 2.0)
        other = ScalarField(Grid(16), np.zeros((16, 16)))
        with pytest.raises(ValueError, match="different grids"):
            chemin_lerner_norm(PART, [u, other], 0.01, 1.0, 2.0)


class TestParaproduct:
    def test_refinement_is_exact_on_band_limited_fields(self):
        x, y = GRID.mesh_x, GRID.mesh_y
        u = ScalarField(GRID, 1.3 * np.sin(3 * x) * np.cos(2 * y) + 0.4 * np.cos(5 * y))
        fine = refine(u)
        fx, fy = fine.grid.mesh_x, fine.grid.mesh_y
        exact = 1.3 * np.sin(3 * fx) * np.cos(2 * fy) + 0.4 * np.cos(5 * fy)
        assert np.abs(fine.values - exact).max() < 1e-13
        assert fine.grid.n == 64 and fine.grid.length == GRID.length

    def test_splitting_reassembles_product(self):
        u = dealias(random_field(5))
        v = dealias(random_field(6))
        t_uv, t_vu, rem = bony_decompose(PART, u, v)
        prod = refine(u) * refine(v)
        assert l2_norm(t_uv + t_vu + rem - prod) < 1e-12

    def test_constant_second_factor(self):
        u = dealias(random_field(13))
        one = ScalarField(GRID, np.ones((32, 32)))
        t_u1, t_1u, rem = bony_decompose(PART, u, one)
        assert max_abs(t_u1) == 0.0
        assert max_abs(t_u1 + t_1u + rem - refine(u)) < 1e-13

    def test_zero_factor(self):
        v = dealias(random_field(14))
        zero = ScalarField(GRID, np.zeros((32, 32)))
        for part in bony_decompose(PART, zero, v):
            assert max_abs(part) == 0.0

    def test_low_high_products_stay_frequency_localized(self):
        # low-pass below k-1 times band k lives in bands within 4 of k
        u = dealias(random_field(5))
        v = dealias(random_field(6))
        fine_part = build_partition(Grid(64))
        for k in range(1, PART.j_max + 1):
            prod = refine(low_cutoff(PART, u, k - 1)) * refine(dyadic_block(PART, v, k))
            for j in range(-1, fine_part.j_max + 1):
                if abs(j - k) >= 5:
                    assert max_abs(dyadic_block(fine_part, prod, j)) < 1e-13

    def test_mismatched_grids_rejected(self):
        u = random_field(15)
        other = ScalarField(Grid(16), np.zeros((16, 16)))
        with pytest.raises(ValueError, match="different grids"):
            bony_decompose(PART, u, other)


class TestBernstein:
    def test_exact_dyadic_mode_has_unit_ratio(self):
        mode = ScalarField(GRID, np.cos(4.0 * GRID.mesh_x))
        assert abs(bernstein_ratio(PART, mode, 2, 1) - 1.0) < 1e-12

    def test_inner_edge_mode(self):
        x, y = GRID.mesh_x, GRID.mesh_y
        edge = ScalarField(GRID, np.cos(3.0 * x + 1.0 * y))  # |k| = sqrt(10)
        got = bernstein_ratio(PART, edge, 2, 1)
        assert abs(got - math.sqrt(10.0) / 4.0) < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_first_derivative_bracket(self, seed):
        u = random_field(seed)
        for j in range(PART.j_max + 1):
            try:
                ratio = bernstein_ratio(PART, u, j, 1)
            except ValueError:
                continue
            assert 0.7 * 0.75 <= ratio <= 1.3 * 8.0 / 3.0

    def test_zero_band_rejected(self):
        c = ScalarField(GRID, np.full((32, 32), 1.0))
        with pytest.raises(ValueError, match="zero"):
            bernstein_ratio(PART, c, 0, 1)

    def test_cap_band_excluded(self):
        u = random_field(16)
        with pytest.raises(ValueError, match="band index"):
            bernstein_ratio(PART, u, -1, 1)
