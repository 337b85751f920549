import numpy as np
import pytest

import potlab as pl
from potlab import positive_solutions as ps
from potlab.operators import Potential


class TestNeumannSeries:
    def test_attractive_point_mass(self, p3, p3_laplacian, p3_green, ones):
        v = Potential.point_mass(p3, (0,), -0.4)
        sol = ps.neumann_series_solution(p3_laplacian, p3_green, v, ones)
        np.testing.assert_allclose(sol.g[p3.interior], [4 / 3, 5 / 3, 4 / 3],
                                   atol=1e-10)
        lo, hi = sol.certified_bounds
        assert lo == 1.0 and hi == pytest.approx(5 / 3, rel=1e-9)
        assert np.all(sol.g >= lo - 1e-12) and np.all(sol.g <= hi + 1e-12)

    def test_repulsive_point_mass(self, p3, p3_laplacian, p3_green, ones):
        v = Potential.point_mass(p3, (0,), 0.4)
        sol = ps.neumann_series_solution(p3_laplacian, p3_green, v, ones)
        assert sol.g[p3.origin] == pytest.approx(5 / 7, abs=1e-10)
        lo, hi = sol.certified_bounds
        assert lo == pytest.approx(1 / 3, rel=1e-9)
        assert hi == pytest.approx(5 / 3, rel=1e-9)
        assert np.all(lo - 1e-12 <= sol.g) and np.all(sol.g <= hi + 1e-12)

    def test_zero_potential_returns_h(self, p3, p3_laplacian, p3_green, ones):
        sol = ps.neumann_series_solution(p3_laplacian, p3_green,
                                         Potential.zero(p3), ones)
        np.testing.assert_allclose(sol.g, ones)
        assert sol.iterations <= 1

    def test_precondition_violation(self, p3, p3_laplacian, p3_green, ones):
        v = Potential.point_mass(p3, (0,), 0.6)  # norm 0.6 >= 1/2
        with pytest.raises(ps.PreconditionError):
            ps.neumann_series_solution(p3_laplacian, p3_green, v, ones)

    def test_nonpositive_allows_larger_norm(self, p3, p3_laplacian, p3_green,
                                            ones):
        v = Potential.point_mass(p3, (0,), -0.8)
        sol = ps.neumann_series_solution(p3_laplacian, p3_green, v, ones)
        assert sol.g[p3.origin] == pytest.approx(5.0, rel=1e-9)  # 1/(1-0.8)
        assert sol.certified_bounds == (1.0, pytest.approx(5.0, rel=1e-9))

    def test_residual_contract(self, p3, p3_laplacian, p3_green, ones):
        v = Potential.point_mass(p3, (0,), -0.4)
        sol = ps.neumann_series_solution(p3_laplacian, p3_green, v, ones,
                                         tol=1e-12)
        opv = p3_laplacian.with_potential(v)
        res = np.max(np.abs(opv.apply_full(sol.g)))
        assert res < 1e-11


class TestConstruct:
    def test_matches_neumann_on_p3(self, p3, p3_laplacian, p3_green, ones):
        v = Potential.point_mass(p3, (0,), -0.4)
        ex = pl.build_exhaustion(p3, [0, 1])
        sol1 = ps.construct_positive_solution(p3_laplacian, p3_green, v, ones,
                                              ex)
        sol2 = ps.neumann_series_solution(p3_laplacian, p3_green, v, ones)
        np.testing.assert_allclose(sol1.g, sol2.g, atol=1e-10)

    def test_nonnegative_potential_bounds(self, p3, p3_laplacian, p3_green,
                                          ones):
        v = Potential.point_mass(p3, (0,), 0.4)
        ex = pl.build_exhaustion(p3, [0, 1])
        sol = ps.construct_positive_solution(p3_laplacian, p3_green, v, ones,
                                             ex)
        s = sol.details["plus_green_norm"]
        assert np.all(sol.g / ones >= np.exp(-s) - 1e-12)
        assert np.all(sol.g <= ones + 1e-12)

    def test_mixed_sign_end_to_end(self):
        g = pl.generate_graph(pl.GeometrySpec.lattice(3, 6))
        op = pl.laplacian(g)
        green = pl.dirichlet_green(op)
        bump = Potential.bump(g, 0.5, 2)
        decay = Potential.power_decay(g, -0.3, 3.0)
        v = bump + decay
        ex = pl.build_exhaustion(g, [2, 4, 6])
        sol = ps.construct_positive_solution(op, green, v, np.ones(g.n_vertices),
                                             ex, tol=1e-10)
        assert sol.residual < 1e-9
        assert sol.details["integral_identity_residual"] < 1e-8
        assert np.all(sol.g > 0)
        assert sol.equivalence[0] >= np.exp(-sol.details["plus_green_norm"]) - 1e-12

    def test_supercritical_rejected(self, p3, p3_laplacian, p3_green, ones):
        v = Potential.point_mass(p3, (0,), -1.5)
        ex = pl.build_exhaustion(p3, [0, 1])
        with pytest.raises(ps.PreconditionError):
            ps.construct_positive_solution(p3_laplacian, p3_green, v, ones, ex)


class TestScalingFamily:
    def test_p3_closed_form(self, p3, p3_laplacian, ones):
        v = Potential.point_mass(p3, (0,), 1.0)
        sols, rep = ps.potential_scaling_family(p3_laplacian, v, ones,
                                                [0, 0.5, 1, 2])
        for t, sol in zip([0, 0.5, 1, 2], sols):
            assert sol[p3.origin] == pytest.approx(1 / (1 + t), rel=1e-12)
        assert rep.max_violation <= 1e-10

    def test_t0_returns_h(self, p3, p3_laplacian, ones):
        sols, _ = ps.potential_scaling_family(
            p3_laplacian, Potential.zero(p3), ones, [0, 1])
        np.testing.assert_allclose(sols[0], ones)

    def test_monotone_in_t(self, p3, p3_laplacian, ones):
        v = Potential.point_mass(p3, (0,), 1.0)
        sols, _ = ps.potential_scaling_family(p3_laplacian, v, ones,
                                              [0, 0.3, 0.9, 2.0])
        for a, b in zip(sols, sols[1:]):
            assert np.all(b <= a + 1e-14)

    def test_exponential_lower_bound(self, p3, p3_laplacian, p3_green, ones):
        v = Potential.point_mass(p3, (0,), 1.0)
        from potlab.perturbation import h_bounded_norm
        norm = h_bounded_norm(p3_green, v, ones)
        sols, _ = ps.potential_scaling_family(p3_laplacian, v, ones,
                                              [0, 0.5, 1, 2])
        for t, sol in zip([0, 0.5, 1, 2], sols):
            assert np.all(sol >= np.exp(-t * norm) * ones - 1e-12)

    def test_rejects_signed_potential(self, p3, p3_laplacian, ones):
        v = Potential.point_mass(p3, (0,), -0.5)
        with pytest.raises(ps.PreconditionError):
            ps.potential_scaling_family(p3_laplacian, v, ones, [0, 1])


class TestEquivalenceTheorem:
    def test_subcritical_case(self, p3):
        v = Potential.point_mass(p3, (0,), -0.4)
        ex = pl.build_exhaustion(p3, [0, 1])
        rep = ps.strong_subcriticality_equivalence(pl.laplacian(p3), v, ex)
        assert rep.agree
        assert rep.epsilon == pytest.approx(0.6, abs=1e-10)
        assert rep.subcritical

    def test_supercritical_case(self, p3):
        v = Potential.point_mass(p3, (0,), -1.2)
        ex = pl.build_exhaustion(p3, [0, 1])
        rep = ps.strong_subcriticality_equivalence(pl.laplacian(p3), v, ex)
        assert rep.agree
        assert rep.epsilon == pytest.approx(-0.2, abs=1e-10)
        assert not rep.subcritical

    def test_nonnegative_trivial(self, p3):
        v = Potential.point_mass(p3, (0,), 0.7)
        ex = pl.build_exhaustion(p3, [0, 1])
        rep = ps.strong_subcriticality_equivalence(pl.laplacian(p3), v, ex)
        assert rep.agree and rep.epsilon == 1.0
