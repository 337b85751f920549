import numpy as np
import pytest

import potlab as pl
from potlab import riesz as rz
from potlab.operators import Potential


class TestGradient:
    def test_constant_in_kernel(self, p3):
        es = rz.gradient_matrix(p3)
        u = np.ones(p3.n_interior)
        # edges into the boundary see the Dirichlet zero, interior edges none
        du = es.incidence @ u
        interior_edges = (p3.interior_pos[es.rows] >= 0) & \
            (p3.interior_pos[es.cols] >= 0)
        assert np.all(du[interior_edges] == 0)

    def test_p3_delta(self, p3):
        es = rz.gradient_matrix(p3)
        u = np.zeros(p3.n_interior)
        u[1] = 1.0  # delta at the origin
        du = es.incidence @ u
        expect = {(-1, 0): 1.0, (0, 1): -1.0}
        for e in range(es.n_edges):
            key = (p3.vertices[es.rows[e]][0], p3.vertices[es.cols[e]][0])
            assert du[e] == expect.get(key, 0.0)

    def test_energy_convention_matches_quadratic_form(self):
        rng = np.random.default_rng(3)
        g = pl.generate_graph(pl.GeometrySpec.lattice(2, 3))
        op = pl.laplacian(g)
        es = rz.gradient_matrix(g)
        u_int = rng.normal(size=g.n_interior)
        du = es.incidence @ u_int
        edge_energy = float(np.sum(es.weights * du ** 2))
        q = pl.quadratic_form(op, op.from_interior(u_int))
        assert edge_energy == pytest.approx(q.gradient_energy, rel=1e-12)


class TestRieszOperator:
    def test_l2_isometry(self, p3):
        op = pl.laplacian(p3)
        rop = rz.riesz_operator(op)
        rng = np.random.default_rng(0)
        for _ in range(5):
            u = rng.normal(size=3)
            v = rop.matvec(u)
            edge = float(np.sum(rop.edges.weights * v ** 2))
            vertex = float(np.sum(u ** 2 * op.mu_interior))
            assert edge == pytest.approx(vertex, rel=1e-10)

    def test_h_one_degenerate_variants(self, p3, ones):
        op = pl.laplacian(p3)
        plain = rz.riesz_operator(op).dense()
        mod = rz.riesz_operator(op, "modified", h=ones).dense()
        dinv = rz.riesz_operator(op, "inverse_h", h=ones).dense()
        np.testing.assert_allclose(mod, plain, atol=0)
        np.testing.assert_allclose(dinv, plain, atol=0)

    def test_product_rule_decomposition(self, p3, p3_laplacian, p3_green,
                                        ones):
        # D u = avg(1/h) du + d(1/h) u-bar, exactly, applied after P^{-1/2}
        from potlab import positive_solutions as ps
        v = Potential.point_mass(p3, (0,), -0.4)
        opv = pl.assemble_schrodinger(p3, v)
        sol = ps.neumann_series_solution(p3_laplacian, p3_green, v, ones,
                                         tol=1e-13)
        h = sol.g
        ropD = rz.riesz_operator(opv, "inverse_h", h=h)
        es = ropD.edges
        hi = h
        inv_avg = 0.5 * (1 / hi[es.rows] + 1 / hi[es.cols])
        dinv = (1 / hi[es.cols] - 1 / hi[es.rows])
        rng = np.random.default_rng(1)
        for _ in range(4):
            u = rng.normal(size=3)
            x = ropD.half_inverse(u)
            lhs = ropD.matvec(u)
            du = es.incidence @ x
            xbar = es.average @ x
            rhs = inv_avg * du + dinv * xbar
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_requires_positive_operator(self, p3):
        v = Potential.point_mass(p3, (0,), -1.5)
        op = pl.assemble_schrodinger(p3, v)
        with pytest.raises(rz.RieszError):
            rz.riesz_operator(op)


class TestLpNorms:
    def test_identity_all_p(self):
        for p in (1, 1.5, 2, 3, np.inf):
            est = rz.lp_operator_norm(np.eye(5), p)
            assert est.lower == pytest.approx(1.0, abs=1e-9)
            assert est.upper == pytest.approx(1.0, abs=1e-9)

    def test_diagonal_case(self):
        est = rz.lp_operator_norm(np.diag([3.0, 1.0]), 1.5)
        assert est.lower == pytest.approx(3.0, abs=1e-9)
        assert est.upper == pytest.approx(3.0, abs=1e-9)

    def test_two_by_two_exact_p2(self):
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        est = rz.lp_operator_norm(A, 2)
        assert est.lower == pytest.approx(np.sqrt((3 + np.sqrt(5)) / 2),
                                          rel=1e-12)

    def test_sandwich_and_scaling(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(6, 5))
        for p in (1.3, 2.6, 4.0):
            est = rz.lp_operator_norm(A, p, seed=1)
            assert est.lower <= est.upper * (1 + 1e-12)
            est3 = rz.lp_operator_norm(3.0 * A, p, seed=1)
            assert est3.lower == pytest.approx(3 * est.lower, rel=1e-7)
            assert est3.upper == pytest.approx(3 * est.upper, rel=1e-7)

    def test_interpolation_consistency(self):
        rng = np.random.default_rng(10)
        A = np.abs(rng.normal(size=(7, 7)))
        n1 = rz.lp_operator_norm(A, 1).lower
        n2 = rz.lp_operator_norm(A, 2).lower
        est = rz.lp_operator_norm(A, 1.5, seed=2)
        from potlab._solvers import interpolation_upper
        assert est.upper <= interpolation_upper(n1, n2, 1.5, 1, 2) * (1 + 1e-12)

    def test_weighted_unit_weights_match_plain(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(6, 6))
        for p in (1, 2, np.inf):
            plain = rz.lp_operator_norm(A, p)
            weighted = rz.lp_operator_norm(A, p, src_weights=np.ones(6),
                                           dst_weights=np.ones(6))
            assert plain.lower == weighted.lower

    def test_witness_achieves_lower(self):
        rng = np.random.default_rng(12)
        A = rng.normal(size=(8, 8))
        est = rz.lp_operator_norm(A, 2.5, seed=3)
        w = est.witness
        val = np.linalg.norm(A @ w, 2.5) / np.linalg.norm(w, 2.5)
        assert val == pytest.approx(est.lower, rel=1e-10)


class TestMatrixFreeEstimates:
    def test_matches_dense_route(self):
        # force the matrix-free path on a small operator and compare
        g = pl.generate_graph(pl.GeometrySpec.lattice(2, 4))
        op = pl.laplacian(g)
        rop = rz.riesz_operator(op)
        dense_est = rz.riesz_norm_estimate(rop, 2.5, seed=5)
        import potlab._solvers as sv
        saved = sv.DENSE_SPECTRAL_MAX
        try:
            sv.DENSE_SPECTRAL_MAX = 10
            op2 = pl.SchrodingerOperator(g, Potential.zero(g))
            op2.pencil.dense_spectral_max = 10
            rop2 = rz.RieszOperator(op2)
            free_est = rz.riesz_norm_estimate(rop2, 2.5, seed=5,
                                              boyd_tol=1e-9, boyd_iters=80)
        finally:
            sv.DENSE_SPECTRAL_MAX = saved
        assert free_est.lower <= dense_est.upper * (1 + 1e-9)
        assert free_est.lower == pytest.approx(dense_est.lower, rel=2e-2)
        assert free_est.upper >= dense_est.lower

    def test_exact_p2_pencil_route(self):
        g = pl.generate_graph(pl.GeometrySpec.lattice(2, 4))
        v = Potential.bump(g, -0.2, 1)
        op = pl.assemble_schrodinger(g, v)
        rop = rz.riesz_operator(op)
        dense_val = rz.riesz_norm_estimate(rop, 2).lower
        val = rz._plain_p2_norm(rop)
        assert val == pytest.approx(dense_val, rel=1e-9)


class TestSemigroupNorms:
    def test_tensor_matches_dense(self):
        g = pl.generate_graph(pl.GeometrySpec.lattice(3, 2))
        op = pl.laplacian(g)
        for (p, q) in [(1, 2), (2, 4), (1, np.inf)]:
            lo_d, up_d, _ = rz._semigroup_interval_dense(op, 0.9, p, q, seed=4)
            lo_t, up_t, _ = rz._semigroup_interval_lattice(op, 0.9, p, q,
                                                           seed=4)
            assert lo_t == pytest.approx(lo_d, rel=1e-9)
            assert up_t == pytest.approx(up_d, rel=1e-9)

    def test_contraction_at_p_equals_q(self):
        g = pl.generate_graph(pl.GeometrySpec.radial(2.0, 6))
        op = pl.laplacian(g)
        exps = pl.fit_growth_exponents(g, 60, seed=1, radius_window=(2, 5))
        reports = rz.weighted_semigroup_norm_check(
            op, exps, [(2, 2)], t_grid=[0.5, 1, 2, 5])
        rep = reports[0]
        assert all(lo <= 1 + 1e-9 for lo in rep.lower)

    def test_envelope_constant_finite(self):
        g = pl.generate_graph(pl.GeometrySpec.lattice(3, 3))
        op = pl.laplacian(g)
        exps = pl.GrowthExponents(nu=3.0, nu_prime=3.0, constant=1.0,
                                  residual=0.0)
        t_grid = np.geomspace(0.1, 20, 8)
        reports = rz.weighted_semigroup_norm_check(
            op, exps, [(1, 2), (2, 4), (1, np.inf)], t_grid)
        for rep in reports:
            assert np.isfinite(rep.envelope_constant)
            assert rep.envelope_constant > 0
            # measured <= C phi holds on the grid by construction
            for lo, ph in zip(rep.lower, rep.phi):
                assert lo <= rep.envelope_constant * ph * (1 + 1e-12)


class TestTrends:
    def test_bounded_sequence(self):
        cls, ratios = rz._trend([1.0, 1.01, 1.012])
        assert cls == "bounded"

    def test_growing_sequence(self):
        cls, ratios = rz._trend([1.0, 1.08, 1.17, 1.27])
        assert cls == "growing"

    def test_v0_experiment_p2_bounded(self):
        fam = [pl.generate_graph(pl.GeometrySpec.lattice(3, R))
               for R in (3, 4, 5)]
        rep = rz.riesz_range_experiment(
            fam, lambda g: Potential.zero(g), [1.5, 2], seed=3,
            boyd_iters=30, boyd_tol=1e-7)
        assert rep.plain_trends[2][0] == "bounded"
        for est in rep.plain_norms[2]:
            assert est.lower == pytest.approx(1.0, abs=1e-8)
        assert rep.plain_trends[1.5][0] == "bounded"

    def test_subcriticality_guard(self, p3):
        fam = [p3]
        with pytest.raises(rz.RieszError):
            rz.riesz_range_experiment(
                fam, lambda g: Potential.point_mass(g, (0,), -1.5), [2],
                seed=0)


class TestAOIntegral:
    def test_compact_support_value(self):
        g = pl.generate_graph(pl.GeometrySpec.lattice(3, 5))
        v = Potential.point_mass(g, (0, 0, 0), -0.3)
        p = 2.0
        total = rz.ao_integral(g, v, p)
        expect = sum((0.3 ** (p / 2) / g.ball_volume(g.origin, t)) ** (1 / p)
                     for t in range(1, 7))
        assert total == pytest.approx(expect, rel=1e-12)

    def test_scaling_power(self):
        g = pl.generate_graph(pl.GeometrySpec.lattice(3, 5))
        v = Potential.bump(g, -0.3, 1)
        a = rz.ao_integral(g, v, 2.0)
        b = rz.ao_integral(g, v.scaled(4.0), 2.0)
        assert b == pytest.approx(2.0 * a, rel=1e-12)
