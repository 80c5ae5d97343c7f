"""Market construction and the utility-value experiment."""

import numpy as np
import pytest

from spdsplit import MarketSpec, build_market, fbm_increment_covariance, utility_value
from spdsplit.finance import value_sweep
from spdsplit.oracle import brute_force_minimize
from spdsplit.primal import SolverOptions


class TestFbmCovariance:
    def test_half_gives_independent_increments(self):
        c = fbm_increment_covariance(5, 0.3, 0.5)
        np.testing.assert_allclose(c.to_dense(), 0.3 * np.eye(5), atol=1e-15)

    def test_lag_one_value(self):
        c = fbm_increment_covariance(4, 1.0, 0.75)
        assert c.first_column[1] == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-15)

    @pytest.mark.parametrize("hurst", [0.6, 0.75, 0.9])
    def test_spd_nonnegative_decreasing(self, hurst):
        from spdsplit import factorize

        c = fbm_increment_covariance(100, 0.01, hurst)
        factorize(c)  # SPD check
        col = c.first_column
        assert np.all(col >= 0)
        assert np.all(np.diff(col[1:]) <= 1e-15)


class TestBuildMarket:
    def test_n1_has_empty_span(self):
        for mode in ("full", "markov"):
            mkt = build_market(MarketSpec(1, 0.5, 2.0, 0.7, mode))
            assert mkt.basis.m == 0

    def test_n2_entries_by_hand(self):
        mkt = build_market(MarketSpec(2, 1.0, 1.0, 0.75, "full"))
        s = mkt.sigma.to_dense()
        assert s[0, 0] == pytest.approx(2.0)
        assert s[0, 2] == pytest.approx(np.sqrt(2.0) - 1.0)
        assert s[0, 1] == pytest.approx(1.0)

    def test_permuted_block_form(self):
        spec = MarketSpec(4, 0.25, 3.0, 0.8, "full")
        mkt = build_market(spec)
        s = mkt.sigma.to_dense()
        tau = mkt.permutation
        s1 = mkt.sigma1.to_dense()
        dt_eye = spec.delta_t * np.eye(4)
        block = np.block([[spec.alpha ** 2 * s1 + dt_eye, dt_eye],
                          [dt_eye, dt_eye]])
        assert np.max(np.abs(s[np.ix_(tau, tau)] - block)) <= 1e-12

    def test_basis_sizes_and_zero_diagonal(self):
        for n in (2, 5):
            full = build_market(MarketSpec(n, 0.1, 1.0, 0.7, "full")).basis
            markov = build_market(MarketSpec(n, 0.1, 1.0, 0.7, "markov")).basis
            assert full.m == n * (n - 1)
            assert markov.m == 2 * (n - 1)
            assert full.all_zero_diagonal and markov.all_zero_diagonal

    def test_markov_elements_aggregate_full_pairs(self):
        n_steps = 4
        full = build_market(MarketSpec(n_steps, 0.1, 1.0, 0.7, "full"))
        markov = build_market(MarketSpec(n_steps, 0.1, 1.0, 0.7, "markov"))
        full_mats = [e.to_dense() * s for e, s in
                     zip(full.basis.elements, full.basis.original_norms)]
        for e, s in zip(markov.basis.elements, markov.basis.original_norms):
            target = e.to_dense() * s
            # sum of the parity-matched full-information pairs
            col = int(e.cols[0])
            parity = int(e.rows[0]) % 2
            total = np.zeros_like(target)
            for f in full_mats:
                i, j = np.nonzero(np.triu(f))
                if j[0] == col and i[0] % 2 == parity:
                    total += f
            np.testing.assert_allclose(total, target, atol=1e-14)

    def test_spec_json_round_trip(self):
        spec = MarketSpec(7, 0.125, 4.5, 0.72, "markov")
        back = MarketSpec.from_json(spec.to_json())
        assert back == spec

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            MarketSpec(0, 0.1, 1.0, 0.7)
        with pytest.raises(ValueError):
            MarketSpec(3, 0.1, 1.0, 0.4)
        with pytest.raises(ValueError):
            MarketSpec(3, 0.1, 1.0, 1.0)
        with pytest.raises(ValueError):
            MarketSpec(3, 0.1, 1.0, 0.7, mode="bogus")
        assert MarketSpec(3, 0.1, 1.0, 0.5).is_boundary


class TestUtilityValue:
    def test_boundary_hurst_gives_zero(self):
        for n in (1, 20):
            res = utility_value(MarketSpec(n, 0.05, 5.0, 0.5, "full"))
            assert abs(res.v_star) <= 1e-8

    def test_n1_gives_zero(self):
        res = utility_value(MarketSpec(1, 0.5, 2.0, 0.8, "markov"))
        assert abs(res.v_star) <= 1e-12

    def test_n2_matches_oracle(self):
        spec = MarketSpec(2, 0.5, 5.0, 0.75, "full")
        res = utility_value(spec)
        mkt = build_market(spec)
        sig = mkt.sigma.to_dense()
        pi = np.linalg.inv(sig)
        _, phi = brute_force_minimize(0.5 * (pi + pi.T), mkt.basis)
        v_oracle = 0.5 * (np.linalg.slogdet(sig)[1] - phi)
        assert abs(res.v_star - v_oracle) <= 1e-8

    def test_value_nonnegative_and_consistent(self):
        res = utility_value(MarketSpec(8, 0.125, 4.0, 0.8, "full"))
        assert res.v_star >= -1e-10
        assert res.v_star == pytest.approx(
            0.5 * (res.sigma_logdet - res.qhat_logdet))

    def test_information_monotonicity(self):
        for h in (0.6, 0.85):
            vf = utility_value(MarketSpec(10, 0.1, 5.0, h, "full")).v_star
            vm = utility_value(MarketSpec(10, 0.1, 5.0, h, "markov")).v_star
            assert vf >= vm - 1e-8

    @pytest.mark.parametrize("mode", ["full", "markov"])
    def test_schur_path_matches_dense(self, mode):
        spec = MarketSpec(15, 1.0 / 15.0, 5.0, 0.8, mode)
        dense = utility_value(spec)
        schur = utility_value(spec, use_schur=True)
        assert abs(dense.v_star - schur.v_star) <= 1e-8
        assert np.max(np.abs(dense.decomposition.C - schur.decomposition.C)) <= 1e-7

    def test_scaling_invariance(self):
        # v is invariant under Z -> cZ: decompose c^2 Sigma directly
        from spdsplit import StructuredSpdMatrix, decompose

        spec = MarketSpec(6, 0.2, 3.0, 0.75, "full")
        mkt = build_market(spec)
        base = utility_value(spec).v_star
        c2 = 7.3
        sig = c2 * mkt.sigma.to_dense()
        pi = np.linalg.inv(sig)
        res = decompose(StructuredSpdMatrix.dense(0.5 * (pi + pi.T)), mkt.basis)
        v_scaled = 0.5 * (np.linalg.slogdet(sig)[1] - res.phi)
        assert abs(v_scaled - base) <= 1e-9

    def test_warm_start_does_not_change_result(self):
        # adjacent-H warm start must agree with the cold solve to 1e-8
        from spdsplit import StructuredSpdMatrix, newton_cg

        def precision_and_basis(h):
            mkt = build_market(MarketSpec(8, 0.125, 4.0, h, "full"))
            pi = np.linalg.inv(mkt.sigma.to_dense())
            return StructuredSpdMatrix.dense(0.5 * (pi + pi.T)), mkt.basis

        a_lo, basis = precision_and_basis(0.74)
        cold_lo = newton_cg(a_lo, basis)
        a_hi, _ = precision_and_basis(0.76)
        cold_hi = newton_cg(a_hi, basis)
        warm_hi = newton_cg(a_hi, basis, x0=cold_lo.x)
        assert abs(warm_hi.phi - cold_hi.phi) <= 1e-8
        assert np.max(np.abs(warm_hi.x - cold_hi.x)) <= 1e-6


class TestValueSweep:
    def test_rows_in_grid_order_with_failures_contained(self):
        template = MarketSpec(5, 0.2, 2.0, 0.7, "full")
        rows = value_sweep(template, [0.5, 0.7], modes=("full", "markov"))
        assert [(r.hurst, r.mode) for r in rows] == [
            (0.5, "full"), (0.5, "markov"), (0.7, "full"), (0.7, "markov")]
        assert all(r.error is None for r in rows)

    def test_parallel_jobs_match_serial(self):
        template = MarketSpec(6, 0.2, 3.0, 0.7, "full")
        grid = [0.55, 0.7, 0.85]
        serial = value_sweep(template, grid, modes=("full",), jobs=1)
        parallel = value_sweep(template, grid, modes=("full",), jobs=3)
        for r1, r2 in zip(serial, parallel):
            assert r1.v_star == pytest.approx(r2.v_star, abs=1e-12)

    def test_options_forwarded(self):
        template = MarketSpec(5, 0.2, 2.0, 0.7, "full")
        rows = value_sweep(template, [0.8], modes=("full",),
                           options=SolverOptions(grad_tolerance=1e-10))
        assert rows[0].grad_norm <= 1e-10
