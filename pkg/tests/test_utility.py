import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsr.gp import c_lambda
from gsr.tasks import TaskSpec, TaskState, record_eval
from gsr.utility import (
    REFERENCE_INTERVAL,
    BtWorld,
    Candidate,
    CdfUtilityParams,
    CommitteeConfig,
    CommitteeOracle,
    DirectOracle,
    ObjectiveOracle,
    QueryContext,
    UtilityInterval,
    calibrate_cdf,
    call_delta,
    committee_size_epsf,
    committee_size_explicit,
    direct_utility_cdf,
    hoeffding_p_interval,
    hoeffding_radius,
    simulate_votes,
    transport_interval,
    utility_ci_direct,
    votes_for_width,
)


def series_normal_cdf(z, terms=80):
    """Phi(z) from the Taylor series of the error function."""
    x = z / math.sqrt(2.0)
    total, term = 0.0, x
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -x * x / (n + 1)
    return 0.5 + total / math.sqrt(math.pi)


@pytest.fixture
def linear_world():
    return BtWorld(lambda task, value: value)


@pytest.fixture
def played_state():
    state = TaskState(TaskSpec("a", ((0.0, 1.0),)), 1)
    record_eval(state, [0.5], 1.0)
    return state


class TestInterval:
    def test_rejects_empty_and_out_of_range(self):
        with pytest.raises(ValueError):
            UtilityInterval(0.6, 0.4)
        with pytest.raises(ValueError):
            UtilityInterval(-0.1, 0.4)
        with pytest.raises(ValueError):
            UtilityInterval(0.1, 0.4, "guess")

    def test_objective_source_is_unbounded(self):
        iv = UtilityInterval(-5.0, 7.0, "objective")
        assert not iv.bounded and iv.width == 12.0


class TestCdfUtility:
    def test_centre_and_one_sigma(self):
        params = CdfUtilityParams(2.0, 0.5)
        assert direct_utility_cdf(2.0, params) == pytest.approx(0.5, abs=1e-15)
        assert direct_utility_cdf(2.5, params) == pytest.approx(0.841345, abs=1e-6)
        assert direct_utility_cdf(2.5, params) == pytest.approx(series_normal_cdf(1.0), abs=1e-12)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=30))
    def test_monotone(self, zs):
        params = CdfUtilityParams(0.3, 1.7)
        vals = [direct_utility_cdf(z, params) for z in sorted(zs)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_constant_objective_hits_floor(self):
        p = calibrate_cdf(lambda X: np.full(len(X), 3.0), lambda r, S: r.random((S, 1)), 1000, sigma_floor=1e-6)
        assert p.mu == 3.0 and p.sigma == 1e-6

    def test_uniform_moments(self):
        for seed in range(20):
            p = calibrate_cdf(lambda X: X[:, 0], lambda r, S: r.random((S, 1)), 20000, np.random.default_rng(seed))
            assert abs(p.mu - 0.5) < 0.01
            assert abs(p.sigma - 1 / math.sqrt(12)) < 0.01

    def test_independent_calibrations_agree(self):
        f, draw = (lambda X: np.sin(5 * X[:, 0])), (lambda r, S: r.random((S, 1)))
        a = calibrate_cdf(f, draw, 20000, np.random.default_rng(1))
        b = calibrate_cdf(f, draw, 20000, np.random.default_rng(2))
        assert abs(a.mu - b.mu) <= 3 * a.sigma / math.sqrt(20000) * math.sqrt(2)


class TestDirectInterval:
    def test_committee_equivalent_radius(self):
        assert call_delta(1, 0.05) == pytest.approx(0.0050661, abs=1e-7)
        iv = utility_ci_direct(0.5, 1, 1 / 256, 0.05)
        phi = math.sqrt(2 / 256 * math.log(2 / (0.05 / math.pi**2)))
        assert iv.width / 2 == pytest.approx(phi)
        assert phi == pytest.approx(0.2161, abs=1e-4)

    def test_clips_at_one(self):
        delta1 = call_delta(1, 0.05)
        sigma2 = 0.04 / (2 * math.log(2 / delta1))
        iv = utility_ci_direct(0.95, 1, sigma2, 0.05)
        assert iv.lower == pytest.approx(0.75) and iv.upper == 1.0

    def test_narrows_with_more_votes(self):
        widths = [utility_ci_direct(0.5, 3, 1 / (4 * K), 0.05).width for K in (16, 64, 256, 1024)]
        assert all(a > b for a, b in zip(widths, widths[1:]))


class TestVotes:
    def test_equal_scores_half(self, linear_world):
        k = simulate_votes(linear_world, Candidate("a", 1.0), Candidate("b", 1.0), 10_000, np.random.default_rng(0))
        assert abs(k / 10_000 - 0.5) < 0.02

    def test_score_gap_two(self, linear_world):
        k = simulate_votes(linear_world, Candidate("a", 2.0), None, 10_000, np.random.default_rng(1))
        assert abs(k / 10_000 - 1 / (1 + math.exp(-2))) < 0.02
        assert 1 / (1 + math.exp(-2)) == pytest.approx(0.8808, abs=1e-4)

    def test_seeded_counts_repeat(self, linear_world):
        draws = [simulate_votes(linear_world, Candidate("a", 0.3), None, 64, np.random.default_rng(5)) for _ in range(2)]
        assert draws[0] == draws[1]


class TestHoeffding:
    def test_worked_value(self):
        assert hoeffding_radius(64, 0.01) == pytest.approx(0.2034, abs=1e-4)
        lo, hi = hoeffding_p_interval(48, 64, 0.01)
        assert lo == pytest.approx(0.5466, abs=1e-4) and hi == pytest.approx(0.9534, abs=1e-4)

    def test_all_wins_clip(self):
        assert hoeffding_p_interval(64, 64, 0.01)[1] == 1.0

    def test_coverage(self):
        r = np.random.default_rng(3)
        p = r.random(10_000)
        k = r.binomial(64, p)
        inside = [lo <= pi <= hi for pi, (lo, hi) in zip(p, (hoeffding_p_interval(int(v), 64, 0.01) for v in k))]
        assert np.mean(inside) >= 0.99

    def test_votes_for_width_inverts_radius(self):
        K = votes_for_width(0.1, 0.05)
        assert 2 * hoeffding_radius(K, 0.05) <= 0.1
        assert 2 * hoeffding_radius(K - 1, 0.05) > 0.1


class TestTransport:
    def test_reference_anchor_returns_win_rate(self):
        iv = transport_interval(REFERENCE_INTERVAL, 0.73, 0.73)
        assert iv.lower == pytest.approx(0.73) and iv.upper == pytest.approx(0.73)

    def test_even_odds_return_anchor(self):
        iv = transport_interval(UtilityInterval(0.4, 0.6), 0.5, 0.5)
        assert iv.lower == pytest.approx(0.4) and iv.upper == pytest.approx(0.6)

    def test_chained_matches_direct(self):
        # three nodes: 0 is the reference, 1 the anchor, 2 the queried node
        hits = 0
        for seed in range(50):
            r = np.random.default_rng(seed)
            theta = r.uniform(-2, 2, 3)
            sig = lambda d: 1 / (1 + math.exp(-d))
            k10, k21, k20 = r.binomial(64, [sig(theta[1] - theta[0]), sig(theta[2] - theta[1]), sig(theta[2] - theta[0])])
            anchor = transport_interval(REFERENCE_INTERVAL, *hoeffding_p_interval(int(k10), 64, 0.01))
            chained = transport_interval(anchor, *hoeffding_p_interval(int(k21), 64, 0.01))
            lo, hi = hoeffding_p_interval(int(k20), 64, 0.01)
            hits += chained.lower <= hi and lo <= chained.upper
        assert hits == 50

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_monotone_in_inputs(self, a1, a2, p1, p2):
        alo, ahi = sorted((a1, a2))
        plo, phi = sorted((p1, p2))
        iv = transport_interval(UtilityInterval(alo, ahi), plo, phi)
        assert 0.0 <= iv.lower <= iv.upper <= 1.0
        point = transport_interval(UtilityInterval(alo, alo), plo, plo)
        assert iv.lower == pytest.approx(point.lower)


class TestCommitteeSizing:
    def test_explicit_worked_value(self):
        log_term = math.log(40)
        assert 8 * log_term / 0.25 == pytest.approx(118.05, abs=0.01)
        assert 32 * log_term / (0.25 * 0.6**2) == pytest.approx(1311.7, abs=0.1)
        assert committee_size_explicit(0.1, 0.2, 0.5, 0.05) == 1312

    def test_infeasible_at_boundary(self):
        assert committee_size_explicit(0.1, 0.8, 0.5, 0.05) is None

    @given(st.floats(0.03, 1.0), st.floats(0.03, 1.0))
    def test_nonincreasing_in_eta(self, e1, e2):
        lo, hi = sorted((e1, e2))
        assert committee_size_explicit(hi, 0.2, 0.5, 0.05) <= committee_size_explicit(lo, 0.2, 0.5, 0.05)

    def test_epsf_worked_value(self):
        assert 4 * math.log(40) / (2 * c_lambda(1.0) * 4) == pytest.approx(0.639, abs=1e-3)
        assert committee_size_epsf(4, 1.0, 1.0, 4.0, 1.0, 1.0, 0.05) == 1

    def test_epsf_linear_in_s(self):
        base = math.log(40) / (2 * c_lambda(1.0) * 4)
        for s in (10, 100, 1000):
            assert committee_size_epsf(s, 1.0, 1.0, 4.0, 1.0, 1.0, 0.05) == math.ceil(s * base)

    @given(st.integers(1, 500), st.floats(0.2, 3), st.floats(0.2, 3), st.floats(1, 10), st.floats(0.1, 20))
    def test_epsf_width_substitutes_back(self, s, c_u, L, b, g):
        lam, delta = 1e-2, 0.05
        K = committee_size_epsf(s, c_u, L, b, g, lam, delta)
        eps_f = 2 * math.sqrt(c_lambda(lam) * b * g / s)
        assert 2 * hoeffding_radius(K, delta) <= c_u * L * eps_f * (1 + 1e-9)


class TestOracles:
    def test_direct_oracle_exact_without_noise(self, played_state):
        oracle = DirectOracle(lambda spec, z: 0.25 * z)
        fb = oracle.query(played_state, None, QueryContext(1, 1.0), np.random.default_rng(0))
        assert fb.u_tilde == 0.25 and fb.interval.width == 0.0

    def test_objective_oracle_reports_incumbent(self, played_state):
        fb = ObjectiveOracle().query(played_state, None, QueryContext(1, 1.0), np.random.default_rng(0))
        assert fb.interval.lower == fb.interval.upper == 1.0 and not fb.interval.bounded

    @pytest.mark.parametrize("mode", ["fixed", "width_targeted", "epsf_targeted"])
    def test_committee_intervals_valid(self, mode, linear_world, played_state):
        oracle = CommitteeOracle(linear_world, CommitteeConfig(64, 0.05, sizing_mode=mode))
        ctx = QueryContext(4, 0.3, 1.0, 1.0, 4.0, 1.0, 1e-4)
        fb = oracle.query(played_state, None, ctx, np.random.default_rng(0))
        assert 0.0 <= fb.interval.lower <= fb.interval.upper <= 1.0
        assert fb.votes >= 1 and oracle.votes_total == fb.votes

    def test_epsf_targeted_width_bound(self, linear_world, played_state):
        oracle = CommitteeOracle(linear_world, CommitteeConfig(sizing_mode="epsf_targeted"))
        for s, eps in ((1, 0.5), (4, 0.25), (16, 0.1)):
            fb = oracle.query(played_state, None, QueryContext(s, eps), np.random.default_rng(s))
            assert fb.interval.width <= eps + 1e-12

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CommitteeConfig(sizing_mode="unknown")
        with pytest.raises(ValueError):
            CommitteeConfig(votes_per_query=0)
