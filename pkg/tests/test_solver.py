import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poisson_capacity import (
    ChannelParams,
    DiscreteInput,
    DomainError,
    SolverConfig,
    choose_truncation,
    info_density,
    kkt_scan,
    derivative_terms,
    mutual_information,
    optimize_locations,
    optimize_probabilities,
    solve,
    support_lower_bound,
    two_point_capacity_oracle,
)

# frozen before the solver existed: brute-force q grid at 1e-7 in mpmath precision
TWO_POINT_C = 0.16724632797246056
TWO_POINT_Q = 0.39141246815920278

# regression values from converged runs (gap ~1e-13)
REFERENCE = {
    (5.0, 0.0): (0.7106646144378495, 3),
    (10.0, 0.0): (0.915846372284877, 4),
    (10.0, 1.0): (0.7328193207470476, 3),
    (60.0, 0.0): (1.551653440503813, 8),
    # just past a support split; stopping at the loose tolerance used to leave a ninth atom here
    (60.0, 0.5): (1.479838776295839, 8),
}


def setup(a, lam=0.0):
    p = ChannelParams(a, lam)
    return p, choose_truncation(p)


def test_two_point_oracle_golden():
    q, c = two_point_capacity_oracle(ChannelParams(0.5, 0.0))
    assert c == pytest.approx(TWO_POINT_C, abs=1e-11)
    assert q == pytest.approx(TWO_POINT_Q, abs=1e-6)


def test_two_point_oracle_edges():
    assert two_point_capacity_oracle(ChannelParams(1e-6, 0.0), q_step=1e-4)[1] < 1e-6
    for a in (0.1, 0.5, 0.9):
        q, _ = two_point_capacity_oracle(ChannelParams(a, 0.0), q_step=1e-4)
        assert 0 < q < 1
    with pytest.raises(DomainError):
        two_point_capacity_oracle(ChannelParams(1.0), q_step=0.01)


def test_probabilities_match_grid_oracle():
    p, t = setup(0.5)
    res = optimize_probabilities([0.0, 0.5], p, t)
    assert res.converged
    assert res.probs[1] == pytest.approx(TWO_POINT_Q, abs=1e-5)
    assert res.mutual_information == pytest.approx(TWO_POINT_C, abs=1e-12)


def test_single_point_and_bad_points():
    p, t = setup(2.0)
    res = optimize_probabilities([1.0], p, t)
    assert res.probs.tolist() == [1.0] and res.mutual_information == 0.0
    with pytest.raises(DomainError):
        optimize_probabilities([0.0, 0.0], p, t)
    with pytest.raises(DomainError):
        optimize_probabilities([0.0, 3.0], p, t)


def test_probabilities_permutation_invariant():
    p, t = setup(8.0, 0.5)
    pts = np.array([0.0, 2.0, 5.0, 8.0])
    a = optimize_probabilities(pts, p, t)
    perm = np.array([2, 0, 3, 1])
    b = optimize_probabilities(pts[perm], p, t)
    assert np.allclose(b.probs, a.probs[perm], atol=1e-10)


def test_probabilities_satisfy_kkt_on_points():
    p, t = setup(8.0, 0.5)
    pts = np.array([0.0, 2.0, 5.0, 8.0])
    res = optimize_probabilities(pts, p, t)
    assert res.converged
    live = res.probs > 0
    # the optimum leaves x=5 empty; it must end at exactly zero, not a denormal
    assert live.tolist() == [True, True, False, True]
    inp = DiscreteInput(pts[live], res.probs[live])
    d = info_density(pts, inp, p, t)
    assert np.ptp(d[live]) <= 1e-9
    assert d[~live].max() <= res.mutual_information


def test_optimize_locations_keeps_endpoints_and_shrinks_gradient():
    p, t = setup(10.0)
    inp = DiscreteInput([0.0, 10.0], [0.5, 0.5])
    assert optimize_locations(inp, p, t) is not None
    assert np.array_equal(optimize_locations(inp, p, t).points, inp.points)
    start = DiscreteInput([0.0, 1.0, 4.5, 10.0], [0.4, 0.15, 0.15, 0.3])
    before = np.abs(derivative_terms(start, p, t, start.points[1:-1]).i_prime)
    moved = optimize_locations(start, p, t)
    after = np.abs(derivative_terms(moved, p, t, moved.points[1:-1]).i_prime)
    assert moved.points[0] == 0.0 and moved.points[-1] == 10.0
    assert np.all(after < before)
    assert mutual_information(moved, p, t) >= mutual_information(start, p, t)


def test_location_gradient_matches_finite_difference():
    p, t = setup(10.0, 0.3)
    inp = DiscreteInput([0.0, 1.3, 4.0, 10.0], [0.35, 0.2, 0.15, 0.3])
    grad = inp.probs[1:-1] * derivative_terms(inp, p, t, inp.points[1:-1]).i_prime
    h = 1e-6
    for k in (1, 2):
        up, dn = np.array(inp.points), np.array(inp.points)
        up[k] += h
        dn[k] -= h
        fd = (mutual_information(DiscreteInput(up, inp.probs), p, t)
              - mutual_information(DiscreteInput(dn, inp.probs), p, t)) / (2 * h)
        assert grad[k - 1] == pytest.approx(fd, rel=1e-5)


def test_scan_flags_suboptimal_and_is_deterministic():
    p, t = setup(2.0)
    inp = DiscreteInput([0.0, 2.0], [0.5, 0.5])
    g1 = kkt_scan(inp, p, t)
    assert g1[0] > 1e-3
    assert kkt_scan(inp, p, t) == g1


def test_solve_two_point():
    p = ChannelParams(0.5, 0.0)
    sol = solve(p)
    assert sol.converged and sol.support_size == 2
    assert np.allclose(sol.input.points, [0.0, 0.5], atol=1e-6 * 0.5)
    assert sol.capacity_nats == pytest.approx(TWO_POINT_C, abs=1e-10)
    assert sol.capacity_bits == pytest.approx(sol.capacity_nats / math.log(2), rel=1e-15)


@pytest.mark.parametrize("key", sorted(REFERENCE))
def test_solve_regression(key, solved):
    p, t, sol = solved(*key)
    cap, n = REFERENCE[key]
    assert sol.converged
    assert sol.support_size == n
    assert sol.capacity_nats == pytest.approx(cap, abs=1e-9)
    assert sol.kkt_gap <= 1e-6 and sol.support_gap <= 1e-6
    assert sol.support_size >= support_lower_bound(p, sol.capacity_nats)


def test_history_is_monotone(solved):
    _, _, sol = solved(10.0)
    h = np.array(sol.history)
    assert np.all(np.diff(h) >= -1e-12)


def test_capacity_increases_with_amplitude():
    caps = [solve(ChannelParams(a, 0.5)).capacity_nats for a in (0.5, 1.0, 2.0, 4.0, 8.0)]
    assert all(b > a for a, b in zip(caps, caps[1:]))


def test_capacity_vanishes_as_amplitude_shrinks():
    assert solve(ChannelParams(1e-4, 0.0)).capacity_nats < 1e-3


def test_dark_current_lowers_capacity():
    assert solve(ChannelParams(5.0, 1.0)).capacity_nats < solve(ChannelParams(5.0, 0.0)).capacity_nats


@given(a=st.floats(0.05, 1.7), lam=st.floats(0, 1.0))
def test_two_point_regime_property(a, lam):
    sol = solve(ChannelParams(a, lam))
    assert sol.converged and sol.support_size == 2


def test_tight_tolerance_converges():
    sol = solve(ChannelParams(10.0, 0.0), SolverConfig(kkt_tolerance=1e-10))
    assert sol.converged and sol.kkt_gap <= 1e-10


def test_iteration_cap_reports_nonconvergence():
    sol = solve(ChannelParams(30.0, 0.0), SolverConfig(max_outer_iters=1))
    assert not sol.converged


@pytest.mark.parametrize("kw", [
    {"kkt_tolerance": 0.0},
    {"grid_points": 10},
    {"merge_distance": 0.5},
    {"prune_probability": 0.1},
    {"location_step": 2.0},
    {"polish_tolerance": 0.0},
    {"max_polish_rounds": -1},
])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        SolverConfig(**kw)


def test_config_from_mapping():
    cfg = SolverConfig.from_mapping({"kkt_tolerance": "1e-8", "grid_points": "20000"})
    assert cfg.kkt_tolerance == 1e-8 and cfg.grid_points == 20000
    with pytest.raises(KeyError):
        SolverConfig.from_mapping({"nope": "1"})


def test_polishing_disabled_still_certifies():
    sol = solve(ChannelParams(60.0, 0.5), SolverConfig(max_polish_rounds=0))
    assert sol.converged and sol.kkt_gap <= 1e-6
