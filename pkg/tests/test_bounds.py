import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poisson_capacity import (
    ChannelParams,
    DomainError,
    Regime,
    bounds_report,
    interior_location_bounds,
    lambert_w0,
    lambert_wm1,
    lapidoth_exp_capacity_lower,
    regime,
    support_lower_bound,
    support_upper_bound,
)
from poisson_capacity.bounds import support_upper_log_term

# mpmath oracles, 40 digits
W0_M01 = -0.11183255915896297
WM1_M01 = -3.577152063957297
LAMBERT_10 = (0.27955199614682571, 8.94193969556363951)
SIMPLE_10 = (0.19907891798939194, 9.0)
LOG_TERM_10_0 = 59.0334556  # floor(3 + .) = 62
LAPIDOTH_10_0 = 1.5826150849305528


def test_w0_values():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(-math.exp(-1)) == pytest.approx(-1.0, abs=1e-7)
    assert lambert_w0(-0.1) == pytest.approx(W0_M01, rel=1e-14)
    assert lambert_w0(math.e) == pytest.approx(1.0, rel=1e-15)
    assert lambert_w0(1e300) == pytest.approx(684.247208629761, rel=1e-14)


def test_wm1_values():
    assert lambert_wm1(-math.exp(-1)) == pytest.approx(-1.0, abs=1e-7)
    assert lambert_wm1(-0.1) == pytest.approx(WM1_M01, rel=1e-14)
    assert lambert_wm1(-1e-8) < lambert_wm1(-1e-4)


@pytest.mark.parametrize("z", [-0.5, -0.368, math.nan])
def test_w0_domain(z):
    with pytest.raises(DomainError):
        lambert_w0(z)


@pytest.mark.parametrize("z", [0.0, 0.1, -0.5])
def test_wm1_domain(z):
    with pytest.raises(DomainError):
        lambert_wm1(z)


@given(st.floats(-math.exp(-1), 1e6))
def test_w0_residual(z):
    w = lambert_w0(z)
    assert w >= -1
    assert abs(w * math.exp(w) - z) <= 1e-12 * max(abs(z), 1e-300) + 1e-15


@given(st.floats(-math.exp(-1), -1e-300))
def test_wm1_residual(z):
    w = lambert_wm1(z)
    assert w <= -1
    assert abs(w * math.exp(w) - z) <= 1e-12 * abs(z) + 1e-15


def test_w_agrees_with_scipy():
    from scipy.special import lambertw

    for z in np.linspace(-0.3678, -1e-6, 50):
        assert lambert_w0(z) == pytest.approx(lambertw(z, 0).real, rel=1e-13, abs=1e-15)
        assert lambert_wm1(z) == pytest.approx(lambertw(z, -1).real, rel=1e-13)


def test_regimes():
    assert regime(ChannelParams(2.0, 0.5)) is Regime.TWO_POINT
    assert regime(ChannelParams(10.0, 0.0)) is Regime.GENERAL
    assert regime(ChannelParams(1.0, math.e - 1.0)) is Regime.BOUNDARY


def test_location_intervals_at_ten():
    loc = interior_location_bounds(ChannelParams(10.0, 0.0))
    assert loc.lambert == pytest.approx(LAMBERT_10, rel=1e-14)
    assert loc.simple == pytest.approx(SIMPLE_10, rel=1e-14)
    assert loc.chain_holds()


def test_location_intervals_shift_by_dark_current():
    loc = interior_location_bounds(ChannelParams(9.0, 1.0))
    assert loc.lambert[1] == pytest.approx(LAMBERT_10[1] - 1.0, rel=1e-14)
    assert loc.lambert[0] == 0.0  # clipped


def test_location_none_outside_general_regime():
    assert interior_location_bounds(ChannelParams(2.0, 0.5)) is None
    assert interior_location_bounds(ChannelParams(1.0, math.e - 1.0)) is None


def test_lambert_interval_collapses_at_branch_point():
    widths = []
    for d in (1e-3, 1e-6, 1e-9):
        loc = interior_location_bounds(ChannelParams(math.e + d, 0.0))
        widths.append(loc.lambert[1] - loc.lambert[0])
        assert loc.lambert[0] <= 1.0 <= loc.lambert[1]
    assert widths[0] > widths[1] > widths[2]
    assert widths[2] < 1e-3


@given(a=st.floats(0.01, 1e4), lam=st.floats(0, 100))
def test_chain_property(a, lam):
    p = ChannelParams(a, lam)
    loc = interior_location_bounds(p)
    if p.peak_rate > math.e + 1e-12:
        assert loc is not None and loc.chain_holds(1e-12)


def test_support_upper_golden():
    assert support_upper_log_term(ChannelParams(10.0, 0.0)) == pytest.approx(LOG_TERM_10_0, rel=1e-8)
    assert support_upper_bound(ChannelParams(10.0, 0.0)) == 62
    assert support_upper_bound(ChannelParams(10.0, 1.0)) == 69
    assert support_upper_bound(ChannelParams(2.0, 0.5)) == 2
    assert support_upper_bound(ChannelParams(1.0, math.e - 1.0)) is None


@pytest.mark.parametrize("a", [1e2, 1e3, 1e4])
def test_support_upper_grows_linearly(a):
    assert 2 * math.e - 0.5 <= support_upper_bound(ChannelParams(a, 0.0)) / a <= 2 * math.e + 0.5


def test_support_upper_finite_for_huge_amplitude():
    assert support_upper_bound(ChannelParams(1e8, 3.0)) < 1e9


def test_lapidoth_golden_and_trends():
    assert lapidoth_exp_capacity_lower(ChannelParams(10.0, 0.0)) == pytest.approx(LAPIDOTH_10_0, rel=1e-13)
    ratio = lapidoth_exp_capacity_lower(ChannelParams(1e4)) / lapidoth_exp_capacity_lower(ChannelParams(1e2))
    assert 8.0 <= ratio <= 12.0
    vals = [lapidoth_exp_capacity_lower(ChannelParams(10.0, lam)) for lam in (0.0, 0.5, 1.0, 5.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_support_lower():
    assert support_lower_bound(ChannelParams(10.0, 0.0)) == 2
    assert support_lower_bound(ChannelParams(10.0, 0.0), capacity_opt=0.5) == 2
    assert support_lower_bound(ChannelParams(60.0, 0.0), capacity_opt=1.551653440503813) == 5


def test_support_lower_consistent_with_solutions(solved):
    for a, lam in [(0.5, 0.0), (5.0, 0.0), (10.0, 1.0), (60.0, 0.0)]:
        p, _, sol = solved(a, lam)
        assert support_lower_bound(p, sol.capacity_nats) <= sol.support_size


def test_report_fields():
    r = bounds_report(ChannelParams(10.0, 0.0)).as_dict()
    assert r["regime"] == "general"
    assert r["support_upper"] == 62 and r["support_lower"] == 2
    assert r["interior_interval_lambert"] == pytest.approx(LAMBERT_10, rel=1e-14)
    r = bounds_report(ChannelParams(2.0, 0.5)).as_dict()
    assert r["regime"] == "two_point" and r["support_upper"] == r["support_lower"] == 2
    assert bounds_report(ChannelParams(1.0, math.e - 1.0)).regime is Regime.BOUNDARY
