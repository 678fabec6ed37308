"""Closed-form location and support-size bounds for the optimal input.

Lambert W on both real branches is implemented here (Halley iteration from
branch-specific starting points) so the bounds carry no special-function
dependency.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

from .channel import ChannelParams, DomainError

INV_E = math.exp(-1.0)
BOUNDARY_TOL = 1e-12


def _halley(z: float, w: float) -> float:
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - z
        if f == 0.0:
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if w_new == w or abs(step) <= 1e-16 * (1.0 + abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


def _log_newton(z: float) -> float:
    # w + log w = log z for large z, where w e^w itself would overflow
    lz = math.log(z)
    w = lz - math.log(lz) + math.log(lz) / lz
    for _ in range(50):
        step = (w + math.log(w) - lz) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-16 * w:
            break
    return w


def _branch_series(p: float, sign: float) -> float:
    # expansion about the branch point z = -1/e in p = sqrt(2 (e z + 1))
    q = sign * p
    return -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q**3 - 43.0 / 540.0 * q**4


def lambert_w0(z: float) -> float:
    """Principal branch ``W0``: the solution ``w >= -1`` of ``w e^w = z``."""
    z = float(z)
    if math.isnan(z) or z < -INV_E:
        # tolerate the representation error of -1/e itself
        if not z >= -INV_E * (1 + 4e-16):
            raise DomainError(f"W0 undefined for z={z!r} < -1/e")
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf
    p2 = 2.0 * (math.e * z + 1.0)
    if p2 <= 0.0:
        return -1.0
    p = math.sqrt(p2)
    if p < 0.5:
        w = _branch_series(p, 1.0)
    elif z < 3.0:
        w = math.log1p(z) * (1.0 - math.log1p(math.log1p(z)) / (2.0 + math.log1p(z)))
    else:
        return _log_newton(z)
    return max(_halley(z, w), -1.0)


def lambert_wm1(z: float) -> float:
    """Lower branch ``W-1``: the solution ``w <= -1`` of ``w e^w = z`` for ``z`` in ``[-1/e, 0)``."""
    z = float(z)
    if math.isnan(z) or z >= 0.0 or not z >= -INV_E * (1 + 4e-16):
        raise DomainError(f"W-1 undefined for z={z!r}")
    p2 = 2.0 * (math.e * z + 1.0)
    if p2 <= 0.0:
        return -1.0
    p = math.sqrt(p2)
    if p < 0.5:
        w = _branch_series(p, -1.0)
    else:
        l1 = math.log(-z)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    return min(_halley(z, w), -1.0)


class Regime(str, enum.Enum):
    TWO_POINT = "two_point"
    GENERAL = "general"
    BOUNDARY = "boundary"


def regime(params: ChannelParams) -> Regime:
    s = params.peak_rate
    if abs(s - math.e) <= BOUNDARY_TOL:
        return Regime.BOUNDARY
    return Regime.TWO_POINT if s < math.e else Regime.GENERAL


@dataclass(frozen=True)
class LocationBounds:
    """Interior-point intervals in ``x`` coordinates, plus the raw ``x + lam`` chain.

    ``chain`` is ``(simple_lo, lambert_lo, lambert_hi, simple_hi)`` before
    shifting and clipping; it is nondecreasing whenever ``A + lam > e``.
    """

    lambert: tuple[float, float]
    simple: tuple[float, float]
    chain: tuple[float, float, float, float]

    def chain_holds(self, tol: float = 1e-12) -> bool:
        c = self.chain
        return all(c[k] <= c[k + 1] * (1 + tol) + tol for k in range(3))


def interior_location_bounds(params: ChannelParams) -> LocationBounds | None:
    """Where interior support points may lie; ``None`` outside the ``A + lam > e`` regime."""
    if regime(params) is not Regime.GENERAL:
        return None
    s, lam, a = params.peak_rate, params.dark_current, params.amplitude
    z = -1.0 / s
    # s * exp(W(-1/s)) == -1 / W(-1/s)
    lam_lo = -1.0 / lambert_wm1(z)
    lam_hi = -1.0 / lambert_w0(z)
    simple_lo = math.exp(-math.sqrt(2.0 * (math.log(s) - 1.0)))
    simple_hi = s - 1.0

    def clip(lo, hi):
        return (min(max(lo - lam, 0.0), a), min(max(hi - lam, 0.0), a))

    return LocationBounds(
        lambert=clip(lam_lo, lam_hi),
        simple=clip(simple_lo, simple_hi),
        chain=(simple_lo, lam_lo, lam_hi, simple_hi),
    )


def _log1p_exp(u: float) -> float:
    return u + math.log1p(math.exp(-u)) if u > 0 else math.log1p(math.exp(u))


def support_upper_log_term(params: ChannelParams) -> float | None:
    """The ``log(1 + ...)`` term of the support upper bound, or ``None`` when it does not apply."""
    if regime(params) is not Regime.GENERAL:
        return None
    a, lam = params.amplitude, params.dark_current
    if lam == 0.0:
        la = math.log(a)
        u = la + 2.0 * math.e * a + 1.0 + math.log(la + math.sqrt(2.0 * (la - 1.0)))
    else:
        s = a + lam
        es = math.e * s
        u = math.log(es + 2.0 * lam) + 2.0 * (es + lam) + math.log(math.log(s / lam))
    return _log1p_exp(u)


def support_upper_bound(params: ChannelParams) -> int | None:
    """Upper bound on the number of support points; ``None`` at ``A + lam == e``."""
    r = regime(params)
    if r is Regime.TWO_POINT:
        return 2
    if r is Regime.BOUNDARY:
        return None
    return int(math.floor(3.0 + support_upper_log_term(params)))


def lapidoth_exp_capacity_lower(params: ChannelParams) -> float:
    """Lower bound on ``exp(C)`` in nats, growing like ``sqrt(A)``."""
    a, lam = params.amplitude, params.dark_current
    log_val = (
        0.5 * math.log(2.0 * a / (math.pi * math.e**3))
        + (1.0 + a / 3.0) * math.log1p(3.0 / a)
        - math.sqrt((lam + 1.0 / 12.0) / a) * (math.pi / 4.0 + 0.5 * math.log(2.0))
    )
    return math.exp(log_val)


def support_lower_bound(params: ChannelParams, capacity_opt: float | None = None) -> int:
    """``ceil(max(2, e^C))``, with the closed-form ``e^C`` bound standing in when ``C`` is unknown."""
    ec = math.exp(capacity_opt) if capacity_opt is not None else lapidoth_exp_capacity_lower(params)
    return int(math.ceil(max(2.0, ec)))


@dataclass(frozen=True)
class BoundsReport:
    regime: Regime
    interior_interval_lambert: tuple[float, float] | None
    interior_interval_simple: tuple[float, float] | None
    support_upper: int | None
    support_lower: int
    lapidoth_exp_capacity: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def bounds_report(params: ChannelParams, capacity_opt: float | None = None) -> BoundsReport:
    loc = interior_location_bounds(params)
    return BoundsReport(
        regime=regime(params),
        interior_interval_lambert=loc.lambert if loc else None,
        interior_interval_simple=loc.simple if loc else None,
        support_upper=support_upper_bound(params),
        support_lower=support_lower_bound(params, capacity_opt),
        lapidoth_exp_capacity=lapidoth_exp_capacity_lower(params),
    )
