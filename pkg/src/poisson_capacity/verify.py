"""Offline verification of a solved input law against the analytic identities and bounds."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import pdtrc

from .bounds import Regime, interior_location_bounds, regime, support_lower_bound, support_upper_bound
from .channel import ChannelParams, TruncationPolicy, choose_truncation
from .info import DiscreteInput, exact_support_identity, info_density, mutual_information
from .posterior import (
    _series,
    build_posterior,
    cumulant_ratios,
    product_identity_check,
    turing_identity_check,
    zero_count_diagnostic,
)
from .solver import CapacitySolution, SolverConfig, kkt_scan

ROUNDTRIP_TOL = 1e-12
IDENTITY_TOL = 1e-10
FD_REL_TOL = 1e-5
FD_ABS_FLOOR = 1e-9
EXACT_N_TOL = 1e-2
LOCATION_SLACK = 1e-5  # times A
IDENTITY_MAX_Y = 50


class Status(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    WARN = "warn"


@dataclass(frozen=True)
class Check:
    name: str
    status: Status
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        text = f"[{self.status.value.upper():4}] {self.name:<26} value={self.value:.3e} threshold={self.threshold:.3e}"
        return f"{text}  {self.detail}" if self.detail else text


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, name, ok, value, threshold, detail="", soft=False):
        status = Status.PASS if ok else (Status.WARN if soft else Status.FAIL)
        self.checks.append(Check(name, status, float(value), float(threshold), detail))

    @property
    def passed(self) -> bool:
        return all(c.status is not Status.FAIL for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.status is Status.FAIL]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def render(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append("verification " + ("PASSED" if self.passed else "FAILED"))
        return "\n".join(lines)


def derivative_fd_errors(input: DiscreteInput, params: ChannelParams, trunc: TruncationPolicy, xs,
                         rel_step: float = 1e-3):
    """Series derivatives against five-point central differences of the next-lower quantity.

    Returns a dict mapping ``G_prime``, ``G_second``, ``i_prime`` and
    ``i_second`` to ``(series, finite_difference)`` array pairs.
    """
    xs = np.asarray(xs, dtype=float)
    table = build_posterior(input, params, trunc)
    lam = params.dark_current
    h = rel_step * (xs + lam)

    def at(x):
        G, Gp, Gpp, ip, ipp = _series(table, x)
        r = x + lam
        return {"i": G + r * np.log(r) - r, "G": G, "Gp": Gp, "ip": ip, "Gpp": Gpp, "ipp": ipp}

    mid = at(xs)
    p1, m1, p2, m2 = at(xs + h), at(xs - h), at(xs + 2 * h), at(xs - 2 * h)

    def fd(key):
        return (8.0 * (p1[key] - m1[key]) - (p2[key] - m2[key])) / (12.0 * h)

    return {
        "G_prime": (mid["Gp"], fd("G")),
        "G_second": (mid["Gpp"], fd("Gp")),
        "i_prime": (mid["ip"], fd("i")),
        "i_second": (mid["ipp"], fd("ip")),
    }


def _fd_worst(pairs) -> float:
    an, fd = pairs
    return float(np.max(np.abs(an - fd) / (FD_REL_TOL * np.abs(an) + FD_ABS_FLOOR)))


def verify_solution(input: DiscreteInput, params: ChannelParams, capacity_nats: float,
                    config: SolverConfig | None = None, y_max: int | None = None,
                    fd_points: int = 25) -> VerificationReport:
    """Run every check on a candidate capacity-achieving law.

    Hard checks fail the report; the zero-count diagnostic and the ``y = 0``
    row of the dark-current-free cumulant bound only warn.
    """
    config = config or SolverConfig()
    rep = VerificationReport()
    a, lam = params.amplitude, params.dark_current
    input.validate(params)
    trunc = choose_truncation(params, config.tail_epsilon)
    tol = config.kkt_tolerance

    if y_max is not None:
        tail = float(pdtrc(y_max, params.peak_rate))
        rep.add("truncation", y_max >= trunc.y_max or tail <= config.tail_epsilon, tail, config.tail_epsilon,
                f"y_max={y_max} recomputed={trunc.y_max}")

    mi = mutual_information(input, params, trunc)
    rep.add("capacity_roundtrip", abs(mi - capacity_nats) <= ROUNDTRIP_TOL, abs(mi - capacity_nats),
            ROUNDTRIP_TOL, f"C={mi!r}")

    pts = input.points
    ends = math.isclose(pts[0], 0.0, abs_tol=1e-12 * a) and math.isclose(pts[-1], a, rel_tol=1e-12)
    rep.add("endpoints_in_support", ends, float(not ends), 0.0)

    gap, gx = kkt_scan(input, params, trunc, config.grid_points)
    rep.add("kkt_scan", gap <= tol, gap, tol, f"argmax x={gx:.6g}")
    dens = np.atleast_1d(info_density(pts, input, params, trunc))
    sgap = float(np.max(np.abs(dens - mi)))
    rep.add("kkt_support_equality", sgap <= tol, sgap, tol)

    lo_x = 0.01 * a
    xs = np.linspace(lo_x, a, fd_points)
    if lam == 0 and pts[-1] == 0:
        xs = xs[xs > 0]
    for name, pairs in derivative_fd_errors(input, params, trunc, xs).items():
        worst = _fd_worst(pairs)
        rep.add(f"derivative_{name}", worst <= 1.0, worst, 1.0, "scaled error vs rel 1e-5 + abs 1e-9")

    table = build_posterior(input, params, trunc)
    y_top = min(IDENTITY_MAX_Y, trunc.y_max)
    tur = max(abs(turing_identity_check(input, params, trunc, y, table)[2]) for y in range(y_top + 1))
    rep.add("turing_identity", tur <= IDENTITY_TOL, tur, IDENTITY_TOL, f"y<={y_top}")
    prod = max(abs(product_identity_check(input, params, trunc, y, table)[2]) for y in range(y_top + 1))
    rep.add("product_identity", prod <= IDENTITY_TOL, prod, IDENTITY_TOL, f"y<={y_top}")

    ratios = cumulant_ratios(table)[: y_top + 1]
    in_unit = bool(np.all((ratios > 0) & (ratios <= 1 + 1e-12)))
    rep.add("cumulant_ratio_unit", in_unit, float(np.max(ratios)), 1.0, f"min={np.min(ratios):.3e}")
    if lam > 0:
        floor = lam / (a + lam)
        rep.add("cumulant_ratio_floor", bool(np.all(ratios >= floor * (1 - 1e-12))), float(np.min(ratios)), floor)
    elif a > math.e:
        floor = math.exp(-math.sqrt(2.0 * (math.log(a) - 1.0))) / a
        rep.add("cumulant_ratio_floor", bool(np.all(ratios[1:] >= floor * (1 - 1e-12))), float(np.min(ratios[1:])),
                floor, "y>=1")
        rep.add("cumulant_ratio_floor_y0", ratios[0] >= floor, float(ratios[0]), floor,
                "atom at zero enters the y=0 row", soft=True)

    n = len(input)
    r = regime(params)
    if r is Regime.TWO_POINT:
        rep.add("location_two_point", n == 2, n, 2)
    elif r is Regime.GENERAL:
        lo, hi = interior_location_bounds(params).lambert
        slack = LOCATION_SLACK * a
        inner = pts[1:-1]
        excess = max([0.0] + [max(lo - x, x - hi) for x in inner])
        rep.add("location_interval", excess <= slack, excess, slack, f"interval=[{lo:.6f}, {hi:.6f}]")

    lower = support_lower_bound(params, mi)
    upper = support_upper_bound(params)
    ok = lower <= n and (upper is None or n <= upper)
    rep.add("support_size_bounds", ok, n, upper if upper is not None else math.inf, f"lower={lower} upper={upper}")

    sol = CapacitySolution(input=input, capacity_nats=mi, kkt_gap=gap, iterations=0, y_max=trunc.y_max,
                           converged=True)
    n_pred, _, egap = exact_support_identity(sol, params, trunc)
    rep.add("exact_support_identity", egap <= EXACT_N_TOL, egap, EXACT_N_TOL, f"predicted N={n_pred:.6f}")

    if lam == 0:
        inside = int(np.count_nonzero((pts > 0) & (pts < 1)))
        rep.add("unit_interval_atoms", inside <= 1, inside, 1)

    zc = zero_count_diagnostic(sol, params, trunc)
    rep.add("zero_count", zc.holds, zc.support_size, zc.chain_bound, f"sign changes={zc.sign_changes}", soft=True)
    return rep


def verify(solution: CapacitySolution, params: ChannelParams, config: SolverConfig | None = None) -> VerificationReport:
    return verify_solution(solution.input, params, solution.capacity_nats, config, solution.y_max)
