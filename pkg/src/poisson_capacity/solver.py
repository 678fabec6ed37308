"""Capacity-achieving input by alternating probability / location optimization.

The outer loop follows Smith's recipe: optimize the current support, scan the
information density for the largest violation of the KKT inequality, insert a
mass point there, repeat. The KKT scan doubles as the optimality certificate,
since a law whose information density never exceeds its mutual information
is optimal.

Every phase is an ascent step on the mutual information; ``history`` on the
returned solution records it after each phase.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from .channel import ChannelParams, DomainError, TruncationPolicy, choose_truncation, log_pmf_matrix
from .info import DiscreteInput, mutual_information
from .posterior import build_posterior, derivative_terms

ASCENT_SLACK = 1e-12
TIE_TOL = 1e-12
ROUNDOFF = 8 * np.finfo(float).eps


def _lse(a, axis=0):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(a - m).sum(axis=axis)) + np.squeeze(m, axis=axis)


def _no_worse(new: float, old: float) -> bool:
    return new >= old - ROUNDOFF * max(1.0, abs(old))


@dataclass(frozen=True)
class SolverConfig:
    kkt_tolerance: float = 1e-6
    prob_tolerance: float = 1e-12
    grid_points: int = 10_000
    refine_factor: int = 100
    max_outer_iters: int = 200
    merge_distance: float = 1e-4  # fraction of A
    prune_probability: float = 1e-9
    location_step: float = 0.25  # largest single location move, fraction of A
    tail_epsilon: float = 1e-12
    max_prob_iters: int = 5000
    max_location_rounds: int = 60
    polish_tolerance: float = 1e-10
    max_polish_rounds: int = 10

    def __post_init__(self):
        if not self.kkt_tolerance > 0:
            raise DomainError("kkt_tolerance must be positive")
        if self.grid_points < 1000:
            raise DomainError("grid_points must be at least 1000")
        if not 0 < self.merge_distance <= 0.01:
            raise DomainError("merge_distance must lie in (0, 0.01]")
        if not 0 <= self.prune_probability <= 1e-6:
            raise DomainError("prune_probability must lie in [0, 1e-6]")
        if not 0 < self.location_step <= 1:
            raise DomainError("location_step must lie in (0, 1]")
        if not self.polish_tolerance > 0 or self.max_polish_rounds < 0:
            raise DomainError("polish_tolerance must be positive and max_polish_rounds nonnegative")

    @classmethod
    def from_mapping(cls, values: dict) -> "SolverConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(f"unknown solver option {key!r}")
            kwargs[key] = int(float(raw)) if types[key] in ("int", int) else float(raw)
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class CapacitySolution:
    input: DiscreteInput
    capacity_nats: float
    kkt_gap: float
    iterations: int
    y_max: int
    converged: bool
    support_gap: float = math.nan
    argmax_x: float = math.nan
    history: tuple = field(default=(), repr=False)
    runtime_seconds: float = 0.0

    @property
    def support_size(self) -> int:
        return len(self.input)

    @property
    def capacity_bits(self) -> float:
        return self.capacity_nats / math.log(2)


class ProbResult(NamedTuple):
    probs: np.ndarray
    mutual_information: float
    converged: bool
    iterations: int


class _Rows:
    """Channel rows for a fixed set of points; evaluates I and the densities for any probs."""

    def __init__(self, points, dark_current: float, ys):
        self.lw = log_pmf_matrix(ys, points, dark_current)
        self.w = np.exp(self.lw)
        self.negent = xlogy(self.w, self.w).sum(axis=1)

    def log_output(self, probs):
        with np.errstate(divide="ignore"):
            lp = np.log(probs)
        return _lse(self.lw + lp[:, None], axis=0)

    def densities(self, probs):
        lpy = self.log_output(probs)
        # rows vanish wherever P_Y does
        lpy_safe = np.where(np.isfinite(lpy), lpy, 0.0)
        return self.negent - self.w @ lpy_safe, lpy

    def mi(self, probs) -> float:
        d, _ = self.densities(probs)
        return float(np.dot(probs, d))


def _ba_residual(probs, d) -> float:
    t = probs * np.exp(d - d.max())
    return float(np.max(np.abs(t / t.sum() - probs)))


def _newton_direction(rows: _Rows, probs, d, lpy, cur: float):
    # active set: atoms with mass, plus empty ones whose density says they should gain some
    free = (probs > 0) | (d > cur)
    idx = np.flatnonzero(free)
    n = idx.size
    lpy_safe = np.where(np.isfinite(lpy), lpy, np.inf)
    w = rows.w[idx]
    scaled = w * np.exp(-lpy_safe)[None, :]
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = -(scaled @ w.T)
    kkt[:n, n] = kkt[n, :n] = 1.0
    rhs = np.concatenate([-(d[idx] - 1.0), [0.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    step = np.zeros_like(probs)
    step[idx] = sol[:n]
    return step if np.all(np.isfinite(step)) else None


def optimize_probabilities(points, params: ChannelParams, trunc: TruncationPolicy, tol: float = 1e-12,
                           max_iter: int = 5000, init=None, _rows: _Rows | None = None) -> ProbResult:
    """Best probabilities for fixed mass-point locations.

    Blahut-Arimoto steps, accelerated by safeguarded projected Newton steps
    on the simplex; a Newton step is only taken when it does not lower the
    mutual information. Atoms the optimum does not use end at exactly zero. Stops at a Blahut-Arimoto fixed point to within ``tol`` in
    sup-norm. Points may come in any order; the returned probs follow it.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 1:
        return ProbResult(np.ones(1), 0.0, True, 0)
    if np.unique(pts).size != pts.size:
        raise DomainError("points must be distinct")
    if np.any(pts < 0) or np.any(pts > params.amplitude):
        raise DomainError("points outside [0, A]")
    rows = _rows or _Rows(pts, params.dark_current, trunc.ys)
    p = np.full(pts.size, 1.0 / pts.size) if init is None else np.asarray(init, dtype=float).copy()
    p /= p.sum()
    d, lpy = rows.densities(p)
    cur = float(p @ d)
    for it in range(1, max_iter + 1):
        if _ba_residual(p, d) <= tol:
            return ProbResult(p, cur, True, it - 1)
        moved = False
        step = _newton_direction(rows, p, d, lpy, cur)
        if step is not None:
            # projected step: atoms pushed below zero are dropped, not crawled towards it
            t = 1.0
            for _ in range(30):
                cand = np.maximum(p + t * step, 0.0)
                cand /= cand.sum()
                dc, lc = rows.densities(cand)
                val = float(cand @ dc)
                if _no_worse(val, cur):
                    p, d, lpy, cur, moved = cand, dc, lc, val, True
                    break
                t *= 0.5
        if not moved:
            t = p * np.exp(d - d.max())
            cand = t / t.sum()
            dc, lc = rows.densities(cand)
            val = float(cand @ dc)
            if val < cur - ASCENT_SLACK:
                return ProbResult(p, cur, False, it)
            p, d, lpy, cur = cand, dc, lc, max(val, cur)
    return ProbResult(p, cur, _ba_residual(p, d) <= tol, max_iter)


def _interior_derivatives(points, probs, params, trunc):
    inp = DiscreteInput(points, probs / probs.sum())
    table = build_posterior(inp, params, trunc)
    t = derivative_terms(inp, params, trunc, points[1:-1], table)
    return np.asarray(t.i_prime), np.asarray(t.i_second)


def _location_step(points, probs, params, trunc, config, current: float):
    """One safeguarded Newton step on all interior points. Returns (points, mi, largest move)."""
    if points.size <= 2:
        return points, current, 0.0
    a = params.amplitude
    ip, ipp = _interior_derivatives(points, probs, params, trunc)
    delta = np.where(ipp < 0, -ip / np.where(ipp < 0, ipp, -1.0), np.sign(ip) * config.location_step * a)
    cap = config.location_step * a
    delta = np.clip(delta, -cap, cap)
    gaps = np.diff(points)
    # stay strictly between neighbours
    delta = np.minimum(delta, 0.45 * gaps[1:])
    delta = np.maximum(delta, -0.45 * gaps[:-1])
    t = 1.0
    for _ in range(40):
        cand = points.copy()
        cand[1:-1] += t * delta
        val = _Rows(cand, params.dark_current, trunc.ys).mi(probs)
        if val >= current:
            return cand, val, float(np.max(np.abs(t * delta)))
        t *= 0.5
    return points, current, 0.0


def _joint_newton_step(points, probs, params, trunc, config, current: float):
    """Newton step on probabilities and interior locations together, with backtracking.

    Uses the exact Hessian of the truncated mutual information. Returns
    ``None`` when the step is not an ascent direction or no backtracked step
    improves, so the caller can fall back to alternation.
    """
    n = points.size
    m = n - 2
    if m <= 0:
        return None
    a = params.amplitude
    rows = _Rows(points, params.dark_current, trunc.ys)
    lpy = rows.log_output(probs)
    ys = trunc.ys.astype(float)
    with np.errstate(invalid="ignore"):
        diff = np.where(rows.w > 0, rows.lw - lpy[None, :], 0.0)
        q = np.where(rows.w > 0, np.exp(rows.lw - lpy[None, :]), 0.0)  # W_i / P_Y
    inner = slice(1, n - 1)
    rate = points[inner] + params.dark_current
    u = ys[None, :] / rate[:, None] - 1.0  # dW/dx = W u
    v = ys[None, :] * (ys[None, :] - 1.0) / rate[:, None] ** 2 - 2.0 * ys[None, :] / rate[:, None] + 1.0
    wi, qi, pi, di = rows.w[inner], q[inner], probs[inner], diff[inner]

    d_i = (rows.w * diff).sum(axis=1)
    g_p = d_i - rows.w.sum(axis=1)
    fd = (wi * u * di).sum(axis=1)
    g_x = pi * fd
    h_pp = -(q @ rows.w.T)
    cross = (qi * u) @ (wi * u).T  # sum_y f_k f_l / P_Y
    h_xx = -np.outer(pi, pi) * cross
    h_xx[np.diag_indices(m)] = pi * (wi * v * di).sum(axis=1) + pi * (wi * u * u).sum(axis=1) - pi**2 * np.diag(cross)
    h_px = -(rows.w @ (qi * u).T) * pi[None, :]  # d2I / dp_j dx_k
    h_px[np.arange(1, n - 1), np.arange(m)] += fd

    k = n + m
    kkt = np.zeros((k + 1, k + 1))
    kkt[:n, :n] = h_pp
    kkt[n:k, n:k] = h_xx
    kkt[:n, n:k] = h_px
    kkt[n:k, :n] = h_px.T
    kkt[:n, k] = kkt[k, :n] = 1.0
    rhs = np.concatenate([-g_p, -g_x, [0.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    dp, dx = sol[:n], sol[n:k]
    if not (np.all(np.isfinite(sol)) and g_p @ dp + g_x @ dx > 0):
        return None
    t = 1.0
    neg = dp < 0
    if np.any(neg):
        t = min(t, 0.9 * float(np.min(-probs[neg] / dp[neg])))
    big = float(np.max(np.abs(dx)))
    if big > config.location_step * a:
        t = min(t, config.location_step * a / big)
    for _ in range(40):
        pts = points.copy()
        pts[inner] += t * dx
        if np.all(np.diff(pts) > 0):
            pr = probs + t * dp
            if np.all(pr > 0):
                pr = pr / pr.sum()
                val = _Rows(pts, params.dark_current, trunc.ys).mi(pr)
                if _no_worse(val, current):
                    return pts, pr, val, float(np.max(np.abs(t * dx)))
        t *= 0.5
    return None


def optimize_locations(input: DiscreteInput, params: ChannelParams, trunc: TruncationPolicy,
                       config: SolverConfig | None = None, steps: int = 1) -> DiscreteInput:
    """Move interior mass points uphill in mutual information with probabilities held fixed.

    The gradient in ``x_i`` is ``p_i * i'(x_i)``; steps are Newton steps on
    the information density, clipped to a trust region and to the gaps
    between neighbours, then backtracked until the mutual information does
    not decrease. Endpoints ``0`` and ``A`` never move.
    """
    config = config or SolverConfig()
    pts = np.array(input.points)
    probs = np.array(input.probs)
    cur = _Rows(pts, params.dark_current, trunc.ys).mi(probs)
    for _ in range(steps):
        pts, cur, moved = _location_step(pts, probs, params, trunc, config, cur)
        if moved == 0.0:
            break
    return DiscreteInput(pts, probs)


class _Scanner:
    """Information density on a fixed uniform grid over ``[0, A]``."""

    def __init__(self, params: ChannelParams, trunc: TruncationPolicy, grid_points: int, refine_factor: int = 100):
        self.params, self.trunc = params, trunc
        self.xs = np.linspace(0.0, params.amplitude, grid_points)
        self.rows = _Rows(self.xs, params.dark_current, trunc.ys)
        self.refine_factor = refine_factor

    def _density_at(self, x, lpy_safe):
        r = _Rows(np.atleast_1d(x), self.params.dark_current, self.trunc.ys)
        return r.negent - r.w @ lpy_safe

    def scan(self, points, probs, top: int = 3):
        src = _Rows(points, self.params.dark_current, self.trunc.ys)
        d, lpy = src.densities(probs)
        mi = float(probs @ d)
        lpy_safe = np.where(np.isfinite(lpy), lpy, 0.0)
        vals = self.rows.negent - self.rows.w @ lpy_safe - mi
        left = np.concatenate([[-np.inf], vals[:-1]])
        right = np.concatenate([vals[1:], [-np.inf]])
        peaks = np.flatnonzero((vals >= left) & (vals >= right))
        # stable sort keeps the smaller x first among equal values
        peaks = peaks[np.argsort(-vals[peaks], kind="stable")][:top]
        best_gap, best_x = -np.inf, math.nan
        for k in sorted(peaks):
            lo = self.xs[max(k - 1, 0)]
            hi = self.xs[min(k + 1, self.xs.size - 1)]
            fine = np.linspace(lo, hi, 2 * self.refine_factor + 1)
            fv = self._density_at(fine, lpy_safe) - mi
            j = int(np.argmax(fv))
            gx, gv = float(fine[j]), float(fv[j])
            flo, fhi = fine[max(j - 1, 0)], fine[min(j + 1, fine.size - 1)]
            if fhi > flo:
                opt = minimize_scalar(lambda x: -(self._density_at(x, lpy_safe)[0] - mi), bounds=(flo, fhi),
                                      method="bounded", options={"xatol": 1e-12 * max(1.0, self.params.amplitude)})
                if -opt.fun > gv:
                    gx, gv = float(opt.x), float(-opt.fun)
            if gv > best_gap + TIE_TOL or (abs(gv - best_gap) <= TIE_TOL and gx < best_x):
                best_gap, best_x = gv, gx
        return best_gap, best_x, mi, d


def kkt_scan(input: DiscreteInput, params: ChannelParams, trunc: TruncationPolicy, grid_points: int = 10_000,
             top: int | None = None):
    """Largest ``i(x; P) - I(P)`` over ``[0, A]`` and where it occurs.

    Uniform grid plus local refinement around the highest grid peaks (at least
    three, one more than the support size by default). Nonpositive up to the
    tolerance exactly when ``input`` is capacity-achieving.
    """
    input.validate(params)
    top = top or max(3, len(input) + 1)
    gap, x, _, _ = _Scanner(params, trunc, grid_points).scan(np.array(input.points), np.array(input.probs), top)
    return gap, x


def two_point_capacity_oracle(params: ChannelParams, q_step: float = 1e-6, trunc: TruncationPolicy | None = None):
    """Brute-force best two-point law on ``{0, A}`` over a grid of ``q = P(X = A)``."""
    if q_step > 1e-4:
        raise DomainError("q_step must be at most 1e-4")
    trunc = trunc or choose_truncation(params)
    lw = log_pmf_matrix(trunc.ys, [0.0, params.amplitude], params.dark_current)
    w = np.exp(lw)
    negent = xlogy(w, w).sum(axis=1)
    n = int(round(1.0 / q_step))
    best_q, best_i = 0.0, 0.0
    for start in range(1, n, 200_000):
        q = np.arange(start, min(start + 200_000, n)) * q_step
        lpy = np.logaddexp(np.log1p(-q)[:, None] + lw[0], np.log(q)[:, None] + lw[1])
        lpy = np.where(np.isfinite(lpy), lpy, 0.0)
        mi = (1 - q) * (negent[0] - lpy @ w[0]) + q * (negent[1] - lpy @ w[1])
        j = int(np.argmax(mi))
        if mi[j] > best_i:
            best_q, best_i = float(q[j]), float(mi[j])
    return best_q, best_i


class _State:
    def __init__(self, params, trunc, config):
        self.params, self.trunc, self.config = params, trunc, config
        self.points = np.array([0.0, params.amplitude])
        self.probs = np.array([0.5, 0.5])
        self.mi = self._rows().mi(self.probs)
        self.history = [self.mi]

    def _rows(self, points=None):
        return _Rows(self.points if points is None else points, self.params.dark_current, self.trunc.ys)

    def record(self, mi):
        self.history.append(mi)
        self.mi = mi

    def fit_probs(self, points=None, init=None):
        pts = self.points if points is None else points
        init = self.probs if init is None else init
        return optimize_probabilities(pts, self.params, self.trunc, self.config.prob_tolerance,
                                      self.config.max_prob_iters, init=init, _rows=self._rows(pts))

    def accept_probs(self, res) -> None:
        if not _no_worse(res.mutual_information, self.mi):
            return
        live = res.probs > 0
        self.points, self.probs = self.points[live], res.probs[live] / res.probs[live].sum()
        self.record(res.mutual_information)

    def settle(self):
        """Polish the current support: joint Newton steps, alternation when Newton stalls."""
        self.accept_probs(self.fit_probs())
        tol_x = 1e-13 * self.params.amplitude
        for _ in range(self.config.max_location_rounds):
            step = _joint_newton_step(self.points, self.probs, self.params, self.trunc, self.config, self.mi)
            if step is not None:
                self.points, self.probs, val, moved = step
                self.record(val)
            else:
                pts, val, moved = _location_step(self.points, self.probs, self.params, self.trunc, self.config,
                                                 self.mi)
                if moved == 0.0:
                    break
                self.points = pts
                self.record(val)
            self.accept_probs(self.fit_probs())
            if moved <= tol_x:
                break

    def _try(self, points, init) -> bool:
        res = self.fit_probs(points, init)
        if res.mutual_information >= self.mi - ASCENT_SLACK:
            live = res.probs > 0
            self.points, self.probs = points[live], res.probs[live] / res.probs[live].sum()
            self.record(res.mutual_information)
            return True
        return False

    def merge_and_prune(self):
        a = self.params.amplitude
        while True:
            gaps = np.diff(self.points)
            close = np.flatnonzero(gaps < self.config.merge_distance * a)
            if close.size == 0:
                break
            k = int(close[0])
            pts, pr = list(self.points), list(self.probs)
            mass = pr[k] + pr[k + 1]
            if k == 0:
                loc = 0.0
            elif k + 1 == len(pts) - 1:
                loc = a
            else:
                loc = (pr[k] * pts[k] + pr[k + 1] * pts[k + 1]) / mass
            pts[k:k + 2], pr[k:k + 2] = [loc], [mass]
            if not self._try(np.array(pts), np.array(pr)):
                break
        small = np.flatnonzero(self.probs[1:-1] < self.config.prune_probability) + 1
        if small.size:
            keep = np.setdiff1d(np.arange(self.points.size), small)
            pr = self.probs[keep]
            self._try(self.points[keep], pr / pr.sum())

    def insert(self, x: float) -> bool:
        k = int(np.searchsorted(self.points, x))
        if k < self.points.size and self.points[k] == x:
            return False
        pts = np.insert(self.points, k, x)
        rows = self._rows(pts)
        eps = 0.05
        for _ in range(60):
            pr = np.insert(self.probs * (1.0 - eps), k, eps)
            val = rows.mi(pr)
            if val > self.mi:
                self.points, self.probs = pts, pr
                self.record(val)
                return True
            eps *= 0.5
        return False


def _support_gap(points, probs, params, trunc, mi):
    d, _ = _Rows(points, params.dark_current, trunc.ys).densities(probs)
    return float(np.max(np.abs(d - mi)))


def solve(params: ChannelParams, config: SolverConfig | None = None) -> CapacitySolution:
    """Capacity and capacity-achieving input of the amplitude-constrained Poisson channel.

    ``converged`` means the final KKT scan gap and the spread of the
    information density over the support are both within
    ``config.kkt_tolerance``. Once that holds the solver keeps polishing for
    up to ``max_polish_rounds`` outer iterations towards
    ``polish_tolerance``.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    trunc = choose_truncation(params, config.tail_epsilon)
    scanner = _Scanner(params, trunc, config.grid_points, config.refine_factor)
    st = _State(params, trunc, config)
    tol = config.kkt_tolerance
    # polishing past the tolerance is cheap and keeps near-transition supports from stopping mid-split
    target = min(tol, config.polish_tolerance)
    certified = None
    polish = 0
    gap, gx, sgap = math.inf, math.nan, math.inf
    it = 0
    for it in range(1, config.max_outer_iters + 1):
        st.settle()
        st.merge_and_prune()
        gap, gx, _, _ = scanner.scan(st.points, st.probs, top=max(3, st.points.size + 1))
        sgap = _support_gap(st.points, st.probs, params, trunc, st.mi)
        if gap <= tol and sgap <= tol:
            certified = (st.points.copy(), st.probs.copy(), gap, gx, sgap)
            if (gap <= target and sgap <= target) or polish >= config.max_polish_rounds:
                break
            polish += 1
        if gap > target:
            near = np.min(np.abs(st.points - gx))
            if near < config.merge_distance * params.amplitude:
                # the violation sits on an existing atom: keep polishing instead
                continue
            st.insert(gx)
    converged = gap <= tol and sgap <= tol
    points, probs = st.points, st.probs
    if not converged and certified is not None:
        points, probs, gap, gx, sgap = certified
        converged = True
    live = probs > 0
    inp = DiscreteInput(points[live], probs[live] / probs[live].sum())
    cap = mutual_information(inp, params, trunc)
    return CapacitySolution(
        input=inp,
        capacity_nats=cap,
        kkt_gap=float(gap),
        iterations=it,
        y_max=trunc.y_max,
        converged=converged,
        support_gap=sgap,
        argmax_x=float(gx),
        history=tuple(st.history),
        runtime_seconds=time.perf_counter() - t0,
    )
