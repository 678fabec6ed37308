"""Relative entropy, information density and mutual information on the truncated output alphabet."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import (
    ChannelParams,
    DomainError,
    TruncationPolicy,
    _check_x,
    log_output_pmf,
    log_pmf_matrix,
)

PROB_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteInput:
    """Finite input law: strictly increasing ``points`` with positive ``probs``."""

    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        pr = np.array(self.probs, dtype=float).ravel()
        if pts.size == 0 or pts.size != pr.size:
            raise DomainError("points and probs must be nonempty and of equal length")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("points must be strictly increasing")
        if np.any(pr <= 0) or not np.all(np.isfinite(pr)):
            raise DomainError("probabilities must be positive")
        if abs(pr.sum() - 1.0) > PROB_SUM_TOL:
            raise DomainError(f"probabilities sum to {float(pr.sum())!r}, not 1")
        pts.flags.writeable = False
        pr.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    @classmethod
    def from_mapping(cls, law: dict) -> "DiscreteInput":
        items = sorted(law.items())
        return cls([x for x, _ in items], [p for _, p in items])

    @classmethod
    def point_mass(cls, x: float) -> "DiscreteInput":
        return cls([x], [1.0])

    def validate(self, params: ChannelParams) -> "DiscreteInput":
        _check_x(self.points, params)
        return self

    def __len__(self):
        return self.points.size

    def __repr__(self):
        body = ", ".join(f"{x:.6g}: {p:.6g}" for x, p in zip(self.points, self.probs))
        return f"DiscreteInput({{{body}}})"


@dataclass(frozen=True, eq=False)
class OutputPmf:
    """``log P_Y(y)`` for ``y = 0..y_max`` and the tail mass it leaves out."""

    log_probs: np.ndarray
    tail_epsilon: float

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def retained_mass(self) -> float:
        return float(np.exp(logsumexp(self.log_probs)))


def _as_log_pmf(p) -> np.ndarray:
    if isinstance(p, OutputPmf):
        return np.asarray(p.log_probs, dtype=float)
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0):
        raise DomainError("negative probability")
    with np.errstate(divide="ignore"):
        return np.log(arr)


def kl_from_logs(lp: np.ndarray, lq: np.ndarray, axis=-1):
    """``sum p log(p/q)`` from log-probabilities; ``inf`` where ``p`` is not << ``q``."""
    lp, lq = np.broadcast_arrays(lp, lq)
    live = lp > -np.inf
    if np.any(live & (lq == -np.inf)):
        bad = np.any(live & (lq == -np.inf), axis=axis)
    else:
        bad = None
    with np.errstate(invalid="ignore"):
        terms = np.where(live, np.exp(lp) * (lp - lq), 0.0)
    out = terms.sum(axis=axis)
    if bad is not None:
        out = np.where(bad, np.inf, out)
    return out


def relative_entropy(p, q) -> float:
    """KL divergence in nats; ``math.inf`` when ``p`` puts mass where ``q`` has none."""
    lp, lq = _as_log_pmf(p), _as_log_pmf(q)
    if lp.shape != lq.shape:
        raise DomainError("pmfs live on different alphabets")
    return float(kl_from_logs(lp, lq))


def _density(log_w: np.ndarray, log_py: np.ndarray) -> np.ndarray:
    # rows of log_w against a single output law
    return kl_from_logs(log_w, log_py[None, :], axis=1)


def info_density(x, input: DiscreteInput, params: ChannelParams, trunc: TruncationPolicy):
    """``D(P(.|x) || P_Y)`` for the output law induced by ``input``; vectorized over ``x``."""
    xa = _check_x(x, params)
    ys = trunc.ys
    log_py = log_output_pmf(input.points, input.probs, params.dark_current, ys)
    vals = _density(log_pmf_matrix(ys, np.atleast_1d(xa), params.dark_current), log_py)
    return float(vals[0]) if xa.ndim == 0 else vals


def mutual_information(input: DiscreteInput, params: ChannelParams, trunc: TruncationPolicy) -> float:
    dens = info_density(input.points, input, params, trunc)
    return float(np.dot(input.probs, np.atleast_1d(dens)))


def kl_chain_rule_check(input_p: DiscreteInput, input_q: DiscreteInput, params: ChannelParams,
                        trunc: TruncationPolicy):
    """Both sides of ``D(P_X||Q_X) = D(P_Y||Q_Y) + D(P_{X|Y} || Q_{X|Y} | P_Y)``.

    Returns ``(lhs, rhs, gap)``. If ``supp P`` is not inside ``supp Q`` both
    sides are infinite and the gap is NaN.
    """
    input_p.validate(params)
    input_q.validate(params)
    if not np.all(np.isin(input_p.points, input_q.points)):
        return math.inf, math.inf, math.nan
    pts = input_q.points
    p_on_q = np.zeros_like(pts)
    p_on_q[np.searchsorted(pts, input_p.points)] = input_p.probs
    with np.errstate(divide="ignore"):
        lp_x = np.log(p_on_q)
    lq_x = np.log(input_q.probs)
    lhs = float(kl_from_logs(lp_x, lq_x))

    lw = log_pmf_matrix(trunc.ys, pts, params.dark_current)
    lpy = logsumexp(lw + lp_x[:, None], axis=0)
    lqy = logsumexp(lw + lq_x[:, None], axis=0)
    post_p = lw + lp_x[:, None] - lpy[None, :]
    post_q = lw + lq_x[:, None] - lqy[None, :]
    cond = kl_from_logs(post_p.T, post_q.T, axis=1)
    rhs = float(kl_from_logs(lpy, lqy) + np.dot(np.exp(lpy), cond))
    return lhs, rhs, lhs - rhs


def _support_index(x_star: float, input: DiscreteInput, amplitude: float) -> int:
    idx = int(np.argmin(np.abs(input.points - x_star)))
    if abs(input.points[idx] - x_star) > 1e-12 * max(1.0, amplitude):
        raise DomainError(f"{x_star!r} is not a support point")
    return idx


def posterior_mismatch_divergence(x_star: float, input: DiscreteInput, params: ChannelParams,
                                  trunc: TruncationPolicy) -> float:
    """``D(delta_x* || P_{X|Y} | P(.|x*))``: expected ``-log P(X = x* | Y)`` under ``Y ~ P(.|x*)``."""
    i = _support_index(x_star, input, params.amplitude)
    lw = log_pmf_matrix(trunc.ys, input.points, params.dark_current)
    lpy = logsumexp(lw + np.log(input.probs)[:, None], axis=0)
    row = lw[i]
    live = row > -np.inf
    log_post = row[live] + math.log(input.probs[i]) - lpy[live]
    return float(-np.dot(np.exp(row[live]), log_post))


def support_mass_identity(solution, params: ChannelParams, trunc: TruncationPolicy) -> float:
    """``exp(-C) * sum_x* exp(-D_x*)``; equals 1 at the optimum."""
    inp = solution.input
    d = np.array([posterior_mismatch_divergence(x, inp, params, trunc) for x in inp.points])
    return float(np.exp(-solution.capacity_nats) * np.exp(-d).sum())


def exact_support_identity(solution, params: ChannelParams, trunc: TruncationPolicy):
    """Support size predicted from capacity and the per-atom posterior mismatch.

    Returns ``(n_predicted, n_actual, gap)`` where
    ``n_predicted = e^C / mean_x* exp(-D_x*)``.
    """
    inp = solution.input
    n = len(inp)
    d = np.array([posterior_mismatch_divergence(x, inp, params, trunc) for x in inp.points])
    n_pred = float(math.exp(solution.capacity_nats) / np.mean(np.exp(-d)))
    return n_pred, n, abs(n_pred - n)
