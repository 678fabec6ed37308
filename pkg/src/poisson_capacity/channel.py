"""Discrete-time Poisson channel law with dark current and certified output truncation.

All probabilities are handled in the log domain. ``(x + lam) ** y`` overflows a
double for ``y`` in the low hundreds, so nothing here ever leaves log space
until a final ``exp``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp, pdtrc

DEFAULT_TAIL_EPSILON = 1e-12


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class ChannelParams:
    """Amplitude constraint ``A`` and dark current ``lam`` of one channel instance."""

    amplitude: float
    dark_current: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude > 0):
            raise DomainError(f"amplitude must be > 0, got {self.amplitude!r}")
        if not (math.isfinite(self.dark_current) and self.dark_current >= 0):
            raise DomainError(f"dark_current must be >= 0, got {self.dark_current!r}")

    @property
    def peak_rate(self) -> float:
        return self.amplitude + self.dark_current


@dataclass(frozen=True)
class TruncationPolicy:
    """Largest retained output symbol and the certified tail mass beyond it."""

    tail_epsilon: float
    y_max: int

    def __post_init__(self):
        if not 0 < self.tail_epsilon < 1:
            raise DomainError("tail_epsilon must lie in (0, 1)")
        if self.y_max < 1:
            raise DomainError("y_max must be >= 1")

    @property
    def ys(self) -> np.ndarray:
        return np.arange(self.y_max + 1)


def _check_x(x, params: ChannelParams):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > params.amplitude) or not np.all(np.isfinite(xa)):
        raise DomainError(f"input outside [0, {params.amplitude}]")
    return xa


def log_pmf_matrix(ys, xs, dark_current: float) -> np.ndarray:
    """``log P(y | x)`` on the outer product grid, shape ``(len(xs), len(ys))``.

    No domain checks; callers validate. ``x + lam == 0`` yields the point mass
    at ``y = 0`` (the ``0**0 = 1`` convention).
    """
    ys = np.asarray(ys, dtype=float)
    rate = np.asarray(xs, dtype=float) + dark_current
    rate = np.atleast_1d(rate)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = ys[None, :] * np.log(rate) - rate - gammaln(ys + 1.0)[None, :]
    zero = (rate[:, 0] == 0.0)
    if np.any(zero):
        out[zero, :] = -np.inf
        out[np.ix_(zero, ys == 0)] = 0.0
    return out


def log_pmf(y: int, x: float, params: ChannelParams) -> float:
    """Log-probability of output count ``y`` given input intensity ``x``."""
    if int(y) != y or y < 0:
        raise DomainError(f"y must be a nonnegative integer, got {y!r}")
    _check_x(x, params)
    return float(log_pmf_matrix([y], [x], params.dark_current)[0, 0])


def _chernoff_log_tail(mean: float, k: int) -> float:
    # log of e^{-mean} (e mean / k)^k, valid bound on P[Y >= k] for k > mean
    return -mean + k * (1.0 + math.log(mean) - math.log(k))


def choose_truncation(params: ChannelParams, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> TruncationPolicy:
    """Smallest ``y_max`` whose Poisson(A + lam) upper tail is at most ``tail_epsilon``.

    The Chernoff bound gives a certified starting point; the exact tail
    (regularized incomplete gamma) then walks it down to the smallest valid
    value. Rows with smaller intensity are stochastically dominated, so the
    same ``y_max`` certifies every ``x`` in ``[0, A]``.
    """
    if not 0 < tail_epsilon < 1:
        raise DomainError("tail_epsilon must lie in (0, 1)")
    mean = params.peak_rate
    log_eps = math.log(tail_epsilon)
    k = max(2, int(math.floor(mean)) + 1)
    while _chernoff_log_tail(mean, k) > log_eps:
        k += 1
    y_max = k - 1
    # P[Y > y] = pdtrc(y, mean)
    while y_max > 1 and pdtrc(y_max - 1, mean) <= tail_epsilon:
        y_max -= 1
    if pdtrc(y_max, mean) > tail_epsilon:
        raise AssertionError("truncation certificate failed")  # pragma: no cover
    return TruncationPolicy(tail_epsilon=tail_epsilon, y_max=max(1, y_max))


def log_output_pmf(points, probs, dark_current: float, ys) -> np.ndarray:
    """``log P_Y(y)`` of the mixture ``sum_i p_i P(.|x_i)`` at the given ``ys``."""
    lw = log_pmf_matrix(ys, points, dark_current)
    with np.errstate(divide="ignore"):
        lp = np.log(np.asarray(probs, dtype=float))
    return logsumexp(lw + lp[:, None], axis=0)


def output_pmf(input, params: ChannelParams, trunc: TruncationPolicy):
    """Truncated output law of ``input`` through the channel."""
    from .info import OutputPmf

    if len(input.points) == 0:
        raise DomainError("empty input support")
    _check_x(input.points, params)
    lp = log_output_pmf(input.points, input.probs, params.dark_current, trunc.ys)
    return OutputPmf(log_probs=lp, tail_epsilon=trunc.tail_epsilon)
