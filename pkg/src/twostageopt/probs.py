"""Exact, numerically stable binomial probabilities.

Everything downstream (conditional error/power, operating characteristics,
program coefficients) reduces to two primitives: the binomial point mass
``pmf`` and the upper tail ``upper_tail``.  Critical values may be the
sentinels ``-inf`` / ``+inf`` which encode early stopping decisions, so the
tail function accepts them directly.
"""

from __future__ import annotations

import math

import numpy as np

NEG_INF = float("-inf")
POS_INF = float("inf")

# above this the multiplicative recurrence is abandoned for log-gamma
_RECURRENCE_LIMIT = 1000


def _check_spec(trials: int, success_prob: float) -> None:
    if trials < 0 or int(trials) != trials:
        raise ValueError(f"trials must be a nonnegative integer, got {trials!r}")
    if not 0.0 <= success_prob <= 1.0:
        raise ValueError(f"success_prob must lie in [0, 1], got {success_prob!r}")


def pmf(k: int, trials: int, success_prob: float) -> float:
    """P[X = k] for X ~ Binomial(trials, success_prob).

    Raises ValueError for k outside 0..trials.
    """
    _check_spec(trials, success_prob)
    if not 0 <= k <= trials:
        raise ValueError(f"k={k} outside support 0..{trials}")
    p = float(success_prob)
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == trials else 0.0
    if trials > _RECURRENCE_LIMIT:
        log_val = (
            math.lgamma(trials + 1)
            - math.lgamma(k + 1)
            - math.lgamma(trials - k + 1)
            + k * math.log(p)
            + (trials - k) * math.log1p(-p)
        )
        return math.exp(log_val)
    return float(pmf_vector(trials, p)[k])


def pmf_vector(trials: int, success_prob: float, backward: bool = False) -> np.ndarray:
    """All point masses P[X = 0..trials] via the multiplicative recurrence.

    ``backward=True`` starts the recurrence at k = trials instead of k = 0;
    the two directions must agree to ~1e-12, which the tests check.
    """
    _check_spec(trials, success_prob)
    p = float(success_prob)
    out = np.zeros(trials + 1)
    if p == 0.0:
        out[0] = 1.0
        return out
    if p == 1.0:
        out[trials] = 1.0
        return out
    if backward:
        out[trials] = p**trials
        ratio = (1.0 - p) / p
        for k in range(trials, 0, -1):
            out[k - 1] = out[k] * (k / (trials - k + 1.0)) * ratio
    else:
        out[0] = (1.0 - p) ** trials
        ratio = p / (1.0 - p)
        for k in range(trials):
            out[k + 1] = out[k] * ((trials - k) / (k + 1.0)) * ratio
    return out


def upper_tail(c: float, trials: int, success_prob: float) -> float:
    """P[X > c] for X ~ Binomial(trials, success_prob).

    ``c`` is a finite integer or one of the sentinels; -inf yields 1 and
    +inf yields 0 exactly.  Finite c >= trials also yields 0, finite c < 0
    yields 1.  The tail with the smaller mass is accumulated directly so
    the complement subtraction never cancels badly.
    """
    _check_spec(trials, success_prob)
    if c == NEG_INF:
        return 1.0
    if c == POS_INF:
        return 0.0
    c = int(c)
    if c >= trials:
        return 0.0
    if c < 0:
        return 1.0
    p = float(success_prob)
    if p == 0.0:
        return 0.0  # c >= 0 here, so X = 0 <= c
    if p == 1.0:
        return 1.0 if c < trials else 0.0
    masses = pmf_vector(trials, p)
    if c + 1 > trials * p:
        # upper tail is the minority side: sum it outward-in
        return float(np.add.reduce(masses[c + 1 :][::-1]))
    return 1.0 - float(np.add.reduce(masses[: c + 1]))


def pmf_table(trials: int, probs: np.ndarray) -> np.ndarray:
    """Point-mass table of shape (trials+1, len(probs)) for a probability grid.

    Column j holds pmf(0..trials; trials, probs[j]) computed with the same
    recurrence as the scalar path; used by grid evaluations such as the
    type-one-error scan.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ValueError("probability grid must lie in [0, 1]")
    out = np.zeros((trials + 1, probs.size))
    interior = (probs > 0.0) & (probs < 1.0)
    p = probs[interior]
    if p.size:
        col = np.empty((trials + 1, p.size))
        col[0] = (1.0 - p) ** trials
        ratio = p / (1.0 - p)
        for k in range(trials):
            col[k + 1] = col[k] * ((trials - k) / (k + 1.0)) * ratio
        out[:, interior] = col
    out[0, probs == 0.0] = 1.0
    out[trials, probs == 1.0] = 1.0
    return out


def upper_tail_grid(c: float, trials: int, probs: np.ndarray) -> np.ndarray:
    """P[X > c] for each success probability in ``probs`` (vectorized)."""
    probs = np.asarray(probs, dtype=float)
    if c == NEG_INF:
        return np.ones(probs.size)
    if c == POS_INF:
        return np.zeros(probs.size)
    c = int(c)
    if c >= trials:
        return np.zeros(probs.size)
    if c < 0:
        return np.ones(probs.size)
    masses = pmf_table(trials, probs)
    upper = masses[c + 1 :][::-1].sum(axis=0)
    lower = 1.0 - masses[: c + 1].sum(axis=0)
    return np.where(c + 1 > trials * probs, upper, lower)
