"""Two-stage design model, consistency rules, and operating characteristics.

A design is the pair of functions (n(.), c(.)) on the stage-one outcome
x1 = 0..n1: total sample size and overall critical value.  The null
hypothesis is rejected iff the total number of responses exceeds c(x1).
Early stops are encoded by sentinel critical values: +inf never rejects
(futility), -inf always rejects (efficacy), and both force n(x1) = n1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .probs import (
    NEG_INF,
    POS_INF,
    pmf_table,
    pmf_vector,
    upper_tail,
    upper_tail_grid,
)

CriticalValue = float  # finite integer value, or one of the +-inf sentinels


def is_stop(c: CriticalValue) -> bool:
    return c == NEG_INF or c == POS_INF


@dataclass(frozen=True)
class TrialParams:
    """Hypothesis and error-rate parameters."""

    rho0: float
    rho1: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("rho0", "rho1", "alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} must lie strictly in (0, 1)")
        if not self.rho0 < self.rho1:
            raise ValueError(f"rho0={self.rho0} must be < rho1={self.rho1}")


@dataclass(frozen=True)
class Design:
    """Stage-one size plus total-sample-size and critical-value functions."""

    n1: int
    n: tuple[int, ...]
    c: tuple[CriticalValue, ...]
    n_max: int

    def __post_init__(self):
        if len(self.n) != self.n1 + 1 or len(self.c) != self.n1 + 1:
            raise ValueError(
                f"n and c must have length n1+1={self.n1 + 1}, "
                f"got {len(self.n)} and {len(self.c)}"
            )

    def stage_two_size(self, x1: int) -> int:
        return self.n[x1] - self.n1


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()


def validate(design: Design) -> ValidationResult:
    """Check the consistency rules linking n(.) and c(.).

    A sentinel critical value must coincide with stopping at n1, and a
    continuation must leave the final decision open: x1 <= c(x1) < n(x1).
    """
    bad: list[str] = []
    for x1 in range(design.n1 + 1):
        n_x, c_x = design.n[x1], design.c[x1]
        if not design.n1 <= n_x <= design.n_max:
            bad.append(f"x1={x1}: n={n_x} outside [n1={design.n1}, n_max={design.n_max}]")
        stop = is_stop(c_x)
        if stop != (n_x == design.n1):
            bad.append(f"x1={x1}: sentinel c and n=n1 must coincide (n={n_x}, c={c_x})")
        if n_x > design.n1 and not stop:
            if not (x1 <= c_x < n_x):
                bad.append(f"x1={x1}: continuation requires x1 <= c < n (n={n_x}, c={c_x})")
        if not stop and c_x != int(c_x):
            bad.append(f"x1={x1}: finite critical value must be an integer, got {c_x}")
    return ValidationResult(ok=not bad, violations=tuple(bad))


def conditional_error(x1: int, n2: int, c: CriticalValue, rho0: float) -> float:
    """Probability under rho0 of rejecting given x1 stage-one responses.

    Equals P[X2 > c - x1] with X2 ~ Binomial(n2, rho0); stops give exactly
    0 (futility) or 1 (efficacy).
    """
    if c == POS_INF:
        return 0.0
    if c == NEG_INF:
        return 1.0
    if n2 <= 0:
        raise ValueError("finite critical value requires a second stage (n2 > 0)")
    return upper_tail(int(c) - x1, n2, rho0)


def conditional_power(x1: int, n2: int, c: CriticalValue, rho1: float) -> float:
    """As conditional_error but evaluated at the alternative rho1."""
    return conditional_error(x1, n2, c, rho1)


def expected_sample_size(design: Design, weights) -> float:
    """Weighted average of the total sample size over stage-one outcomes."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (design.n1 + 1,):
        raise ValueError(f"weights must have length n1+1={design.n1 + 1}")
    if (weights < 0).any():
        raise ValueError("weights must be nonnegative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
    return float(np.dot(weights, np.asarray(design.n, dtype=float)))


def rejection_probability(design: Design, rho: float) -> float:
    """Overall probability of rejecting the null at response probability rho."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho={rho} must lie in [0, 1]")
    verdict = validate(design)
    if not verdict.ok:
        raise ValueError("invalid design: " + "; ".join(verdict.violations))
    w = pmf_vector(design.n1, rho)
    total = 0.0
    for x1 in range(design.n1 + 1):
        c_x = design.c[x1]
        thresh = c_x if is_stop(c_x) else c_x - x1
        total += w[x1] * upper_tail(thresh, design.n[x1] - design.n1, rho)
    return total


@dataclass(frozen=True)
class AlphaReport:
    """Result of the numeric strict type-one-error scan over the null."""

    max_type1: float
    argmax_rho: float
    grid_step: float
    passed: bool


def verify_alpha_control(
    design: Design, rho0: float, alpha: float, grid_step: float = 5e-4
) -> AlphaReport:
    """Scan rejection probability over rho in {0, h, 2h, ...} up to rho0.

    rho0 itself is always included.  Passes iff the maximum stays below
    alpha + 1e-6; ties in the argmax resolve toward smaller rho.
    """
    if not 0.0 < grid_step <= rho0:
        raise ValueError(f"grid_step={grid_step} must lie in (0, rho0={rho0}]")
    grid = np.arange(0.0, rho0, grid_step)
    grid = np.append(grid, rho0)
    reject = np.zeros(grid.size)
    w = pmf_table(design.n1, grid)
    for x1 in range(design.n1 + 1):
        c_x = design.c[x1]
        thresh = c_x if is_stop(c_x) else c_x - x1
        reject += w[x1] * upper_tail_grid(thresh, design.n[x1] - design.n1, grid)
    best = int(np.argmax(reject))  # first maximum = smallest rho on ties
    max_t1 = float(reject[best])
    return AlphaReport(
        max_type1=max_t1,
        argmax_rho=float(grid[best]),
        grid_step=grid_step,
        passed=max_t1 <= alpha + 1e-6,
    )


@dataclass(frozen=True)
class OutcomeRow:
    x1: int
    weight0: float
    n: int
    c: CriticalValue
    ce: float
    cp: float


@dataclass(frozen=True)
class OperatingCharacteristics:
    expected_n_null: float
    power_at_rho1: float
    max_type1: float
    argmax_rho: float
    per_outcome: tuple[OutcomeRow, ...] = field(repr=False)


def operating_characteristics(
    design: Design, params: TrialParams, grid_step: float = 5e-4
) -> OperatingCharacteristics:
    """Assemble all standard summaries of a valid design."""
    verdict = validate(design)
    if not verdict.ok:
        raise ValueError("invalid design: " + "; ".join(verdict.violations))
    w0 = pmf_vector(design.n1, params.rho0)
    rows = []
    for x1 in range(design.n1 + 1):
        n2 = design.n[x1] - design.n1
        c_x = design.c[x1]
        rows.append(
            OutcomeRow(
                x1=x1,
                weight0=float(w0[x1]),
                n=design.n[x1],
                c=c_x,
                ce=conditional_error(x1, n2, c_x, params.rho0),
                cp=conditional_power(x1, n2, c_x, params.rho1),
            )
        )
    report = verify_alpha_control(design, params.rho0, params.alpha, grid_step)
    return OperatingCharacteristics(
        expected_n_null=expected_sample_size(design, w0),
        power_at_rho1=rejection_probability(design, params.rho1),
        max_type1=report.max_type1,
        argmax_rho=report.argmax_rho,
        per_outcome=tuple(rows),
    )


def single_stage(n1: int, c: CriticalValue, n_max: int | None = None) -> Design:
    """Design that always stops at the interim with the same decision."""
    if not is_stop(c):
        raise ValueError("single-stage designs use a sentinel critical value")
    return Design(
        n1=n1, n=(n1,) * (n1 + 1), c=(c,) * (n1 + 1), n_max=n_max if n_max else n1
    )
