"""Assembly of the binary linear program for one stage-one size.

For a fixed n1, every admissible per-outcome action is a pair (n2, c):
stage-two size and overall critical value.  One binary variable per
(x1, n2, c) selects the action taken at interim outcome x1; one
choose-one row per x1 makes n(.) and c(.) well-defined functions.  The
power and boundary type-one-error requirements are linear in these
binaries because conditional error and conditional power are constants
of the action.

Optional regularization constraint sets:

* monotone_ce      -- conditional error non-decreasing in x1,
* contiguous_stopping -- futility region attached to x1=0 and efficacy
  region attached to x1=n1, via one indicator binary per stop decision,
* unimodal_n       -- at most one local maximum of n(.), via one peak
  indicator per outcome and big-M rows activating monotone increments
  left of the peak and monotone decrements right of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .design import Design, TrialParams, validate
from .probs import NEG_INF, POS_INF, pmf_vector, upper_tail

LE, EQ, GE = "<=", "=", ">="


class Action(NamedTuple):
    n2: int
    c: float  # finite integer or +-inf sentinel


@dataclass(frozen=True)
class OutcomeActions:
    """All admissible actions for one interim outcome with coefficients."""

    x1: int
    actions: tuple[Action, ...]
    ce: np.ndarray
    cp: np.ndarray
    size: np.ndarray  # total sample size n1 + n2


@dataclass(frozen=True)
class CandidateTable:
    n1: int
    n_max: int
    params: TrialParams
    weight0: np.ndarray  # pmf(x1; n1, rho0)
    weight1: np.ndarray  # pmf(x1; n1, rho1)
    outcomes: tuple[OutcomeActions, ...]


@dataclass(frozen=True)
class ConstraintFlags:
    monotone_ce: bool = False
    contiguous_stopping: bool = False
    unimodal_n: bool = False
    min_conditional_power: float | None = None

    def __post_init__(self):
        t = self.min_conditional_power
        if t is not None and not 0.0 <= t <= 1.0:
            raise ValueError(f"min_conditional_power={t} must lie in [0, 1]")


@dataclass(frozen=True)
class ObjectiveSpec:
    """What to minimize: a weighted average of f(total sample size).

    kind 'expected_n' uses f(n)=n with null-hypothesis weights;
    'expected_n_gamma' uses f(n)=n**gamma (gamma>1) to penalize large
    sizes; 'expected_exp_n' uses f(n)=exp(n - n_max), a positive rescale
    of exp(n) that cannot overflow; 'prior_weighted' keeps f(n)=n but
    mixes the stage-one weights over a discrete prior on the response
    probability.
    """

    kind: str = "expected_n"
    gamma: float | None = None
    prior: tuple[tuple[float, float], ...] | None = None  # (rho, mass) pairs

    def __post_init__(self):
        kinds = ("expected_n", "expected_n_gamma", "expected_exp_n", "prior_weighted")
        if self.kind not in kinds:
            raise ValueError(f"objective kind must be one of {kinds}, got {self.kind!r}")
        if self.kind == "expected_n_gamma":
            if self.gamma is None or not self.gamma > 1.0:
                raise ValueError("expected_n_gamma requires gamma > 1")
        if self.kind == "prior_weighted":
            if not self.prior:
                raise ValueError("prior_weighted requires a discrete prior")
            masses = [m for _, m in self.prior]
            if any(m < 0 for m in masses) or abs(sum(masses) - 1.0) > 1e-9:
                raise ValueError("prior masses must be nonnegative and sum to 1")
            if any(not 0.0 <= r <= 1.0 for r, _ in self.prior):
                raise ValueError("prior support must lie in [0, 1]")


class VarMeta(NamedTuple):
    role: str  # 'y' | 'fut' | 'eff' | 'peak'
    x1: int
    n2: int | None = None
    c: float | None = None


@dataclass(frozen=True)
class Row:
    idx: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float


@dataclass
class BinaryLinearProgram:
    n1: int
    n_max: int
    var_meta: list[VarMeta]
    objective: np.ndarray
    rows: list[Row]
    row_tag: list[str]
    groups: list[np.ndarray] = field(default_factory=list)  # choose-one var ids per x1
    # aligned per-variable arrays for fast decoding / heuristics
    var_x1: np.ndarray = field(default=None, repr=False)
    var_size: np.ndarray = field(default=None, repr=False)
    var_ce: np.ndarray = field(default=None, repr=False)
    var_cp: np.ndarray = field(default=None, repr=False)
    peak_vars: np.ndarray = field(default=None, repr=False)

    @property
    def num_vars(self) -> int:
        return len(self.var_meta)

    def dump(self) -> str:
        """Text rendering, one line per row: tag, sense, rhs, sparse terms."""

        def vname(j):
            m = self.var_meta[j]
            if m.role == "y":
                c = "+inf" if m.c == POS_INF else "-inf" if m.c == NEG_INF else str(int(m.c))
                return f"y[{m.x1},{m.n2},{c}]"
            return f"{m.role}[{m.x1}]"

        lines = [
            "min " + " ".join(
                f"{self.objective[j]:+.17g}*{vname(j)}"
                for j in range(self.num_vars)
                if self.objective[j] != 0.0
            )
        ]
        for tag, row in zip(self.row_tag, self.rows):
            terms = " ".join(
                f"{v:+.17g}*{vname(j)}" for j, v in zip(row.idx, row.coef)
            )
            lines.append(f"{tag}: {terms} {row.sense} {row.rhs:.17g}")
        return "\n".join(lines) + "\n"


def _action_sort_key(a: Action):
    # canonical order: n2 ascending, then -inf < finite < +inf
    if a.c == NEG_INF:
        group = 0, 0.0
    elif a.c == POS_INF:
        group = 2, 0.0
    else:
        group = 1, a.c
    return a.n2, group


def enumerate_candidates(n1: int, n_max: int, params: TrialParams) -> CandidateTable:
    """All admissible (n2, c) actions per interim outcome with coefficients.

    Stops (n2=0, c=+-inf) are always present.  A continuation must leave
    the final decision open in the sense x1 <= c < n1 + n2, and the
    critical value stays below n_max.
    """
    if not 1 <= n1 <= n_max:
        raise ValueError(f"need 1 <= n1 <= n_max, got n1={n1}, n_max={n_max}")
    w0 = pmf_vector(n1, params.rho0)
    w1 = pmf_vector(n1, params.rho1)
    # tail lookup per stage-two size, indexed by threshold c - x1
    tails0: dict[int, np.ndarray] = {}
    tails1: dict[int, np.ndarray] = {}
    for n2 in range(1, n_max - n1 + 1):
        tails0[n2] = np.array([upper_tail(t, n2, params.rho0) for t in range(n2)])
        tails1[n2] = np.array([upper_tail(t, n2, params.rho1) for t in range(n2)])
    outcomes = []
    for x1 in range(n1 + 1):
        actions = [Action(0, NEG_INF), Action(0, POS_INF)]
        for n2 in range(1, n_max - n1 + 1):
            for c in range(x1, min(n1 + n2, n_max)):
                actions.append(Action(n2, float(c)))
        actions.sort(key=_action_sort_key)
        ce = np.empty(len(actions))
        cp = np.empty(len(actions))
        size = np.empty(len(actions))
        for i, a in enumerate(actions):
            size[i] = n1 + a.n2
            if a.c == NEG_INF:
                ce[i] = cp[i] = 1.0
            elif a.c == POS_INF:
                ce[i] = cp[i] = 0.0
            else:
                t = int(a.c) - x1
                ce[i] = tails0[a.n2][t] if t < a.n2 else 0.0
                cp[i] = tails1[a.n2][t] if t < a.n2 else 0.0
        outcomes.append(
            OutcomeActions(x1=x1, actions=tuple(actions), ce=ce, cp=cp, size=size)
        )
    return CandidateTable(
        n1=n1, n_max=n_max, params=params, weight0=w0, weight1=w1,
        outcomes=tuple(outcomes),
    )


def _dominance_keep(out: OutcomeActions, mode: str) -> np.ndarray:
    """Boolean mask of actions to keep after dominance preprocessing.

    mode 'full': drop an action when another one is at least as good in
    (size, ce, cp) with one strict inequality.  mode 'decided': drop only
    continuations whose rejection is already impossible (threshold at or
    beyond the stage-two size, so ce = cp = 0); these are interchangeable
    with the futility stop in every constraint that references ce alone,
    which keeps the reduction exact under the monotone-ce rows.

    Within one size level both tails are strictly decreasing in c (for
    response probabilities strictly inside (0, 1)), so no action can
    dominate another of the same size; only strictly smaller sizes need
    to be consulted, which allows a single ascending sweep with a Pareto
    frontier over (ce, cp).
    """
    k = len(out.actions)
    keep = np.ones(k, dtype=bool)
    n2s = np.array([a.n2 for a in out.actions])
    cs = np.array([a.c for a in out.actions])
    if mode == "decided":
        with np.errstate(invalid="ignore"):
            keep &= ~((n2s > 0) & (cs - out.x1 >= n2s))
        return keep
    frontier_ce = np.empty(0)
    frontier_maxcp = np.empty(0)
    for size in np.unique(out.size):
        ids = np.flatnonzero(out.size == size)
        if frontier_ce.size:
            pos = np.searchsorted(frontier_ce, out.ce[ids], side="right") - 1
            hit = pos >= 0
            hit[hit] = frontier_maxcp[pos[hit]] >= out.cp[ids[hit]]
            keep[ids[hit]] = False
        survivors = ids[keep[ids]]
        if survivors.size:
            merged_ce = np.concatenate([frontier_ce, out.ce[survivors]])
            merged_cp = np.concatenate([frontier_maxcp, out.cp[survivors]])
            order = np.argsort(merged_ce, kind="stable")
            frontier_ce = merged_ce[order]
            frontier_maxcp = np.maximum.accumulate(merged_cp[order])
    return keep


def build_blp(
    cands: CandidateTable,
    flags: ConstraintFlags,
    obj: ObjectiveSpec,
    params: TrialParams,
) -> BinaryLinearProgram:
    """Translate a candidate table into the sparse binary linear program."""
    n1, n_max = cands.n1, cands.n_max
    threshold = flags.min_conditional_power

    if flags.unimodal_n:
        prune_mode = None
    elif flags.monotone_ce:
        prune_mode = "decided"
    else:
        prune_mode = "full"

    kept: list[np.ndarray] = []
    for out in cands.outcomes:
        keep = np.ones(len(out.actions), dtype=bool)
        if threshold is not None:
            for i, a in enumerate(out.actions):
                if a.n2 > 0 and out.cp[i] < threshold:
                    keep[i] = False
        if prune_mode is not None:
            keep &= _dominance_keep(out, prune_mode)
        kept.append(np.flatnonzero(keep))

    # assignment variables in canonical order
    var_meta: list[VarMeta] = []
    groups: list[np.ndarray] = []
    ce_list, cp_list, size_list, x1_list = [], [], [], []
    fut_stop_var: dict[int, int] = {}
    eff_stop_var: dict[int, int] = {}
    for out, keep_idx in zip(cands.outcomes, kept):
        start = len(var_meta)
        for i in keep_idx:
            a = out.actions[i]
            j = len(var_meta)
            var_meta.append(VarMeta("y", out.x1, a.n2, a.c))
            ce_list.append(out.ce[i])
            cp_list.append(out.cp[i])
            size_list.append(out.size[i])
            x1_list.append(out.x1)
            if a.n2 == 0 and a.c == POS_INF:
                fut_stop_var[out.x1] = j
            elif a.n2 == 0 and a.c == NEG_INF:
                eff_stop_var[out.x1] = j
        groups.append(np.arange(start, len(var_meta)))
    n_assign = len(var_meta)

    fut_vars: dict[int, int] = {}
    eff_vars: dict[int, int] = {}
    peak_vars: dict[int, int] = {}
    if flags.contiguous_stopping:
        for x1 in range(1, n1 + 1):
            fut_vars[x1] = len(var_meta)
            var_meta.append(VarMeta("fut", x1))
        for x1 in range(n1):
            eff_vars[x1] = len(var_meta)
            var_meta.append(VarMeta("eff", x1))
    if flags.unimodal_n:
        for x1 in range(n1 + 1):
            peak_vars[x1] = len(var_meta)
            var_meta.append(VarMeta("peak", x1))
    n_vars = len(var_meta)

    var_x1 = np.full(n_vars, -1, dtype=int)
    var_x1[:n_assign] = x1_list
    var_size = np.zeros(n_vars)
    var_size[:n_assign] = size_list
    var_ce = np.zeros(n_vars)
    var_ce[:n_assign] = ce_list
    var_cp = np.zeros(n_vars)
    var_cp[:n_assign] = cp_list

    # objective coefficients: stage-one weight times f(total size)
    if obj.kind == "prior_weighted":
        w_obj = np.zeros(n1 + 1)
        for rho, mass in obj.prior:
            w_obj += mass * pmf_vector(n1, rho)
    else:
        w_obj = cands.weight0
    if obj.kind == "expected_n_gamma":
        f_size = var_size[:n_assign] ** obj.gamma
    elif obj.kind == "expected_exp_n":
        f_size = np.exp(var_size[:n_assign] - n_max)
    else:
        f_size = var_size[:n_assign]
    objective = np.zeros(n_vars)
    objective[:n_assign] = w_obj[var_x1[:n_assign]] * f_size

    rows: list[Row] = []
    tags: list[str] = []

    def add(idx, coef, sense, rhs, tag):
        rows.append(
            Row(np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), sense, float(rhs))
        )
        tags.append(tag)

    for x1, g in enumerate(groups):
        add(g, np.ones(g.size), EQ, 1.0, f"choose_one[x1={x1}]")
    all_assign = np.arange(n_assign)
    w1_per_var = cands.weight1[var_x1[:n_assign]]
    w0_per_var = cands.weight0[var_x1[:n_assign]]
    add(all_assign, w1_per_var * var_cp[:n_assign], GE, 1.0 - params.beta, "power")
    add(all_assign, w0_per_var * var_ce[:n_assign], LE, params.alpha, "alpha")

    if flags.monotone_ce:
        for x1 in range(1, n1 + 1):
            g_hi, g_lo = groups[x1], groups[x1 - 1]
            idx = np.concatenate([g_hi, g_lo])
            coef = np.concatenate([var_ce[g_hi], -var_ce[g_lo]])
            add(idx, coef, GE, 0.0, f"monotone_ce[x1={x1}]")

    if flags.contiguous_stopping:
        for x1 in range(1, n1 + 1):
            add(
                [fut_stop_var[x1], fut_vars[x1]], [1.0, -1.0], EQ, 0.0,
                f"fut_link[x1={x1}]",
            )
        for x1 in range(1, n1 + 1):
            add(
                [fut_stop_var[x1 - 1], fut_vars[x1]], [1.0, -1.0], GE, 0.0,
                f"fut_chain[x1={x1}]",
            )
        for x1 in range(n1):
            add(
                [eff_stop_var[x1], eff_vars[x1]], [1.0, -1.0], EQ, 0.0,
                f"eff_link[x1={x1}]",
            )
        for x1 in range(n1):
            add(
                [eff_stop_var[x1 + 1], eff_vars[x1]], [1.0, -1.0], GE, 0.0,
                f"eff_chain[x1={x1}]",
            )

    if flags.unimodal_n:
        big_m = 2.0 * n_max
        for t in range(n1 + 1):
            pk = peak_vars[t]
            for s in range(1, t + 1):
                g_hi, g_lo = groups[s], groups[s - 1]
                idx = np.concatenate([g_hi, g_lo, [pk]])
                coef = np.concatenate([var_size[g_hi], -var_size[g_lo], [-big_m]])
                add(idx, coef, GE, -big_m, f"peak_rise[t={t},s={s}]")
            for s in range(t + 1, n1 + 1):
                g_hi, g_lo = groups[s], groups[s - 1]
                idx = np.concatenate([g_hi, g_lo, [pk]])
                coef = np.concatenate([var_size[g_hi], -var_size[g_lo], [big_m]])
                add(idx, coef, LE, big_m, f"peak_fall[t={t},s={s}]")
        pk_all = np.array(sorted(peak_vars.values()))
        add(pk_all, np.ones(pk_all.size), GE, 1.0, "peak_cover")

    return BinaryLinearProgram(
        n1=n1,
        n_max=n_max,
        var_meta=var_meta,
        objective=objective,
        rows=rows,
        row_tag=tags,
        groups=groups,
        var_x1=var_x1,
        var_size=var_size,
        var_ce=var_ce,
        var_cp=var_cp,
        peak_vars=np.array(sorted(peak_vars.values()), dtype=int),
    )


def decode_solution(assignment, blp: BinaryLinearProgram, n1: int, n_max: int) -> Design:
    """Read the selected action per outcome back into a Design."""
    assignment = np.asarray(assignment, dtype=float)
    n_vec: list[int] = []
    c_vec: list[float] = []
    for x1, g in enumerate(blp.groups):
        on = g[assignment[g] > 0.5]
        if on.size != 1:
            raise ValueError(f"x1={x1}: expected exactly one selected action, got {on.size}")
        m = blp.var_meta[int(on[0])]
        n_vec.append(n1 + m.n2)
        c_vec.append(m.c)
    design = Design(n1=n1, n=tuple(n_vec), c=tuple(c_vec), n_max=n_max)
    verdict = validate(design)
    if not verdict.ok:
        raise ValueError("decoded design invalid: " + "; ".join(verdict.violations))
    return design


def encode_design(design: Design, blp: BinaryLinearProgram) -> np.ndarray:
    """Inverse of decode_solution, filling implied auxiliary indicators."""
    x = np.zeros(blp.num_vars)
    lookup = {
        (m.x1, m.n2, m.c): j
        for j, m in enumerate(blp.var_meta)
        if m.role == "y"
    }
    for x1 in range(design.n1 + 1):
        key = (x1, design.n[x1] - design.n1, design.c[x1])
        if key not in lookup:
            raise ValueError(f"design action {key} not present in the program")
        x[lookup[key]] = 1.0
    for j, m in enumerate(blp.var_meta):
        if m.role == "fut":
            x[j] = 1.0 if design.c[m.x1] == POS_INF else 0.0
        elif m.role == "eff":
            x[j] = 1.0 if design.c[m.x1] == NEG_INF else 0.0
    if blp.peak_vars is not None and blp.peak_vars.size:
        diffs = np.diff(np.asarray(design.n))
        valid = [
            t
            for t in range(design.n1 + 1)
            if (diffs[:t] >= 0).all() and (diffs[t:] <= 0).all()
        ]
        if not valid:
            raise ValueError("design sample size function is not unimodal")
        x[blp.peak_vars[valid[0]]] = 1.0
    return x
