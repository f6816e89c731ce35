"""Threshold and wake-schedule extraction from converged value functions.

A converged cost-to-go J induces a stationary rule: stop once the belief
reaches a threshold, and below it wake the count (or wake probability)
that minimizes the one-slot Bellman backup.  The stop set is a single
interval ending at 1, so the rule is fully described by the threshold
plus a per-belief action map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dp import (
    TIE_BREAK,
    BeliefGrid,
    ExpectationOperator,
    ValueFunction,
    bellman_control_m,
    bellman_control_q,
    bellman_maps,
    build_expectation_operator,
    expected_future_cost,
)
from .model import Problem

THRESHOLD_BISECTION_STEPS = 50

POLICY_KINDS = ("control_m", "control_q", "open_loop", "fixed_m")


@dataclass(frozen=True)
class Policy:
    """Stationary detection-and-scheduling rule on a belief grid.

    ``gamma`` is the stopping threshold; the action maps give the
    continue-region decision at each grid node (entries at and above the
    threshold are the argmin of the continuation cost there, kept for
    inspection but never executed).  ``awake_rule_mismatches`` counts
    grid nodes below the threshold where the marginal-value threshold
    rule disagrees with the enumeration argmin; the argmin is
    authoritative, the counter is diagnostic.
    """

    kind: str
    gamma: float
    grid: BeliefGrid
    n: int
    problem_key: str
    awake_map: np.ndarray | None = None
    wake_prob_map: np.ndarray | None = None
    fixed_q: float | None = None
    fixed_m: int | None = None
    awake_rule_mismatches: int = 0

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.gamma!r}")
        if self.kind in ("control_m", "fixed_m"):
            if self.awake_map is None or len(self.awake_map) != self.grid.size:
                raise ValueError("awake_map must cover every grid node")
            amap = np.asarray(self.awake_map, dtype=int)
            if np.any((amap < 0) | (amap > self.n)):
                raise ValueError(f"awake_map entries must lie in 0..{self.n}")
            object.__setattr__(self, "awake_map", amap)
        if self.kind == "control_q":
            if self.wake_prob_map is None or len(self.wake_prob_map) != self.grid.size:
                raise ValueError("wake_prob_map must cover every grid node")
            qmap = np.asarray(self.wake_prob_map, dtype=float)
            if np.any((qmap < 0.0) | (qmap > 1.0)):
                raise ValueError("wake_prob_map entries must lie in [0, 1]")
            object.__setattr__(self, "wake_prob_map", qmap)
        if self.kind == "open_loop":
            if self.fixed_q is None or not 0.0 <= self.fixed_q <= 1.0:
                raise ValueError(f"open_loop needs fixed_q in [0, 1], got {self.fixed_q!r}")

    def should_stop(self, pi: float) -> bool:
        return pi >= self.gamma

    def _continue_index(self, pi: float) -> int:
        # Clamp to the last node strictly below gamma: a belief just
        # under the threshold must never pick up a stop-node entry.
        idx = self.grid.nearest_index(pi)
        end = int(np.searchsorted(self.grid.points, self.gamma, side="left")) - 1
        if end < 0:
            raise ValueError("policy stops everywhere; no continue-region action")
        return min(idx, end)

    def awake_count_at(self, pi: float) -> int:
        """Continue-region awake count at the nearest continue-region node."""
        if self.awake_map is None:
            raise ValueError(f"{self.kind} policy has no awake-count map")
        return int(self.awake_map[self._continue_index(pi)])

    def wake_prob_at(self, pi: float) -> float:
        if self.kind == "open_loop":
            return float(self.fixed_q)
        if self.wake_prob_map is None:
            raise ValueError(f"{self.kind} policy has no wake-probability map")
        return float(self.wake_prob_map[self._continue_index(pi)])


def _continuation_values(
    J: ValueFunction,
    problem: Problem,
    strategy: str,
    operator: ExpectationOperator | None,
    **strategy_kw,
):
    operator = operator or build_expectation_operator(problem, J.grid)
    maps = bellman_maps(J, problem, strategy, operator=operator, **strategy_kw)
    return operator, maps


def _threshold_from_continuation(
    grid: BeliefGrid, continue_values: np.ndarray, lambda_f: float
) -> float:
    pts = grid.points
    stop_cost = lambda_f * (1.0 - pts)
    stop = stop_cost <= continue_values + TIE_BREAK
    if not stop.any():
        raise ValueError(
            "degenerate instance: stopping is never optimal on the grid"
        )
    first = int(np.argmax(stop))
    if not stop[first:].all():
        raise ValueError(
            "stop region is not a single interval; threshold undefined"
        )
    if first == 0:
        return 0.0
    # C - H is positive on the continue side of the bracket and <= 0 on
    # the stop side; bisect on the linear interpolants.
    lo, hi = pts[first - 1], pts[first]

    def gap(x: float) -> float:
        return lambda_f * (1.0 - x) - float(np.interp(x, pts, continue_values))

    for _ in range(THRESHOLD_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def extract_threshold(
    J: ValueFunction,
    problem: Problem,
    strategy: str = "control_m",
    *,
    operator: ExpectationOperator | None = None,
    q: float | None = None,
    fixed_m: int | None = None,
    q_grid: np.ndarray | None = None,
) -> float:
    """Smallest belief at which stopping is optimal under ``J``.

    Grid-brackets the crossing of the stopping cost and the continuation
    value, then refines it by bisection on their linear interpolants.
    The stop set must be a single interval reaching 1.

    Raises:
        ValueError: If stopping is nowhere optimal ("degenerate
            instance") or the stop set is not an interval.
    """
    kw = {}
    if q is not None:
        kw["q"] = q
    if fixed_m is not None:
        kw["fixed_m"] = fixed_m
    if q_grid is not None:
        kw["q_grid"] = q_grid
    _, maps = _continuation_values(J, problem, strategy, operator, **kw)
    return _threshold_from_continuation(J.grid, maps.continue_values, problem.costs.lambda_f)


def differential_cost(
    J: ValueFunction,
    pi: float,
    m: int,
    problem: Problem,
    *,
    operator: ExpectationOperator | None = None,
) -> float:
    """Marginal value of the m-th awake sensor: B(m-1) - B(m) at ``pi``.

    Nonnegative (up to integration tolerance) whenever J is concave, and
    exactly 0 at pi = 1 where the belief is absorbed.

    Raises:
        ValueError: If ``m`` is 0 or exceeds the sensor count.
    """
    if not (isinstance(m, (int, np.integer)) and 1 <= m <= problem.n):
        raise ValueError(f"m must lie in 1..{problem.n}, got {m!r}")
    operator = operator or build_expectation_operator(problem, J.grid)
    lower = expected_future_cost(J, pi, m - 1, problem, operator=operator)
    upper = expected_future_cost(J, pi, m, problem, operator=operator)
    return lower - upper


def optimal_awake_count(
    J: ValueFunction,
    pi: float,
    problem: Problem,
    *,
    operator: ExpectationOperator | None = None,
    gamma: float | None = None,
) -> int:
    """Cost-minimizing awake count at ``pi``, by enumeration over 0..n.

    Only defined in the continuation region.

    Raises:
        ValueError: If ``pi`` is at or above the stopping threshold
            ("in stopping region").
    """
    operator = operator or build_expectation_operator(problem, J.grid)
    if gamma is None:
        gamma = extract_threshold(J, problem, "control_m", operator=operator)
    if pi >= gamma:
        raise ValueError(f"belief {pi!r} is in stopping region (threshold {gamma:.6f})")
    decision = bellman_control_m(J, pi, problem, operator=operator)
    return int(decision.best)


def awake_count_by_differential(
    J: ValueFunction,
    pi: float,
    problem: Problem,
    *,
    operator: ExpectationOperator | None = None,
) -> int:
    """Awake count by the marginal-value rule: max{m : d(m; pi) >= lambda_s}.

    Equivalent to the enumeration argmin when d is monotone in m; that
    monotonicity is an observation, not a theorem, so this form is a
    verification view only.
    """
    operator = operator or build_expectation_operator(problem, J.grid)
    lam_s = problem.costs.lambda_s
    B = [expected_future_cost(J, pi, m, problem, operator=operator) for m in range(problem.n + 1)]
    best = 0
    for m in range(1, problem.n + 1):
        if B[m - 1] - B[m] >= lam_s:
            best = m
    return best


def optimal_wake_prob(
    J: ValueFunction,
    pi: float,
    problem: Problem,
    q_grid: np.ndarray | None = None,
    *,
    operator: ExpectationOperator | None = None,
    gamma: float | None = None,
) -> float:
    """Cost-minimizing wake probability at ``pi`` (grid search + refine).

    Raises:
        ValueError: If ``pi`` is at or above the stopping threshold.
    """
    operator = operator or build_expectation_operator(problem, J.grid)
    if q_grid is None:
        q_grid = np.linspace(0.0, 1.0, 101)
    if gamma is None:
        gamma = extract_threshold(J, problem, "control_q", operator=operator, q_grid=q_grid)
    if pi >= gamma:
        raise ValueError(f"belief {pi!r} is in stopping region (threshold {gamma:.6f})")
    decision = bellman_control_q(J, pi, problem, q_grid, operator=operator)
    return float(decision.best)


def _differential_rule_map(
    J: ValueFunction, problem: Problem, operator: ExpectationOperator
) -> np.ndarray:
    B = operator.apply_all(J.values)
    d = B[:-1] - B[1:]
    hits = d >= problem.costs.lambda_s
    counts = np.arange(1, problem.n + 1)[:, None] * hits
    return counts.max(axis=0)


def extract_policy(
    J: ValueFunction,
    problem: Problem,
    strategy: str,
    *,
    operator: ExpectationOperator | None = None,
    q: float | None = None,
    fixed_m: int | None = None,
    q_grid: np.ndarray | None = None,
    q_grid_size: int = 101,
) -> Policy:
    """Threshold plus action maps for ``strategy`` from a converged ``J``.

    For control_m the awake map is the enumeration argmin; nodes below
    the threshold where the marginal-value rule disagrees are tallied in
    ``awake_rule_mismatches``.
    """
    operator = operator or build_expectation_operator(problem, J.grid)
    kw: dict = {}
    if strategy == "control_q":
        kw["q_grid"] = q_grid if q_grid is not None else np.linspace(0.0, 1.0, q_grid_size)
    if strategy == "open_loop":
        kw["q"] = q
    if strategy == "fixed_m":
        kw["fixed_m"] = fixed_m
    _, maps = _continuation_values(J, problem, strategy, operator, **kw)
    gamma = _threshold_from_continuation(J.grid, maps.continue_values, problem.costs.lambda_f)
    key = problem.key()
    if strategy == "control_m":
        awake = maps.best_action.astype(int)
        rule = _differential_rule_map(J, problem, operator)
        below = J.grid.points < gamma
        mismatches = int(np.sum((rule != awake) & below))
        return Policy(
            kind="control_m", gamma=gamma, grid=J.grid, n=problem.n,
            problem_key=key, awake_map=awake, awake_rule_mismatches=mismatches,
        )
    if strategy == "control_q":
        return Policy(
            kind="control_q", gamma=gamma, grid=J.grid, n=problem.n,
            problem_key=key, wake_prob_map=maps.best_action.astype(float),
        )
    if strategy == "open_loop":
        return Policy(
            kind="open_loop", gamma=gamma, grid=J.grid, n=problem.n,
            problem_key=key, fixed_q=float(q),
        )
    if strategy == "fixed_m":
        return Policy(
            kind="fixed_m", gamma=gamma, grid=J.grid, n=problem.n,
            problem_key=key, fixed_m=int(fixed_m),
            awake_map=np.full(J.grid.size, int(fixed_m)),
        )
    raise ValueError(f"strategy must be one of {POLICY_KINDS}, got {strategy!r}")
