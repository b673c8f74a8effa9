"""Assignment under one coupling resource constraint.

Every entity picks exactly one (alternative, level) pair; levels consume
a resource monotonically, costs are convex across levels, and the total
resource consumption must land in a window.  The continuous relaxation
is solved by greedy exchanges: start from the per-entity cost minimizers
and repeatedly apply the globally cheapest cost-increase-per-resource-unit
swap toward the violated bound.  The final swap may overshoot, in which
case the affected entity is split between its old and new pair so the
window boundary is hit exactly - leaving at most two fractional
variables in the whole solution.

The exact integral problem is solved by dynamic programming over
resource totals whenever resource values are nonnegative integers (the
case everywhere in this package), and by plain branch-and-bound
otherwise.  Convexity is verified, not assumed: a failed check disables
the relaxation (its value would not be a bound) but not the integral
solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import ConvexityError, InfeasibleError, ValidationError

__all__ = [
    "AdjustProblem",
    "AdjustSolution",
    "local_optima",
    "solve_relaxed",
    "solve_integral",
]


@dataclass(frozen=True)
class AdjustProblem:
    """Tabulated costs psi[v, a, b], resources phi[a, b], and the window.

    Cost entries may be +inf to mark unavailable pairs, provided the inf
    block of each alternative sits at the top of the level order.
    """

    cost: np.ndarray  # (entities, alternatives, levels)
    resource: np.ndarray  # (alternatives, levels)
    r_lo: float
    r_hi: float

    def __post_init__(self):
        cost = np.ascontiguousarray(self.cost, dtype=np.float64)
        resource = np.ascontiguousarray(self.resource, dtype=np.float64)
        if cost.ndim != 3:
            raise ValidationError(f"cost table has {cost.ndim} axes, expected 3")
        if resource.shape != cost.shape[1:]:
            raise ValidationError(
                f"resource table shape {resource.shape}, expected {cost.shape[1:]}"
            )
        if not np.isfinite(resource).all():
            raise ValidationError("resource values must be finite")
        if np.isnan(cost).any():
            raise ValidationError("cost table contains NaN")
        if self.r_lo > self.r_hi:
            raise ValidationError(f"resource window [{self.r_lo}, {self.r_hi}] empty")
        # monotone resource: sampled over all (alternative, consecutive level) pairs
        if resource.shape[1] > 1:
            diffs = np.diff(resource, axis=1)
            if (diffs < -1e-9).any():
                a = int(np.argwhere(diffs < -1e-9)[0][0])
                raise ValidationError(f"resource not monotone in level (alternative {a})")
        cost.setflags(write=False)
        resource.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "resource", resource)

    @property
    def n_entities(self) -> int:
        return self.cost.shape[0]

    @cached_property
    def is_convex(self) -> bool:
        """Second differences of psi along levels >= -1e-9 per (entity, alternative).

        Infinite tails are convex-compatible; an inf below a finite entry
        is not, matching the top-padding convention.
        """
        c = self.cost
        if c.shape[2] < 3:
            ok_shape = True
        else:
            finite = np.isfinite(c)
            second = c[:, :, 2:] - 2.0 * c[:, :, 1:-1] + c[:, :, :-2]
            window_finite = finite[:, :, 2:] & finite[:, :, 1:-1] & finite[:, :, :-2]
            ok_shape = bool(np.all(second[window_finite] >= -1e-9))
        finite = np.isfinite(c)
        if c.shape[2] > 1:
            resurrect = (~finite[:, :, :-1]) & finite[:, :, 1:]
            if resurrect.any():
                return False
        return ok_shape


@dataclass(frozen=True)
class FractionalSplit:
    entity: int
    pair: tuple[int, int]  # the secondary (alternative, level)
    weight_primary: float  # weight on the pair recorded in `pairs`


@dataclass(frozen=True)
class AdjustSolution:
    pairs: tuple[tuple[int, int], ...]  # primary (alternative, level) per entity
    objective: float
    resource_total: float
    split: FractionalSplit | None = None

    @property
    def is_integral(self) -> bool:
        return self.split is None

    def weights_for(self, v: int) -> list[tuple[tuple[int, int], float]]:
        if self.split is not None and self.split.entity == v:
            w = self.split.weight_primary
            return [(self.pairs[v], w), (self.split.pair, 1.0 - w)]
        return [(self.pairs[v], 1.0)]

    @property
    def fractional_variable_count(self) -> int:
        return 0 if self.split is None else 2


def local_optima(problem: AdjustProblem) -> AdjustSolution:
    """Per-entity best pair, ignoring the resource window entirely."""
    flat = problem.cost.reshape(problem.n_entities, -1)
    pick = np.argmin(flat, axis=1)
    if not np.all(np.isfinite(flat[np.arange(problem.n_entities), pick])):
        raise InfeasibleError("an entity has no available pair")
    n_b = problem.cost.shape[2]
    pairs = tuple((int(p // n_b), int(p % n_b)) for p in pick)
    obj = float(flat[np.arange(problem.n_entities), pick].sum())
    rtot = float(sum(problem.resource[a, b] for a, b in pairs))
    return AdjustSolution(pairs=pairs, objective=obj, resource_total=rtot)


def solve_relaxed(problem: AdjustProblem) -> AdjustSolution:
    """Optimal solution of the continuous relaxation (convex costs required)."""
    if not problem.is_convex:
        raise ConvexityError(
            "cost table not convex across levels; relaxation bound unavailable"
        )
    status, a_sel, b_sel, fv, fa, fb, fw, obj, rtot = _kernels.greedy_relax(
        problem.cost, problem.resource, problem.r_lo, problem.r_hi
    )
    if status != 0:
        raise InfeasibleError("relative exchange costs are all infinite; window unreachable")
    pairs = tuple((int(a), int(b)) for a, b in zip(a_sel, b_sel))
    split = None
    if fv >= 0:
        split = FractionalSplit(entity=int(fv), pair=(int(fa), int(fb)), weight_primary=float(fw))
    return AdjustSolution(pairs=pairs, objective=float(obj), resource_total=float(rtot), split=split)


def _integral_resources(problem: AdjustProblem) -> np.ndarray | None:
    res = problem.resource
    rounded = np.rint(res)
    if (res < -1e-9).any():
        return None
    if np.abs(res - rounded).max() > 1e-9:
        return None
    return rounded.astype(np.int64)


def solve_integral(problem: AdjustProblem, work_limit: int = 5_000_000) -> AdjustSolution:
    """Exact integral optimum over the resource window."""
    items = _integral_resources(problem)
    if items is not None and math.isfinite(problem.r_hi):
        r_hi = math.floor(problem.r_hi + 1e-9)
        r_lo = max(0, math.ceil(problem.r_lo - 1e-9))
        if r_hi < 0 or r_lo > r_hi:
            raise InfeasibleError("resource window contains no integer total")
        if problem.n_entities * (r_hi + 1) > work_limit:
            return _solve_integral_bnb(problem)
        status, a_sel, b_sel, obj, rtot = _kernels.assign_min_cost_dp(
            problem.cost, items, r_lo, r_hi
        )
        if status != 0:
            raise InfeasibleError("no integral assignment lands in the resource window")
        pairs = tuple((int(a), int(b)) for a, b in zip(a_sel, b_sel))
        return AdjustSolution(pairs=pairs, objective=float(obj), resource_total=float(rtot))
    return _solve_integral_bnb(problem)


def _solve_integral_bnb(problem: AdjustProblem) -> AdjustSolution:
    """Depth-first search with per-entity cost bounds and resource reachability."""
    cost, res = problem.cost, problem.resource
    n_v = problem.n_entities
    n_a, n_b = res.shape
    pairs_sorted = []
    min_r = np.empty(n_v)
    max_r = np.empty(n_v)
    min_c = np.empty(n_v)
    for v in range(n_v):
        opts = [
            (float(cost[v, a, b]), float(res[a, b]), a, b)
            for a in range(n_a)
            for b in range(n_b)
            if np.isfinite(cost[v, a, b])
        ]
        if not opts:
            raise InfeasibleError("an entity has no available pair")
        opts.sort()
        pairs_sorted.append(opts)
        min_r[v] = min(o[1] for o in opts)
        max_r[v] = max(o[1] for o in opts)
        min_c[v] = opts[0][0]
    suffix_min_r = np.concatenate([np.cumsum(min_r[::-1])[::-1], [0.0]])
    suffix_max_r = np.concatenate([np.cumsum(max_r[::-1])[::-1], [0.0]])
    suffix_min_c = np.concatenate([np.cumsum(min_c[::-1])[::-1], [0.0]])

    best_obj = math.inf
    best_pairs: list[tuple[int, int]] | None = None
    chosen: list[tuple[int, int]] = []

    def dfs(v: int, cost_so_far: float, res_so_far: float):
        nonlocal best_obj, best_pairs
        if cost_so_far + suffix_min_c[v] >= best_obj - 1e-12:
            return
        if res_so_far + suffix_min_r[v] > problem.r_hi + 1e-9:
            return
        if res_so_far + suffix_max_r[v] < problem.r_lo - 1e-9:
            return
        if v == n_v:
            best_obj = cost_so_far
            best_pairs = list(chosen)
            return
        for c, r, a, b in pairs_sorted[v]:
            chosen.append((a, b))
            dfs(v + 1, cost_so_far + c, res_so_far + r)
            chosen.pop()

    dfs(0, 0.0, 0.0)
    if best_pairs is None:
        raise InfeasibleError("no integral assignment lands in the resource window")
    rtot = float(sum(res[a, b] for a, b in best_pairs))
    return AdjustSolution(pairs=tuple(best_pairs), objective=float(best_obj), resource_total=rtot)
