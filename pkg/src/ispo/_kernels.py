"""Hot numeric kernels: numba-jitted loops with a pure-numpy fallback.

Four kernels dominate solver runtime:

* ``profit_curves``    - discounted yield of a single branch/size cell as a
                         function of its initial supply, for all integer
                         supply levels at once;
* ``trajectory_yields`` - discounted total yield of a fixed supply under
                         every candidate mark-down schedule;
* ``greedy_relax``     - continuous relaxation of the one-resource
                         assignment problem by greedy exchanges;
* ``assign_min_cost_dp`` - exact integral assignment under an integer
                         resource window, by dynamic programming.

The jitted loop implementations are used whenever numba imports; set
``ISPO_PURE_NUMPY=1`` to force the vectorized numpy path.  Both paths
compute the same quantities (see tests/test_kernels.py);
benchmarks/bench_kernels.py compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "HAS_NUMBA",
    "USE_NUMBA",
    "active_backend",
    "profit_curves",
    "trajectory_yields",
    "greedy_relax",
    "assign_min_cost_dp",
]

_INF = np.inf


def _flag_disables_numba() -> bool:
    return os.environ.get("ISPO_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _flag_disables_numba()


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# profit curves: yield of one cell as a function of initial supply
# ---------------------------------------------------------------------------
#
# Items of a cell sell in period order; with cumulative demand C_k along the
# chosen prices and per-period money weight w_k (discount times price), the
# yield of supplying i items is sum_k w_k * (min(C_k, i) - min(C_{k-1}, i)).
# The curve is concave and piecewise linear in i.


def _profit_curves_loops(demand, weights, n_levels):
    n_periods, n_b, n_s = demand.shape
    out = np.zeros((n_b, n_s, n_levels))
    for b in range(n_b):
        for s in range(n_s):
            c_prev = 0.0
            for k in range(n_periods):
                c_new = c_prev + demand[k, b, s]
                w = weights[k]
                if w != 0.0:
                    for i in range(n_levels):
                        lo = c_prev if c_prev < i else float(i)
                        hi = c_new if c_new < i else float(i)
                        out[b, s, i] += w * (hi - lo)
                c_prev = c_new
    return out


def _profit_curves_numpy(demand, weights, n_levels):
    cum = np.cumsum(demand, axis=0)
    prev = np.concatenate([np.zeros_like(cum[:1]), cum[:-1]], axis=0)
    grid = np.arange(n_levels, dtype=np.float64)
    sold = np.minimum(cum[..., None], grid) - np.minimum(prev[..., None], grid)
    return np.einsum("k,kbsi->bsi", weights, sold)


# ---------------------------------------------------------------------------
# trajectory sweep: total discounted yield of a supply under every schedule
# ---------------------------------------------------------------------------


def _trajectory_yields_loops(supply, demand, price_idx, weights):
    n_t = price_idx.shape[0]
    n_periods = demand.shape[0]
    n_b, n_s = supply.shape
    values = np.zeros(n_t)
    stock = np.empty((n_b, n_s))
    for t in range(n_t):
        for b in range(n_b):
            for s in range(n_s):
                stock[b, s] = supply[b, s]
        total = 0.0
        for k in range(n_periods):
            p = price_idx[t, k]
            w = weights[t, k]
            for b in range(n_b):
                for s in range(n_s):
                    d = demand[k, p, b, s]
                    sale = stock[b, s] if stock[b, s] < d else d
                    total += w * sale
                    stock[b, s] -= sale
        values[t] = total
    return values


def _trajectory_yields_numpy(supply, demand, price_idx, weights):
    n_t, n_periods = price_idx.shape
    values = np.zeros(n_t)
    for t in range(n_t):
        stock = supply.astype(np.float64).copy()
        total = 0.0
        for k in range(n_periods):
            sales = np.minimum(stock, demand[k, price_idx[t, k]])
            total += weights[t, k] * float(sales.sum())
            stock -= sales
        values[t] = total
    return values


# ---------------------------------------------------------------------------
# greedy exchange relaxation (one coupling resource constraint)
# ---------------------------------------------------------------------------
#
# Entities pick a (alternative, level) pair each; levels consume resource
# monotonically.  Starting from the per-entity cost minimizers, the cheapest
# cost-increase-per-resource-unit exchange is applied until the total lands
# in [r_lo, r_hi]; the final overshooting step is split as a convex
# combination, leaving at most one split entity (two fractional variables).
#
# Status codes: 0 = solved, 1 = infeasible.  frac_v < 0 means integral.
# When frac_v >= 0, entity frac_v keeps (a_sel, b_sel) with weight frac_w and
# takes (frac_a, frac_b) with weight 1 - frac_w.


def _greedy_best_exchange(cost, res, v, a_cur, b_cur, down):
    n_a, n_b = res.shape
    cur_r = res[a_cur, b_cur]
    cur_c = cost[v, a_cur, b_cur]
    best_rate = _INF
    best_a = -1
    best_b = -1
    for a in range(n_a):
        idx = -1
        if down:
            for b in range(n_b - 1, -1, -1):
                if res[a, b] < cur_r:
                    idx = b
                    break
        else:
            for b in range(n_b):
                if res[a, b] > cur_r:
                    idx = b
                    break
        if idx < 0:
            continue
        dr = cur_r - res[a, idx] if down else res[a, idx] - cur_r
        rate = (cost[v, a, idx] - cur_c) / dr
        if rate < best_rate:
            best_rate = rate
            best_a = a
            best_b = idx
    return best_rate, best_a, best_b


def _greedy_relax_loops(cost, res, r_lo, r_hi):
    n_v, n_a, n_b = cost.shape
    a_sel = np.empty(n_v, np.int64)
    b_sel = np.empty(n_v, np.int64)
    for v in range(n_v):
        best = _INF
        ba = -1
        bb = -1
        for a in range(n_a):
            for b in range(n_b):
                c = cost[v, a, b]
                if c < best:
                    best = c
                    ba = a
                    bb = b
        if ba < 0:
            return 1, a_sel, b_sel, -1, -1, -1, 1.0, _INF, 0.0
        a_sel[v] = ba
        b_sel[v] = bb

    total_r = 0.0
    for v in range(n_v):
        total_r += res[a_sel[v], b_sel[v]]

    frac_v = -1
    frac_a = -1
    frac_b = -1
    frac_w = 1.0

    if r_lo <= total_r <= r_hi:
        pass
    else:
        down = total_r > r_hi
        target = r_hi if down else r_lo
        ex_rate = np.empty(n_v)
        ex_a = np.empty(n_v, np.int64)
        ex_b = np.empty(n_v, np.int64)
        for v in range(n_v):
            ex_rate[v], ex_a[v], ex_b[v] = _greedy_best_exchange(
                cost, res, v, a_sel[v], b_sel[v], down
            )
        while True:
            vstar = 0
            best = ex_rate[0]
            for v in range(1, n_v):
                if ex_rate[v] < best:
                    best = ex_rate[v]
                    vstar = v
            if best == _INF:
                return 1, a_sel, b_sel, -1, -1, -1, 1.0, _INF, total_r
            old_r = res[a_sel[vstar], b_sel[vstar]]
            new_r = res[ex_a[vstar], ex_b[vstar]]
            delta = old_r - new_r if down else new_r - old_r
            remaining = total_r - target if down else target - total_r
            if delta <= remaining:
                # full exchange keeps us on the constrained side (or lands
                # exactly on the boundary); the assignment stays optimal for
                # the tightened resource total
                a_sel[vstar] = ex_a[vstar]
                b_sel[vstar] = ex_b[vstar]
                total_r = total_r - delta if down else total_r + delta
                if (down and total_r <= r_hi) or (not down and total_r >= r_lo):
                    break
                ex_rate[vstar], ex_a[vstar], ex_b[vstar] = _greedy_best_exchange(
                    cost, res, vstar, a_sel[vstar], b_sel[vstar], down
                )
            else:
                # overshoot: split the entity between old and new pair so the
                # resource total hits the boundary exactly
                frac_v = vstar
                frac_a = ex_a[vstar]
                frac_b = ex_b[vstar]
                w_new = remaining / delta
                frac_w = 1.0 - w_new
                total_r = target
                break

    obj = 0.0
    for v in range(n_v):
        obj += cost[v, a_sel[v], b_sel[v]]
    if frac_v >= 0:
        obj += (1.0 - frac_w) * (
            cost[frac_v, frac_a, frac_b] - cost[frac_v, a_sel[frac_v], b_sel[frac_v]]
        )
    return 0, a_sel, b_sel, frac_v, frac_a, frac_b, frac_w, obj, total_r


def _greedy_relax_numpy(cost, res, r_lo, r_hi):
    n_v, n_a, n_b = cost.shape
    flat = cost.reshape(n_v, n_a * n_b)
    pick = np.argmin(flat, axis=1)
    a_sel = (pick // n_b).astype(np.int64)
    b_sel = (pick % n_b).astype(np.int64)
    if not np.all(np.isfinite(flat[np.arange(n_v), pick])):
        return 1, a_sel, b_sel, -1, -1, -1, 1.0, _INF, 0.0

    def best_exchange(v, down):
        cur_r = res[a_sel[v], b_sel[v]]
        cur_c = cost[v, a_sel[v], b_sel[v]]
        if down:
            mask = res < cur_r
            idx = n_b - 1 - np.argmax(mask[:, ::-1], axis=1)
        else:
            mask = res > cur_r
            idx = np.argmax(mask, axis=1)
        valid = mask.any(axis=1)
        rows = np.arange(n_a)
        dr = np.abs(res[rows, idx] - cur_r)
        with np.errstate(invalid="ignore", divide="ignore"):
            rates = (cost[v, rows, idx] - cur_c) / dr
        rates[~valid] = _INF
        a = int(np.argmin(rates))
        return float(rates[a]), a, int(idx[a])

    total_r = float(res[a_sel, b_sel].sum())
    frac_v = frac_a = frac_b = -1
    frac_w = 1.0
    if not (r_lo <= total_r <= r_hi):
        down = total_r > r_hi
        target = r_hi if down else r_lo
        ex = [best_exchange(v, down) for v in range(n_v)]
        rates = np.array([e[0] for e in ex])
        while True:
            vstar = int(np.argmin(rates))
            if rates[vstar] == _INF:
                return 1, a_sel, b_sel, -1, -1, -1, 1.0, _INF, total_r
            _, na, nb = ex[vstar]
            old_r = res[a_sel[vstar], b_sel[vstar]]
            delta = abs(res[na, nb] - old_r)
            remaining = abs(total_r - target)
            if delta <= remaining:
                a_sel[vstar] = na
                b_sel[vstar] = nb
                total_r += -delta if down else delta
                if (down and total_r <= r_hi) or (not down and total_r >= r_lo):
                    break
                ex[vstar] = best_exchange(vstar, down)
                rates[vstar] = ex[vstar][0]
            else:
                frac_v, frac_a, frac_b = vstar, na, nb
                frac_w = 1.0 - remaining / delta
                total_r = target
                break

    obj = float(cost[np.arange(n_v), a_sel, b_sel].sum())
    if frac_v >= 0:
        obj += (1.0 - frac_w) * float(
            cost[frac_v, frac_a, frac_b] - cost[frac_v, a_sel[frac_v], b_sel[frac_v]]
        )
    return 0, a_sel, b_sel, frac_v, frac_a, frac_b, frac_w, obj, total_r


# ---------------------------------------------------------------------------
# exact integral assignment under an integer resource window (DP)
# ---------------------------------------------------------------------------


def _assign_dp_loops(cost, items, r_lo, r_hi):
    n_v, n_a, n_b = cost.shape
    width = r_hi + 1
    f = np.full((n_v + 1, width), _INF)
    f[0, 0] = 0.0
    ch_a = np.full((n_v, width), -1, np.int32)
    ch_b = np.full((n_v, width), -1, np.int32)
    for v in range(n_v):
        for a in range(n_a):
            for b in range(n_b):
                c = cost[v, a, b]
                if c == _INF:
                    continue
                w = items[a, b]
                if w >= width:
                    continue
                for r in range(width - w):
                    base = f[v, r]
                    if base == _INF:
                        continue
                    cand = base + c
                    if cand < f[v + 1, r + w]:
                        f[v + 1, r + w] = cand
                        ch_a[v, r + w] = a
                        ch_b[v, r + w] = b
    best_r = -1
    best = _INF
    for r in range(r_lo, width):
        if f[n_v, r] < best:
            best = f[n_v, r]
            best_r = r
    a_sel = np.full(n_v, -1, np.int64)
    b_sel = np.full(n_v, -1, np.int64)
    if best_r < 0:
        return 1, a_sel, b_sel, _INF, 0
    r = best_r
    for v in range(n_v - 1, -1, -1):
        a = ch_a[v, r]
        b = ch_b[v, r]
        a_sel[v] = a
        b_sel[v] = b
        r -= items[a, b]
    return 0, a_sel, b_sel, best, best_r


def _assign_dp_numpy(cost, items, r_lo, r_hi):
    n_v, n_a, n_b = cost.shape
    width = r_hi + 1
    f = np.full(width, _INF)
    f[0] = 0.0
    ch_a = np.full((n_v, width), -1, np.int32)
    ch_b = np.full((n_v, width), -1, np.int32)
    for v in range(n_v):
        nxt = np.full(width, _INF)
        for a in range(n_a):
            for b in range(n_b):
                c = cost[v, a, b]
                if not np.isfinite(c):
                    continue
                w = int(items[a, b])
                if w >= width:
                    continue
                cand = f[: width - w] + c
                seg = nxt[w:]
                better = cand < seg
                if better.any():
                    seg[better] = cand[better]
                    ch_a[v, w:][better] = a
                    ch_b[v, w:][better] = b
        f = nxt
    a_sel = np.full(n_v, -1, np.int64)
    b_sel = np.full(n_v, -1, np.int64)
    tail = f[r_lo:]
    if not np.isfinite(tail).any():
        return 1, a_sel, b_sel, _INF, 0
    best_r = r_lo + int(np.argmin(tail))
    best = float(f[best_r])
    r = best_r
    for v in range(n_v - 1, -1, -1):
        a = int(ch_a[v, r])
        b = int(ch_b[v, r])
        a_sel[v] = a
        b_sel[v] = b
        r -= int(items[a, b])
    return 0, a_sel, b_sel, best, best_r


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

LOOP_IMPLS = {
    "profit_curves": _profit_curves_loops,
    "trajectory_yields": _trajectory_yields_loops,
    "greedy_relax": _greedy_relax_loops,
    "assign_min_cost_dp": _assign_dp_loops,
}

NUMPY_IMPLS = {
    "profit_curves": _profit_curves_numpy,
    "trajectory_yields": _trajectory_yields_numpy,
    "greedy_relax": _greedy_relax_numpy,
    "assign_min_cost_dp": _assign_dp_numpy,
}


_JITTED: dict | None = None


def jit_loop_impls() -> dict:
    """Compile the loop implementations with numba (requires numba)."""
    global _JITTED, _greedy_best_exchange
    if not HAS_NUMBA:  # pragma: no cover - only without numba installed
        raise RuntimeError("numba is not installed")
    if _JITTED is None:
        # rebind the helper so the jitted relax loop resolves to jitted code;
        # the plain-python version in LOOP_IMPLS keeps working through the
        # dispatcher
        if not isinstance(_greedy_best_exchange, numba.core.dispatcher.Dispatcher):
            _greedy_best_exchange = numba.njit(cache=True)(_greedy_best_exchange)
        _JITTED = {name: numba.njit(cache=True)(fn) for name, fn in LOOP_IMPLS.items()}
    return _JITTED


_ACTIVE = jit_loop_impls() if USE_NUMBA else NUMPY_IMPLS


def profit_curves(demand: np.ndarray, weights: np.ndarray, n_levels: int) -> np.ndarray:
    """Per-cell discounted yield curves over supply levels 0..n_levels-1.

    demand: (periods, branches, sizes) demand along a fixed price path;
    weights: (periods,) discount factor times price.
    """
    demand = np.ascontiguousarray(demand, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    return _ACTIVE["profit_curves"](demand, weights, int(n_levels))


def trajectory_yields(
    supply: np.ndarray, demand: np.ndarray, price_idx: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Discounted yield of a fixed supply under each schedule.

    supply: (branches, sizes); demand: (periods, prices, branches, sizes);
    price_idx, weights: (schedules, periods).
    """
    supply = np.ascontiguousarray(supply, dtype=np.float64)
    demand = np.ascontiguousarray(demand, dtype=np.float64)
    price_idx = np.ascontiguousarray(price_idx, dtype=np.int64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    return _ACTIVE["trajectory_yields"](supply, demand, price_idx, weights)


def greedy_relax(cost: np.ndarray, resource: np.ndarray, r_lo: float, r_hi: float):
    """Greedy-exchange solution of the relaxed one-resource assignment problem."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    resource = np.ascontiguousarray(resource, dtype=np.float64)
    return _ACTIVE["greedy_relax"](cost, resource, float(r_lo), float(r_hi))


def assign_min_cost_dp(cost: np.ndarray, items: np.ndarray, r_lo: int, r_hi: int):
    """Exact integral assignment with total item count in [r_lo, r_hi]."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    items = np.ascontiguousarray(items, dtype=np.int64)
    return _ACTIVE["assign_min_cost_dp"](cost, items, int(r_lo), int(r_hi))
