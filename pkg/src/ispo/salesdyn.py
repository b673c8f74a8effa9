"""Mean-value sales dynamics and the exact price-stage solver.

For a fixed supply, scenario, and mark-down schedule the dynamics are
closed-form: each period sells the minimum of stock and demand at the
scheduled price, cell by cell.  Stocks are carried as fractional reals
throughout (expected-value book-keeping); nothing is rounded.

The price stage is solved exactly by sweeping every feasible schedule,
independently per scenario.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError
from .model import Instance
from .trajectory import (
    PriceTrajectory,
    ScenarioTrajectoryMap,
    check_trajectory,
    enumerate_trajectories,
)

__all__ = [
    "SimulationResult",
    "PopScenarioResult",
    "PopResult",
    "simulate_sales",
    "solve_pop_exact",
    "branch_size_profit",
    "simulation_to_csv",
]


@dataclass(frozen=True)
class SimulationResult:
    """Per-period stocks, sales, and yields for one (supply, scenario, schedule)."""

    price_indices: tuple[int, ...]
    stock_before: np.ndarray  # (periods, branches, sizes)
    sales: np.ndarray  # (periods, branches, sizes)
    yields: np.ndarray  # (periods, branches, sizes)
    markdown_flags: tuple[bool, ...]
    value: float  # discounted yields minus discounted mark-down costs
    terminal_stock: np.ndarray  # (branches, sizes)


def _check_supply(supply: np.ndarray, instance: Instance) -> np.ndarray:
    supply = np.asarray(supply, dtype=np.float64)
    if supply.shape != (instance.n_branches, instance.n_sizes):
        raise ValidationError(
            f"supply shape {supply.shape}, expected {(instance.n_branches, instance.n_sizes)}"
        )
    if (supply < 0).any():
        raise ValidationError("supply entries negative")
    return supply


def simulate_sales(
    supply: np.ndarray, scenario: int, t: PriceTrajectory, instance: Instance
) -> SimulationResult:
    """Run the deterministic dynamics; sales are min(stock, demand) per cell."""
    supply = _check_supply(supply, instance)
    if not 0 <= scenario < instance.n_scenarios:
        raise ValidationError(f"scenario {scenario} out of range")
    check_trajectory(t, instance.k_max, instance.p_max, instance.k_observ)

    n_k = instance.n_periods
    demand = instance.demand[scenario]
    disc = instance.discount_factors
    prices = instance.prices
    flags = t.markdown_flags()

    stock_before = np.empty((n_k,) + supply.shape)
    sales = np.empty_like(stock_before)
    yields = np.empty_like(stock_before)
    stock = supply.copy()
    value = 0.0
    for k in range(n_k):
        p = t.indices[k]
        stock_before[k] = stock
        sold = np.minimum(stock, demand[k, p])
        sales[k] = sold
        yields[k] = prices[p] * sold
        stock = stock - sold
        value += disc[k] * (float(yields[k].sum()) - instance.markdown_costs[k] * flags[k])
    stock_before.setflags(write=False)
    sales.setflags(write=False)
    yields.setflags(write=False)
    return SimulationResult(
        price_indices=t.indices,
        stock_before=stock_before,
        sales=sales,
        yields=yields,
        markdown_flags=flags,
        value=value,
        terminal_stock=stock,
    )


@dataclass(frozen=True)
class PopScenarioResult:
    trajectory: PriceTrajectory
    value: float


@dataclass(frozen=True)
class PopResult:
    per_scenario: tuple[PopScenarioResult, ...]
    expected_value: float

    @property
    def trajectory_map(self) -> ScenarioTrajectoryMap:
        return ScenarioTrajectoryMap(tuple(r.trajectory for r in self.per_scenario))


def trajectory_tables(instance: Instance, trajectories: list[PriceTrajectory]):
    """Index/weight/markdown-cost tables for a schedule list.

    Returns (price_idx (T, periods) int, weights (T, periods) = discount
    times price, md_costs (T,) = discounted mark-down cost of each
    schedule).
    """
    idx = np.array([t.indices for t in trajectories], dtype=np.int64)
    prices = np.asarray(instance.prices)
    disc = instance.discount_factors
    weights = disc[None, :] * prices[idx]
    flags = np.array([t.markdown_flags() for t in trajectories], dtype=np.float64)
    md = flags @ (disc * np.asarray(instance.markdown_costs))
    return idx, weights, md


def solve_pop_exact(supply: np.ndarray, instance: Instance) -> PopResult:
    """Best schedule per scenario by exhaustive sweep.

    Ties are broken toward the lexicographically smallest price-index
    vector, i.e. the schedule that marks down latest and least.
    """
    supply = _check_supply(supply, instance)
    trajectories = enumerate_trajectories(instance.k_max, instance.p_max, instance.k_observ)
    idx, weights, md = trajectory_tables(instance, trajectories)
    results = []
    expected = 0.0
    for e, prob in enumerate(instance.scenario_probs):
        values = _kernels.trajectory_yields(supply, instance.demand[e], idx, weights) - md
        best = 0
        for t in range(1, len(trajectories)):
            if values[t] > values[best] or (
                values[t] == values[best]
                and trajectories[t].indices < trajectories[best].indices
            ):
                best = t
        results.append(PopScenarioResult(trajectories[best], float(values[best])))
        expected += prob * float(values[best])
    return PopResult(tuple(results), expected)


def branch_size_profit(
    instance: Instance, e: int, t: PriceTrajectory, b: int, s: int, i: float
) -> float:
    """Discounted yield of supplying i items to one branch/size cell."""
    if i < 0:
        raise ValidationError("supply level negative")
    check_trajectory(t, instance.k_max, instance.p_max, instance.k_observ)
    stock = float(i)
    total = 0.0
    for k in range(instance.n_periods):
        p = t.indices[k]
        sold = min(stock, float(instance.demand[e, k, p, b, s]))
        total += instance.discount_factors[k] * instance.prices[p] * sold
        stock -= sold
    return total


def simulation_to_csv(result: SimulationResult, instance: Instance, path) -> None:
    """Dump one simulation as rows (period, branch, size, price, sales, stock, yield)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "branch", "size", "price", "sales", "stock", "yield"])
        for k in range(instance.n_periods):
            p = result.price_indices[k]
            for b, branch in enumerate(instance.branches):
                for s, size in enumerate(instance.sizes):
                    writer.writerow(
                        [
                            k,
                            branch,
                            size,
                            instance.prices[p],
                            f"{result.sales[k, b, s]:.6f}",
                            f"{result.stock_before[k, b, s]:.6f}",
                            f"{result.yields[k, b, s]:.6f}",
                        ]
                    )
