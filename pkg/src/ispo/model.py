"""Problem data for the integrated size-and-price optimization problem.

An Instance bundles everything the solvers consume: branches, sizes, the
applicable pre-pack lot-types, the multiplicity choices, the price
ladder, demand scenarios with probabilities, and all cost parameters.
Instances are validated on construction and frozen afterwards, so they
can be shared freely; every operation in this module is a pure function.

Demand is a dense tensor indexed ``[scenario][period][price][branch][size]``.
The salvage cell (last period at the salvage price) may carry the
unbounded sentinel ``inf``, meaning all remaining stock clears there.

Money values are carried as floats internally (comparisons at 1e-9) and
serialized with a fixed scale of four decimals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .trajectory import ScenarioTrajectoryMap, check_trajectory

__all__ = [
    "LotType",
    "Instance",
    "LotAssignment",
    "GeneratorConfig",
    "validate_instance",
    "validate_assignment",
    "inventory_from_assignment",
    "ispo_objective",
    "generate_instance",
    "instance_from_dict",
    "instance_to_dict",
    "parametric_handling",
]

MONEY_DECIMALS = 4


@dataclass(frozen=True)
class LotType:
    """A pre-packed size assortment: pieces per size in one lot."""

    counts_per_size: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts_per_size)

    def __str__(self) -> str:
        return "(" + ",".join(str(c) for c in self.counts_per_size) + ")"


@dataclass(frozen=True)
class Instance:
    branches: tuple
    sizes: tuple
    lot_types: tuple[LotType, ...]
    multiplicities: tuple[int, ...]
    max_lot_types: int
    supply_lower: int
    supply_upper: int
    k_max: int
    k_observ: int
    prices: tuple[float, ...]
    scenario_probs: tuple[float, ...]
    demand: np.ndarray  # (scenarios, periods, prices, branches, sizes)
    handling: np.ndarray  # (branches, lot_types, multiplicities)
    opening_costs: tuple[float, ...]
    markdown_costs: tuple[float, ...]
    discount_rate: float

    def __post_init__(self):
        demand = np.ascontiguousarray(self.demand, dtype=np.float64)
        handling = np.ascontiguousarray(self.handling, dtype=np.float64)
        demand.setflags(write=False)
        handling.setflags(write=False)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "handling", handling)
        _check_instance(self)

    # -- sizes of the index sets -------------------------------------------------
    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def n_sizes(self) -> int:
        return len(self.sizes)

    @property
    def n_lot_types(self) -> int:
        return len(self.lot_types)

    @property
    def n_scenarios(self) -> int:
        return len(self.scenario_probs)

    @property
    def n_prices(self) -> int:
        return len(self.prices)

    @property
    def p_max(self) -> int:
        return len(self.prices) - 1

    @property
    def n_periods(self) -> int:
        return self.k_max + 1

    # -- derived tables ----------------------------------------------------------
    @cached_property
    def discount_factors(self) -> np.ndarray:
        out = np.exp(-self.discount_rate * np.arange(self.n_periods, dtype=np.float64))
        out.setflags(write=False)
        return out

    @cached_property
    def lot_totals(self) -> np.ndarray:
        out = np.array([lt.total for lt in self.lot_types], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def lot_matrix(self) -> np.ndarray:
        """Piece counts as an array (lot_types, sizes)."""
        out = np.array([lt.counts_per_size for lt in self.lot_types], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def max_level_per_size(self) -> np.ndarray:
        """Largest achievable cell supply per size: max multiplicity times max pieces."""
        out = max(self.multiplicities) * self.lot_matrix.max(axis=0)
        out.setflags(write=False)
        return out

    @cached_property
    def expected_demand(self) -> np.ndarray:
        """Probability-weighted demand tensor (periods, prices, branches, sizes)."""
        probs = np.asarray(self.scenario_probs)
        out = np.einsum("e,ekpbs->kpbs", probs, self.demand)
        out.setflags(write=False)
        return out

    def multiplicity_index(self, m: int) -> int:
        try:
            return self.multiplicities.index(m)
        except ValueError:
            raise ValidationError(f"multiplicity {m} not in multiplicity set") from None

    def handling_cost(self, b: int, lot: int, m: int) -> float:
        return float(self.handling[b, lot, self.multiplicity_index(m)])

    def opening_cost_total(self, n_used: int) -> float:
        return float(sum(self.opening_costs[:n_used]))

    def trajectory_space(self):
        from .trajectory import enumerate_trajectories

        return enumerate_trajectories(self.k_max, self.p_max, self.k_observ)


def _check_instance(inst: Instance) -> None:
    if len(inst.branches) == 0:
        raise ValidationError("no branches")
    if len(set(inst.branches)) != len(inst.branches):
        raise ValidationError("duplicate branch identifiers")
    if len(inst.sizes) == 0:
        raise ValidationError("no sizes")
    if len(set(inst.sizes)) != len(inst.sizes):
        raise ValidationError("duplicate size identifiers")
    if len(inst.lot_types) == 0:
        raise ValidationError("no lot-types")
    for i, lt in enumerate(inst.lot_types):
        if len(lt.counts_per_size) != len(inst.sizes):
            raise ValidationError(
                f"lot-type {i} has {len(lt.counts_per_size)} size entries, expected {len(inst.sizes)}"
            )
        if any(c < 0 for c in lt.counts_per_size):
            raise ValidationError(f"lot-type {i} has negative piece counts")
        if lt.total < 1:
            raise ValidationError(f"lot-type {i} has no pieces")
    if len(inst.multiplicities) == 0:
        raise ValidationError("no multiplicities")
    if any(m <= 0 for m in inst.multiplicities):
        raise ValidationError("multiplicities must be positive")
    if tuple(sorted(set(inst.multiplicities))) != inst.multiplicities:
        raise ValidationError("multiplicities must be strictly increasing and unique")
    if inst.max_lot_types < 1:
        raise ValidationError(f"max_lot_types {inst.max_lot_types} < 1")
    if inst.supply_lower < 0 or inst.supply_lower > inst.supply_upper:
        raise ValidationError(
            f"supply bounds [{inst.supply_lower}, {inst.supply_upper}] invalid"
        )
    if inst.k_max < 2:
        raise ValidationError(f"k_max {inst.k_max} < 2")
    if not 1 <= inst.k_observ < inst.k_max:
        raise ValidationError(f"k_observ {inst.k_observ} outside 1..{inst.k_max - 1}")
    if len(inst.prices) < 2:
        raise ValidationError("price ladder needs at least start and salvage price")
    for a, b in zip(inst.prices, inst.prices[1:]):
        if not b < a:
            raise ValidationError("prices not strictly decreasing")
    if inst.prices[-1] < 0:
        raise ValidationError("salvage price negative")
    probs = inst.scenario_probs
    if len(probs) == 0:
        raise ValidationError("no scenarios")
    if any(p < 0 for p in probs):
        raise ValidationError("negative scenario probability")
    total = sum(probs)
    if abs(total - 1.0) > 1e-12:
        raise ValidationError(f"probabilities sum {total:.10g}, expected 1")
    shape = (
        inst.n_scenarios,
        inst.n_periods,
        inst.n_prices,
        inst.n_branches,
        inst.n_sizes,
    )
    if inst.demand.shape != shape:
        raise ValidationError(f"demand tensor shape {inst.demand.shape}, expected {shape}")
    if np.isnan(inst.demand).any():
        raise ValidationError("demand contains NaN")
    if (inst.demand < 0).any():
        raise ValidationError("demand contains negative values")
    inf_mask = np.isinf(inst.demand)
    if inf_mask.any():
        allowed = np.zeros_like(inf_mask)
        allowed[:, inst.k_max, inst.p_max, :, :] = True
        if (inf_mask & ~allowed).any():
            raise ValidationError(
                "demand unbounded outside the salvage period/price cell"
            )
    hshape = (inst.n_branches, inst.n_lot_types, len(inst.multiplicities))
    if inst.handling.shape != hshape:
        raise ValidationError(f"handling table shape {inst.handling.shape}, expected {hshape}")
    if not np.isfinite(inst.handling).all():
        raise ValidationError("handling costs not finite")
    if (inst.handling < 0).any():
        raise ValidationError("handling costs negative")
    if len(inst.opening_costs) != inst.max_lot_types:
        raise ValidationError(
            f"{len(inst.opening_costs)} opening costs, expected {inst.max_lot_types}"
        )
    if any(c < 0 for c in inst.opening_costs):
        raise ValidationError("opening costs negative")
    if len(inst.markdown_costs) != inst.n_periods:
        raise ValidationError(
            f"{len(inst.markdown_costs)} markdown costs, expected {inst.n_periods}"
        )
    if any(c < 0 for c in inst.markdown_costs):
        raise ValidationError("markdown costs negative")
    if inst.discount_rate < 0:
        raise ValidationError("discount rate negative")


def validate_instance(raw) -> Instance:
    """Build/validate an instance from a dict or re-check an existing one."""
    if isinstance(raw, Instance):
        _check_instance(raw)
        return raw
    if isinstance(raw, dict):
        return instance_from_dict(raw)
    raise ValidationError(f"cannot validate object of type {type(raw).__name__}")


# ---------------------------------------------------------------------------
# assignments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LotAssignment:
    """Per-branch lot-type index and multiplicity value."""

    lots: tuple[int, ...]
    mults: tuple[int, ...]

    def used_lot_types(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.lots)))

    def key(self) -> tuple:
        return (self.lots, self.mults)


def validate_assignment(instance: Instance, assignment: LotAssignment) -> None:
    n_b = instance.n_branches
    if len(assignment.lots) != n_b or len(assignment.mults) != n_b:
        raise ValidationError(
            f"assignment covers {len(assignment.lots)} branches, expected {n_b}"
        )
    for b, (l, m) in enumerate(zip(assignment.lots, assignment.mults)):
        if not 0 <= l < instance.n_lot_types:
            raise ValidationError(f"branch {b}: unknown lot-type index {l}")
        if m not in instance.multiplicities:
            raise ValidationError(f"branch {b}: multiplicity {m} not in multiplicity set")
    n_used = len(set(assignment.lots))
    if n_used > instance.max_lot_types:
        raise ValidationError(
            f"assignment uses {n_used} lot-types, limit {instance.max_lot_types}"
        )
    total = sum(
        m * instance.lot_types[l].total for l, m in zip(assignment.lots, assignment.mults)
    )
    if not instance.supply_lower <= total <= instance.supply_upper:
        raise ValidationError(
            f"total supply {total} outside [{instance.supply_lower}, {instance.supply_upper}]"
        )


def inventory_from_assignment(
    assignment: LotAssignment, instance: Instance
) -> tuple[np.ndarray, int]:
    """Supply matrix I[b, s] = m(b) * pieces(b, s) and its total."""
    validate_assignment(instance, assignment)
    lots = np.asarray(assignment.lots)
    mults = np.asarray(assignment.mults)
    matrix = mults[:, None] * instance.lot_matrix[lots]
    return matrix, int(matrix.sum())


def ispo_objective(
    assignment: LotAssignment, trajectories: ScenarioTrajectoryMap, instance: Instance
) -> float:
    """Full two-stage objective of a complete decision pair.

    Handling and opening costs are paid up front; each scenario
    contributes its probability-weighted discounted yield minus
    mark-down costs under that scenario's schedule.
    """
    from .salesdyn import simulate_sales

    validate_assignment(instance, assignment)
    if len(trajectories) != instance.n_scenarios:
        raise ValidationError(
            f"trajectory map covers {len(trajectories)} scenarios, expected {instance.n_scenarios}"
        )
    for t in trajectories:
        check_trajectory(t, instance.k_max, instance.p_max, instance.k_observ)
    supply, _ = inventory_from_assignment(assignment, instance)
    value = 0.0
    value -= sum(
        instance.handling_cost(b, l, m)
        for b, (l, m) in enumerate(zip(assignment.lots, assignment.mults))
    )
    value -= instance.opening_cost_total(len(set(assignment.lots)))
    for e, prob in enumerate(instance.scenario_probs):
        result = simulate_sales(supply, e, trajectories[e], instance)
        value += prob * result.value
    return value


# ---------------------------------------------------------------------------
# synthetic instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    branches: int = 10
    sizes: int = 3
    lot_types: int = 8
    multiplicities: tuple[int, ...] = (1, 2, 3)
    max_lot_types: int = 4
    k_max: int = 13
    k_observ: int = 2
    num_prices: int = 5
    start_price: float = 10.0
    salvage_price: float = 2.0
    scenario_multipliers: tuple[float, ...] = (0.7, 1.0, 1.3)
    scenario_probs: tuple[float, ...] | None = None  # None = uniform
    demand_scale: float = 1.0
    price_sensitivity: float = 1.0
    season_decay: float = 0.12
    unbounded_salvage: bool = True
    supply_cover: float = 0.75  # target total supply as a share of season demand
    acquisition_per_item: float = 1.0
    pick_cost: float = 0.0545
    opening_cost_first: float = 100.0
    opening_cost_rest: float = 50.0
    markdown_cost: float = 0.0
    discount_rate: float = 0.000974868


def parametric_handling(
    instance_shape: tuple[int, int],
    lot_types: list[LotType],
    multiplicities: tuple[int, ...],
    acquisition_per_item: float,
    pick_cost: float,
    per_item: bool = True,
) -> np.ndarray:
    """Handling-cost table from the parametric form acquisition + m * pick.

    With per_item=True the acquisition part scales with delivered items
    (acquisition_per_item * m * lot size); with per_item=False it is a
    flat per-branch charge.  Both readings of the parametric convention
    are supported; the table form is canonical either way.
    """
    n_b, _ = instance_shape
    totals = np.array([lt.total for lt in lot_types], dtype=np.float64)
    mults = np.asarray(multiplicities, dtype=np.float64)
    if per_item:
        acq = acquisition_per_item * totals[:, None] * mults[None, :]
    else:
        acq = np.full((len(lot_types), len(mults)), acquisition_per_item)
    table = acq + pick_cost * mults[None, :]
    table = np.round(table, MONEY_DECIMALS)
    return np.broadcast_to(table, (n_b,) + table.shape).copy()


def _achievable_totals(per_branch_values: list[int], n_branches: int) -> "int":
    # bitset of reachable totals: bit i set <=> some assignment sums to i
    reach = 1
    for _ in range(n_branches):
        nxt = 0
        for v in per_branch_values:
            nxt |= reach << v
        reach = nxt
    return reach


def generate_instance(config: GeneratorConfig, seed: int) -> Instance:
    """Deterministic synthetic instance for a (config, seed) pair.

    Scenario demands are exact scalar multiples of a nominal tensor;
    demand grows as the price drops; branches share a common size
    profile with branch-specific volume, which keeps a small set of
    lot-types adequate for the whole network.
    """
    rng = np.random.default_rng(seed)
    n_b, n_s, n_l = config.branches, config.sizes, config.lot_types
    branches = tuple(f"b{i:03d}" for i in range(n_b))
    sizes = tuple(f"s{i}" for i in range(n_s))

    size_profile = rng.dirichlet(np.full(n_s, 4.0)) * n_s  # mean 1 per size
    lot_types = [LotType((1,) * n_s)]
    seen = {lot_types[0].counts_per_size}
    while len(lot_types) < n_l:
        scale = rng.uniform(0.8, 3.5)
        noise = rng.normal(0.0, 0.35, n_s)
        counts = np.maximum(np.rint(scale * size_profile + noise), 0).astype(int)
        if counts.sum() < 1:
            counts[int(rng.integers(n_s))] = 1
        lt = LotType(tuple(int(c) for c in counts))
        if lt.counts_per_size not in seen:
            seen.add(lt.counts_per_size)
            lot_types.append(lt)

    prices = np.round(
        np.linspace(config.start_price, config.salvage_price, config.num_prices),
        MONEY_DECIMALS,
    )
    if not all(b < a for a, b in zip(prices, prices[1:])):
        raise ValidationError("price ladder degenerate; widen start/salvage spread")

    k = np.arange(config.k_max + 1, dtype=np.float64)
    season = np.exp(-config.season_decay * k)
    branch_w = rng.lognormal(mean=0.0, sigma=0.4, size=n_b)
    jitter = rng.uniform(0.7, 1.3, size=(config.k_max + 1, n_b, n_s))
    base = (
        config.demand_scale
        * season[:, None, None]
        * branch_w[None, :, None]
        * size_profile[None, None, :]
        * jitter
    )
    with np.errstate(divide="ignore"):
        price_pull = (prices[0] / prices) ** config.price_sensitivity
    nominal = base[:, None, :, :] * price_pull[None, :, None, None]

    multipliers = np.asarray(config.scenario_multipliers, dtype=np.float64)
    n_e = len(multipliers)
    demand = multipliers[:, None, None, None, None] * nominal[None, ...]
    if config.unbounded_salvage:
        demand[:, config.k_max, config.num_prices - 1, :, :] = np.inf

    if config.scenario_probs is None:
        probs = tuple(1.0 / n_e for _ in range(n_e))
        probs = probs[:-1] + (1.0 - sum(probs[:-1]),)
    else:
        probs = tuple(config.scenario_probs)

    mults = tuple(config.multiplicities)
    handling = parametric_handling(
        (n_b, n_s), lot_types, mults, config.acquisition_per_item, config.pick_cost
    )

    season_demand = float(np.sum(nominal[:, 0, :, :][np.isfinite(nominal[:, 0, :, :])]))
    target = int(round(config.supply_cover * season_demand))
    per_branch = sorted({m * lt.total for m in mults for lt in lot_types})
    reach = _achievable_totals(per_branch, n_b)
    lo_most = n_b * per_branch[0]
    hi_most = n_b * per_branch[-1]
    target = min(max(target, lo_most), hi_most)
    width = max(per_branch)
    while True:
        lo = max(lo_most, target - width)
        hi = min(hi_most, target + width)
        window = (reach >> lo) & ((1 << (hi - lo + 1)) - 1)
        if window:
            break
        width *= 2

    opening = tuple(
        round(config.opening_cost_first if i == 0 else config.opening_cost_rest, MONEY_DECIMALS)
        for i in range(config.max_lot_types)
    )
    markdown = tuple(
        round(config.markdown_cost, MONEY_DECIMALS) for _ in range(config.k_max + 1)
    )

    return Instance(
        branches=branches,
        sizes=sizes,
        lot_types=tuple(lot_types),
        multiplicities=mults,
        max_lot_types=config.max_lot_types,
        supply_lower=lo,
        supply_upper=hi,
        k_max=config.k_max,
        k_observ=config.k_observ,
        prices=tuple(float(p) for p in prices),
        scenario_probs=probs,
        demand=demand,
        handling=handling,
        opening_costs=opening,
        markdown_costs=markdown,
        discount_rate=config.discount_rate,
    )


# ---------------------------------------------------------------------------
# dict (JSON document) form
# ---------------------------------------------------------------------------


def _demand_to_lists(tensor: np.ndarray):
    def conv(x):
        return "inf" if math.isinf(x) else float(x)

    return [
        [[[conv(v) for v in srow] for srow in brow] for brow in prow] for prow in tensor
    ]


def _demand_from_lists(data) -> np.ndarray:
    def conv(x):
        if isinstance(x, str):
            if x.lower() == "inf":
                return np.inf
            raise ValidationError(f"unrecognized demand entry {x!r}")
        return float(x)

    return np.array(
        [[[[conv(v) for v in srow] for srow in brow] for brow in prow] for prow in data],
        dtype=np.float64,
    )


def instance_to_dict(inst: Instance) -> dict:
    """Serializable document form; money is written at four decimals."""
    money = lambda x: round(float(x), MONEY_DECIMALS)
    return {
        "branches": list(inst.branches),
        "sizes": list(inst.sizes),
        "lot_types": [list(lt.counts_per_size) for lt in inst.lot_types],
        "multiplicities": list(inst.multiplicities),
        "max_lot_types": inst.max_lot_types,
        "supply_bounds": [inst.supply_lower, inst.supply_upper],
        "periods": {"k_max": inst.k_max, "k_observ": inst.k_observ},
        "prices": [money(p) for p in inst.prices],
        "scenarios": [
            {"prob": float(p), "demand": _demand_to_lists(inst.demand[e])}
            for e, p in enumerate(inst.scenario_probs)
        ],
        "costs": {
            "handling": [
                [[money(c) for c in mrow] for mrow in lrow] for lrow in inst.handling
            ],
            "opening": [money(c) for c in inst.opening_costs],
            "markdown": [money(c) for c in inst.markdown_costs],
            "discount_rate": float(inst.discount_rate),
        },
    }


def instance_from_dict(doc: dict) -> Instance:
    try:
        lot_types = tuple(LotType(tuple(int(c) for c in row)) for row in doc["lot_types"])
        mults = tuple(int(m) for m in doc["multiplicities"])
        scen = doc["scenarios"]
        probs = tuple(float(s["prob"]) for s in scen)
        demand = np.stack([_demand_from_lists(s["demand"]) for s in scen], axis=0)
        costs = doc["costs"]
        handling = costs["handling"]
        if isinstance(handling, dict):
            handling = parametric_handling(
                (len(doc["branches"]), len(doc["sizes"])),
                list(lot_types),
                mults,
                float(handling["acquisition_per_item"]),
                float(handling["pick_cost"]),
            )
        else:
            handling = np.array(handling, dtype=np.float64)
        markdown = costs["markdown"]
        k_max = int(doc["periods"]["k_max"])
        if isinstance(markdown, (int, float)):
            markdown = [float(markdown)] * (k_max + 1)
        return Instance(
            branches=tuple(doc["branches"]),
            sizes=tuple(doc["sizes"]),
            lot_types=lot_types,
            multiplicities=mults,
            max_lot_types=int(doc["max_lot_types"]),
            supply_lower=int(doc["supply_bounds"][0]),
            supply_upper=int(doc["supply_bounds"][1]),
            k_max=k_max,
            k_observ=int(doc["periods"]["k_observ"]),
            prices=tuple(float(p) for p in doc["prices"]),
            scenario_probs=probs,
            demand=demand,
            handling=handling,
            opening_costs=tuple(float(c) for c in costs["opening"]),
            markdown_costs=tuple(float(c) for c in markdown),
            discount_rate=float(costs["discount_rate"]),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ValidationError(f"malformed instance document: {exc}") from exc
