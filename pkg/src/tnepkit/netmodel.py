"""Network domain types and investment-cost functions.

All electrical quantities are per-unit on the case's MVA base.  Costs are
raw numbers in the case file's declared currency unit (e.g. 1e3 US$ for
the 6-bus system); the only unit conversion done here is per-unit ->
kvar through the MVA base when pricing reactive sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Reactive sizes below this threshold count as "no device installed":
# no fixed cost is charged and no injection is applied.
Q_EPS = 1e-6


class StructuralError(ValueError):
    """Raised when a plan or case references unknown ids or is malformed."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str  # "slack" | "pv" | "pq"
    p_demand: float = 0.0
    q_demand: float = 0.0
    v_setpoint: float = 1.0  # pv/slack only
    v_min: float = 0.95
    v_max: float = 1.05


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    participation: float = 1.0


@dataclass(frozen=True)
class Corridor:
    """Right of way holding identical circuits between two buses."""

    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float  # total line charging per circuit
    rating: float  # per-circuit apparent-power limit, p.u.
    circuit_cost: float
    existing: int = 0
    max_new: int = 0


@dataclass(frozen=True)
class ReactiveCandidate:
    bus: int
    fixed_cost: float
    variable_cost: float  # per kvar, in currency units
    q_max: float


@dataclass(frozen=True)
class HorizonConfig:
    t_years: int
    discount: tuple[float, ...]
    load_scale: tuple[float, ...] = ()
    gen_scale: tuple[float, ...] = ()

    def __post_init__(self):
        if self.t_years < 1:
            raise StructuralError("t_years must be >= 1")
        if len(self.discount) != self.t_years:
            raise StructuralError("discount length must equal t_years")
        if any(not (0.0 < d <= 1.0) for d in self.discount):
            raise StructuralError("discount factors must lie in (0, 1]")
        if self.load_scale and len(self.load_scale) != self.t_years:
            raise StructuralError("load_scale length must equal t_years")
        if self.gen_scale and len(self.gen_scale) != self.t_years:
            raise StructuralError("gen_scale length must equal t_years")


@dataclass(frozen=True)
class Case:
    """Immutable network description assembled by caseio.load_case."""

    name: str
    base_mva: float
    currency_unit: str
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    corridors: tuple[Corridor, ...]
    reactive_candidates: tuple[ReactiveCandidate, ...]
    v_min: float = 0.95
    v_max: float = 1.05
    l_min: float = 0.0
    l_max: float = 0.45
    horizon: HorizonConfig | None = None
    generation_plan: dict = field(default_factory=dict)
    penalty_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        slacks = [b for b in self.buses if b.kind == "slack"]
        if len(slacks) != 1:
            raise StructuralError("exactly one slack bus required, found %d" % len(slacks))
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise StructuralError("duplicate bus ids")
        bus_by_id = {b.id: b for b in self.buses}
        for b in self.buses:
            if b.kind == "pq" and (b.p_demand < 0 or b.q_demand < 0):
                raise StructuralError("pq bus %d has negative demand" % b.id)
            if not (0.0 < b.v_min < b.v_max):
                raise StructuralError("bus %d has invalid voltage bounds" % b.id)
        cids = [c.id for c in self.corridors]
        if len(set(cids)) != len(cids):
            raise StructuralError("duplicate corridor ids")
        for c in self.corridors:
            for end in (c.from_bus, c.to_bus):
                if end not in bus_by_id:
                    raise StructuralError("corridor %d references unknown bus %d" % (c.id, end))
            if c.x <= 0 or c.rating <= 0 or c.existing < 0 or c.max_new < 0:
                raise StructuralError("corridor %d has invalid parameters" % c.id)
        for g in self.generators:
            if g.bus not in bus_by_id:
                raise StructuralError("generator references unknown bus %d" % g.bus)
            if bus_by_id[g.bus].kind not in ("pv", "slack"):
                raise StructuralError("generator bus %d must be pv or slack" % g.bus)
            if g.p_min > g.p_max or g.q_min > g.q_max:
                raise StructuralError("generator at bus %d has inverted limits" % g.bus)
        for rc in self.reactive_candidates:
            if rc.bus not in bus_by_id:
                raise StructuralError("reactive candidate references unknown bus %d" % rc.bus)
            if bus_by_id[rc.bus].kind != "pq":
                raise StructuralError("reactive candidate bus %d must be pq" % rc.bus)
            if rc.q_max < 0:
                raise StructuralError("reactive candidate at bus %d has q_max < 0" % rc.bus)

    # -- lookups used throughout; tuples keep the case hashable/immutable --

    @property
    def slack_bus(self) -> int:
        return next(b.id for b in self.buses if b.kind == "slack")

    def bus(self, bus_id: int) -> Bus:
        try:
            return next(b for b in self.buses if b.id == bus_id)
        except StopIteration:
            raise StructuralError("unknown bus id %d" % bus_id) from None

    def corridor(self, corridor_id: int) -> Corridor:
        try:
            return next(c for c in self.corridors if c.id == corridor_id)
        except StopIteration:
            raise StructuralError("unknown corridor id %d" % corridor_id) from None

    def candidate(self, bus_id: int) -> ReactiveCandidate:
        try:
            return next(rc for rc in self.reactive_candidates if rc.bus == bus_id)
        except StopIteration:
            raise StructuralError("no reactive candidate at bus %d" % bus_id) from None


@dataclass(frozen=True)
class ExpansionPlan:
    """Integer circuit additions per corridor plus reactive sizes per bus."""

    additions: dict = field(default_factory=dict)  # corridor id -> n_l
    reactive: dict = field(default_factory=dict)  # pq bus id -> q_reac, p.u.

    def occupied_corridor_count(self) -> int:
        return sum(1 for n in self.additions.values() if n >= 1)

    def validate(self, case: Case) -> None:
        for cid, n in self.additions.items():
            corr = case.corridor(cid)
            if not (0 <= n <= corr.max_new):
                raise StructuralError(
                    "corridor %d additions %d outside [0, %d]" % (cid, n, corr.max_new)
                )
        for bus_id, q in self.reactive.items():
            cand = case.candidate(bus_id)
            if not (0.0 <= q <= cand.q_max + 1e-12):
                raise StructuralError("reactive size at bus %d outside bounds" % bus_id)


@dataclass(frozen=True)
class DynamicPlan:
    """Ordered per-year increments; cumulative plans are prefix sums.

    Increments are non-negative by construction, so cumulative circuit
    counts and reactive sizes never decrease from one year to the next.
    """

    per_year: tuple[ExpansionPlan, ...]

    def cumulative(self, year: int) -> ExpansionPlan:
        """Plan in force during `year` (1-based): sum of increments <= year."""
        if not (1 <= year <= len(self.per_year)):
            raise StructuralError("year %d outside horizon" % year)
        additions: dict = {}
        reactive: dict = {}
        for inc in self.per_year[:year]:
            for cid, n in inc.additions.items():
                additions[cid] = additions.get(cid, 0) + n
            for bus_id, q in inc.reactive.items():
                reactive[bus_id] = reactive.get(bus_id, 0.0) + q
        return ExpansionPlan(additions=additions, reactive=reactive)


@dataclass(frozen=True)
class CostBreakdown:
    v0: float = 0.0
    v1: float = 0.0
    v: float = 0.0
    v_dym: float = 0.0
    per_year: tuple[float, ...] = ()


def line_cost(plan: ExpansionPlan, case: Case) -> float:
    """Total circuit-addition cost: sum over corridors of n_l * cost."""
    total = 0.0
    for cid, n in plan.additions.items():
        total += n * case.corridor(cid).circuit_cost
    return total


def kvar(q_pu: float, base_mva: float) -> float:
    return q_pu * base_mva * 1000.0


def reactive_cost(plan: ExpansionPlan, case: Case) -> float:
    """Reactive-source cost: fixed + variable per kvar, only where q > Q_EPS."""
    total = 0.0
    for bus_id, q in plan.reactive.items():
        if q > Q_EPS:
            cand = case.candidate(bus_id)
            total += cand.fixed_cost + cand.variable_cost * kvar(q, case.base_mva)
    return total


def total_cost(plan: ExpansionPlan, case: Case) -> CostBreakdown:
    v0 = line_cost(plan, case)
    v1 = reactive_cost(plan, case)
    return CostBreakdown(v0=v0, v1=v1, v=v0 + v1)


def yearly_costs(dyn: DynamicPlan, case: Case) -> list[CostBreakdown]:
    """Cost of each year's increments.

    Lines are priced on the circuits added that year.  Reactive sources
    pay the variable cost on the capacity added that year; the fixed cost
    is charged once, in the year the device first activates (the binary
    installation indicator never switches back off).
    """
    out = []
    active: set = set()
    for inc in dyn.per_year:
        v0 = line_cost(inc, case)
        v1 = 0.0
        for bus_id, q in inc.reactive.items():
            if q > Q_EPS:
                cand = case.candidate(bus_id)
                v1 += cand.variable_cost * kvar(q, case.base_mva)
                if bus_id not in active:
                    v1 += cand.fixed_cost
                    active.add(bus_id)
        out.append(CostBreakdown(v0=v0, v1=v1, v=v0 + v1))
    return out


def discounted_cost(dyn: DynamicPlan, horizon: HorizonConfig, case: Case) -> CostBreakdown:
    """Horizon investment cost referred to the first year."""
    if len(dyn.per_year) != horizon.t_years:
        raise StructuralError(
            "plan covers %d years, horizon has %d" % (len(dyn.per_year), horizon.t_years)
        )
    per_year = yearly_costs(dyn, case)
    v_dym = sum(d * c.v for d, c in zip(horizon.discount, per_year))
    v0 = sum(c.v0 for c in per_year)
    v1 = sum(c.v1 for c in per_year)
    return CostBreakdown(
        v0=v0, v1=v1, v=v0 + v1, v_dym=v_dym, per_year=tuple(c.v for c in per_year)
    )
