"""Modified objective assembly: investment cost plus penalty mass.

Every constraint violation, islanding event, non-convergence and
heuristic-filter rejection folds into the objective value M; evaluation
itself never throws.  M = v + eta * E_g + H, where H carries the
quadratic operating-constraint penalties (and the fixed infeasibility
mass, under its own class key).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import netmodel
from .acpf import Controls, build_admittance, l_index, solve_ac
from .dcpf import DcSystem, IslandingError, slack_component
from .netmodel import Case, DynamicPlan, ExpansionPlan, total_cost, yearly_costs
from .security import contingency_list, corrective_dispatch, derated_limit

PENALTY_CLASSES = (
    "v_bound",
    "flow_bound",
    "qgen_bound",
    "pgen_bound",
    "qreac_bound",
    "l_index_bound",
    "infeasible",
)

# absolute slack when testing "within bounds", so solver noise is not penalized
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class PenaltyConfig:
    eta: float
    kappa: dict
    infeasible_penalty: float

    @classmethod
    def for_case(cls, case: Case) -> "PenaltyConfig":
        """Defaults scaled so a representative violation costs a few times
        the fixture's optimal objective; overridable from the case file."""
        max_cost = max((c.circuit_cost for c in case.corridors), default=1.0)
        infeasible = 10.0 * max_cost * max(len(case.corridors), 1)
        kappa = {
            "v_bound": 1e5,
            "flow_bound": 1e4,
            "qgen_bound": 1e4,
            "pgen_bound": 1e4,
            "qreac_bound": 1e4,
            "l_index_bound": 1e5,
        }
        eta = 1e4
        ov = case.penalty_overrides
        if ov:
            eta = float(ov.get("eta", eta))
            infeasible = float(ov.get("infeasible_penalty", infeasible))
            for key in kappa:
                if key in ov.get("kappa", {}):
                    kappa[key] = float(ov["kappa"][key])
        return cls(eta=eta, kappa=kappa, infeasible_penalty=infeasible)


@dataclass
class PenaltyBreakdown:
    e_g: float = 0.0
    h: float = 0.0
    per_class: dict = field(default_factory=dict)
    per_state: dict = field(default_factory=dict)
    m: float = 0.0
    filtered: str | None = None
    pf_calls: int = 0

    def add(self, cls: str, state, value: float) -> None:
        if value == 0.0:
            return
        self.h += value
        self.per_class[cls] = self.per_class.get(cls, 0.0) + value
        self.per_state[state] = self.per_state.get(state, 0.0) + value


@dataclass
class EvalMeter:
    """Burden accounting: full evaluations and individual AC solves."""

    ff_n: int = 0
    pf_n: int = 0


@dataclass
class DcStats:
    n_dc_corridors: int
    v0_dc: float
    plan: object = None
    feasible: bool = True


@dataclass
class EvalContext:
    security: bool = False
    gen_mode: str = "dispatch"  # "fixed" | "dispatch"
    filters_on: bool = False
    penalty_cfg: PenaltyConfig | None = None
    dc_stats: DcStats | None = None
    meter: EvalMeter | None = None
    l_max: float | None = None


@dataclass
class StaticCandidate:
    plan: ExpansionPlan
    controls: Controls


@dataclass
class DynamicCandidate:
    plan: DynamicPlan
    controls_per_year: list


@dataclass
class EvalResult:
    breakdown: PenaltyBreakdown
    cost: netmodel.CostBreakdown
    l_per_year: list = field(default_factory=list)

    @property
    def m(self) -> float:
        return self.breakdown.m

    @property
    def fitness(self) -> float:
        return 1.0 / max(self.breakdown.m, 1e-300)


def penalty_term(x: float, x_min: float, x_max: float, kappa: float) -> float:
    """Quadratic penalty outside [x_min, x_max]; magnitude form in the value."""
    if x < x_min - BOUND_TOL:
        return kappa * (abs(x_min) - abs(x)) ** 2
    if x > x_max + BOUND_TOL:
        return kappa * (abs(x) - abs(x_max)) ** 2
    return 0.0


def corridor_band(n_dc_corridors: int) -> tuple[int, int]:
    lo = math.ceil(0.9 * n_dc_corridors)
    hi = math.floor(1.3 * n_dc_corridors)
    return lo, hi


def heuristic_filter(plan: ExpansionPlan, case: Case, dc_stats: DcStats) -> str | None:
    """None if the candidate is worth a power flow, else the rejection reason."""
    lo, hi = corridor_band(dc_stats.n_dc_corridors)
    occupied = plan.occupied_corridor_count()
    if not (lo <= occupied <= hi):
        return "corridor_band"
    if netmodel.line_cost(plan, case) > 2.0 * dc_stats.v0_dc:
        return "cost_cap"
    return None


def _base_controls(case: Case, candidate_controls: Controls, gen_mode: str) -> Controls:
    """Controls for state 0: case-file dispatch in fixed mode, genes otherwise.

    The reactive injections are filled from the plan later, inside the
    state evaluation, so plans and injections can never disagree.
    """
    if gen_mode == "fixed":
        p_gen = {
            bus: p for bus, p in case.generation_plan.items() if bus != case.slack_bus
        }
        v_set = {
            b.id: b.v_setpoint for b in case.buses if b.kind in ("pv", "slack")
        }
        return Controls(p_gen=p_gen, v_set=v_set)
    return candidate_controls


def _gen_bounds_by_bus(case: Case) -> dict:
    bounds = {}
    for g in case.generators:
        pmin, pmax, qmin, qmax = bounds.get(g.bus, (0.0, 0.0, 0.0, 0.0))
        bounds[g.bus] = (pmin + g.p_min, pmax + g.p_max, qmin + g.q_min, qmax + g.q_max)
    return bounds


def _state_penalties(
    bd: PenaltyBreakdown,
    state,
    pf,
    case: Case,
    counts: dict,
    outage,
    cfg: PenaltyConfig,
    controls: Controls,
):
    """Accumulate V, flow, Q_G and P_G penalties for one solved state."""
    kind = {b.id: b.kind for b in case.buses}
    for b in case.buses:
        if kind[b.id] == "pq":
            v = pf.v[pf.index_of[b.id]]
            bd.add("v_bound", state, penalty_term(v, b.v_min, b.v_max, cfg.kappa["v_bound"]))
    for corr in case.corridors:
        nc = counts.get(corr.id, 0)
        if nc == 0:
            continue
        limit = derated_limit(corr, nc, outaged=False)  # counts already derated
        bd.add(
            "flow_bound",
            state,
            penalty_term(pf.s_from[corr.id], 0.0, limit, cfg.kappa["flow_bound"]),
        )
        bd.add(
            "flow_bound",
            state,
            penalty_term(pf.s_to[corr.id], 0.0, limit, cfg.kappa["flow_bound"]),
        )
    bounds = _gen_bounds_by_bus(case)
    slack = case.slack_bus
    for bus, (pmin, pmax, qmin, qmax) in bounds.items():
        qg = pf.q_gen.get(bus, 0.0)
        bd.add("qgen_bound", state, penalty_term(qg, qmin, qmax, cfg.kappa["qgen_bound"]))
        if bus == slack:
            bd.add(
                "pgen_bound",
                state,
                penalty_term(pf.p_slack, pmin, pmax, cfg.kappa["pgen_bound"]),
            )
        else:
            pg = controls.p_gen.get(bus, 0.0)
            bd.add("pgen_bound", state, penalty_term(pg, pmin, pmax, cfg.kappa["pgen_bound"]))


def _evaluate_states(
    bd: PenaltyBreakdown,
    case: Case,
    plan: ExpansionPlan,
    controls: Controls,
    ctx: EvalContext,
    cfg: PenaltyConfig,
    year: int = 1,
):
    """Base plus (optionally) all single-circuit outage states for one year.

    Returns the base-case L-index (nan when the base case failed).
    """
    meter = ctx.meter
    # reactive candidate bound check (genes are clip-repaired; kept for
    # plans arriving from files)
    for rc in case.reactive_candidates:
        q = plan.reactive.get(rc.bus, 0.0)
        bd.add(
            "qreac_bound", ("q", year), penalty_term(q, 0.0, rc.q_max, cfg.kappa["qreac_bound"])
        )

    controls = Controls(
        p_gen=dict(controls.p_gen),
        v_set=dict(controls.v_set),
        q_reac={b: q for b, q in plan.reactive.items() if q > netmodel.Q_EPS},
    )
    counts = {c.id: c.existing + plan.additions.get(c.id, 0) for c in case.corridors}
    # every load or generation bus must sit in the slack component
    required = {b.id for b in case.buses if b.p_demand > 1e-12 or b.q_demand > 1e-12}
    required |= {g.bus for g in case.generators}
    required.add(case.slack_bus)
    connected = slack_component(case, counts)
    if not required <= connected:
        bd.add("infeasible", (year, 0), cfg.infeasible_penalty)
        return float("nan")

    adm = build_admittance(case, plan)
    base_pf = solve_ac(adm, case, controls)
    if meter:
        meter.pf_n += 1
    bd.pf_calls += 1
    if not base_pf.converged:
        bd.e_g += base_pf.max_mismatch**2
        bd.add("infeasible", (year, 0), cfg.infeasible_penalty)
        return float("nan")

    _state_penalties(bd, (year, 0), base_pf, case, counts, None, cfg, controls)
    l_max = ctx.l_max if ctx.l_max is not None else case.l_max
    try:
        l_val = l_index(base_pf, adm, case)
        bd.add(
            "l_index_bound",
            (year, 0),
            penalty_term(l_val, case.l_min, l_max, cfg.kappa["l_index_bound"]),
        )
    except Exception:
        l_val = float("nan")
        bd.add("infeasible", (year, 0), cfg.infeasible_penalty)

    if not ctx.security:
        return l_val

    for cont in contingency_list(case, plan):
        cid = cont.corridor
        k_counts = dict(counts)
        k_counts[cid] -= 1
        if k_counts[cid] == 0 and not required <= slack_component(case, k_counts):
            bd.add("infeasible", (year, cont.k), cfg.infeasible_penalty)
            continue
        k_adm = build_admittance(case, plan, outage=cid)
        pf_k = solve_ac(k_adm, case, controls)
        if meter:
            meter.pf_n += 1
        bd.pf_calls += 1
        used = controls
        if ctx.gen_mode == "dispatch" and pf_k.converged:
            corrected = corrective_dispatch(
                controls, cid, case, ctx.gen_mode, slack_output=pf_k.p_slack
            )
            if corrected is not controls:
                used = corrected
                pf_k = solve_ac(k_adm, case, used)
                if meter:
                    meter.pf_n += 1
                bd.pf_calls += 1
        if not pf_k.converged:
            bd.e_g += pf_k.max_mismatch**2
            bd.add("infeasible", (year, cont.k), cfg.infeasible_penalty)
            continue
        _state_penalties(bd, (year, cont.k), pf_k, case, k_counts, cid, cfg, used)
    return l_val


def evaluate_static(candidate: StaticCandidate, case: Case, ctx: EvalContext) -> EvalResult:
    cfg = ctx.penalty_cfg or PenaltyConfig.for_case(case)
    bd = PenaltyBreakdown()
    cost = total_cost(candidate.plan, case)

    if ctx.filters_on and ctx.dc_stats is not None:
        reason = heuristic_filter(candidate.plan, case, ctx.dc_stats)
        if reason is not None:
            bd.filtered = reason
            bd.add("infeasible", "filter", cfg.infeasible_penalty)
            bd.m = cost.v + bd.h
            return EvalResult(breakdown=bd, cost=cost, l_per_year=[float("nan")])

    if ctx.meter:
        ctx.meter.ff_n += 1
    controls = _base_controls(case, candidate.controls, ctx.gen_mode)
    l_val = _evaluate_states(bd, case, candidate.plan, controls, ctx, cfg)
    bd.m = cost.v + cfg.eta * bd.e_g + bd.h
    return EvalResult(breakdown=bd, cost=cost, l_per_year=[l_val])


def evaluate_dynamic(candidate: DynamicCandidate, case: Case, ctx: EvalContext) -> EvalResult:
    if case.horizon is None:
        raise netmodel.StructuralError("dynamic evaluation requires a horizon")
    horizon = case.horizon
    cfg = ctx.penalty_cfg or PenaltyConfig.for_case(case)
    bd = PenaltyBreakdown()
    cost = netmodel.discounted_cost(candidate.plan, horizon, case)

    if ctx.filters_on and ctx.dc_stats is not None:
        final = candidate.plan.cumulative(horizon.t_years)
        lo, hi = corridor_band(ctx.dc_stats.n_dc_corridors)
        occupied = final.occupied_corridor_count()
        reason = None
        if not (lo <= occupied <= hi):
            reason = "corridor_band"
        else:
            disc_lines = sum(
                d * netmodel.line_cost(inc, case)
                for d, inc in zip(horizon.discount, candidate.plan.per_year)
            )
            if disc_lines > 2.0 * ctx.dc_stats.v0_dc:
                reason = "cost_cap"
        if reason is not None:
            bd.filtered = reason
            bd.add("infeasible", "filter", cfg.infeasible_penalty)
            bd.m = cost.v_dym + bd.h
            return EvalResult(
                breakdown=bd, cost=cost, l_per_year=[float("nan")] * horizon.t_years
            )

    if ctx.meter:
        ctx.meter.ff_n += 1
    l_per_year = []
    for year in range(1, horizon.t_years + 1):
        year_case = scaled_case(case, year)
        cumulative = candidate.plan.cumulative(year)
        controls = _base_controls(
            year_case, candidate.controls_per_year[year - 1], ctx.gen_mode
        )
        l_val = _evaluate_states(bd, year_case, cumulative, controls, ctx, cfg, year=year)
        l_per_year.append(l_val)
    bd.m = cost.v_dym + cfg.eta * bd.e_g + bd.h
    return EvalResult(breakdown=bd, cost=cost, l_per_year=l_per_year)


def scaled_case(case: Case, year: int) -> Case:
    """Case with year-scaled demands and generation limits."""
    h = case.horizon
    if h is None:
        return case
    ls = h.load_scale[year - 1] if h.load_scale else 1.0
    gs = h.gen_scale[year - 1] if h.gen_scale else ls
    if ls == 1.0 and gs == 1.0:
        return case
    buses = tuple(
        netmodel.Bus(
            id=b.id,
            kind=b.kind,
            p_demand=b.p_demand * ls,
            q_demand=b.q_demand * ls,
            v_setpoint=b.v_setpoint,
            v_min=b.v_min,
            v_max=b.v_max,
        )
        for b in case.buses
    )
    gens = tuple(
        netmodel.Generator(
            bus=g.bus,
            p_min=g.p_min,
            p_max=g.p_max * gs,
            q_min=g.q_min,
            q_max=g.q_max,
            participation=g.participation,
        )
        for g in case.generators
    )
    gen_plan = {bus: p * gs for bus, p in case.generation_plan.items()}
    return netmodel.Case(
        name=case.name,
        base_mva=case.base_mva,
        currency_unit=case.currency_unit,
        buses=buses,
        generators=gens,
        corridors=case.corridors,
        reactive_candidates=case.reactive_candidates,
        v_min=case.v_min,
        v_max=case.v_max,
        l_min=case.l_min,
        l_max=case.l_max,
        horizon=case.horizon,
        generation_plan=gen_plan,
        penalty_overrides=case.penalty_overrides,
    )
