"""Linearized B-theta power flow with candidate-line compensation.

Stage-1 planning uses these solves: angles from the reduced susceptance
matrix, corridor real-power flows, and a fitness that folds overload and
islanding into penalties.  Outage solves reuse the base factorization
through a rank-1 compensation update; results are contractually identical
to a full re-solve within 1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .netmodel import Case, ExpansionPlan, StructuralError
from .acpf import circuits_in_service


class IslandingError(RuntimeError):
    """Load or generation separated from the slack component."""


@dataclass
class DcSolution:
    theta: np.ndarray
    bus_ids: list
    index_of: dict
    flow: dict  # corridor id -> aggregate real power, from -> to
    slack_injection: float


def _components(bus_ids, edges):
    """Connected components via union-find over (from, to) bus-id edges."""
    parent = {b: b for b in bus_ids}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return {b: find(b) for b in bus_ids}


def slack_component(case: Case, counts: dict) -> set:
    edges = [(c.from_bus, c.to_bus) for c in case.corridors if counts.get(c.id, 0) >= 1]
    comp = _components([b.id for b in case.buses], edges)
    slack_root = comp[case.slack_bus]
    return {b for b, root in comp.items() if root == slack_root}


def connectivity_check(case: Case, counts: dict, injections: dict) -> set:
    """Slack-reachable buses; raises if any net injection is stranded."""
    connected = slack_component(case, counts)
    for bus_id, inj in injections.items():
        if abs(inj) > 1e-12 and bus_id not in connected:
            raise IslandingError("bus %d with net injection is islanded" % bus_id)
    return connected


class DcSystem:
    """Reduced B matrix for one plan, factored once; outages via compensation.

    The system is restricted to the slack component; buses outside it keep
    theta = 0 and their corridors carry zero flow (the connectivity check
    guarantees they have no injections before any solve is accepted).
    """

    def __init__(self, case: Case, plan: ExpansionPlan = None, counts: dict = None):
        self.case = case
        self.counts = counts if counts is not None else circuits_in_service(
            case, plan if plan is not None else ExpansionPlan()
        )
        self.bus_ids = [b.id for b in case.buses]
        self.index_of = {bid: i for i, bid in enumerate(self.bus_ids)}
        self.connected = slack_component(case, self.counts)
        n = len(self.bus_ids)
        b_full = np.zeros((n, n))
        for corr in case.corridors:
            nc = self.counts[corr.id]
            if nc == 0:
                continue
            i = self.index_of[corr.from_bus]
            j = self.index_of[corr.to_bus]
            bb = nc / corr.x
            b_full[i, i] += bb
            b_full[j, j] += bb
            b_full[i, j] -= bb
            b_full[j, i] -= bb
        self.isl = self.index_of[case.slack_bus]
        self.keep = [
            i for i, bid in enumerate(self.bus_ids) if i != self.isl and bid in self.connected
        ]
        self.pos_in_keep = {i: k for k, i in enumerate(self.keep)}
        self.b_red = b_full[np.ix_(self.keep, self.keep)]
        self._lu = None

    def _factor(self):
        if self._lu is None:
            self._lu = lu_factor(self.b_red)
        return self._lu

    def injections(self, p_gen: dict) -> dict:
        inj = {b.id: -b.p_demand for b in self.case.buses}
        for bus_id, pg in p_gen.items():
            inj[bus_id] = inj.get(bus_id, 0.0) + pg
        return inj

    def solve(self, p_gen: dict, outage=None) -> DcSolution:
        """Angles and corridor flows; slack balances total mismatch."""
        case = self.case
        inj = self.injections(p_gen)
        counts = dict(self.counts)
        if outage is not None:
            if counts.get(outage, 0) < 1:
                raise StructuralError("outage on empty corridor %d" % outage)
            counts[outage] -= 1
        connectivity_check(case, counts, inj)

        n = len(self.bus_ids)
        p = np.zeros(n)
        for bus_id, val in inj.items():
            p[self.index_of[bus_id]] = val
        p_red = p[self.keep]

        lu = self._factor()
        theta_red = lu_solve(lu, p_red)
        if outage is not None:
            corr = case.corridor(outage)
            db = 1.0 / corr.x
            e = np.zeros(len(self.keep))
            for end, sgn in ((corr.from_bus, 1.0), (corr.to_bus, -1.0)):
                idx = self.index_of[end]
                if idx in self.pos_in_keep:
                    e[self.pos_in_keep[idx]] = sgn
            # B_k = B - db e e^T; Sherman-Morrison reuses the base factors.
            w = lu_solve(lu, e)
            denom = 1.0 - db * float(e @ w)
            if abs(denom) < 1e-9:
                # outage splits off a zero-injection island: rebuild instead
                return DcSystem(case, counts=counts).solve(p_gen)
            theta_red = theta_red + w * (db * float(e @ theta_red)) / denom

        theta = np.zeros(n)
        theta[self.keep] = theta_red
        return self._solution(theta, counts)

    def _solution(self, theta, counts) -> DcSolution:
        case = self.case
        flow = {}
        for corr in case.corridors:
            nc = counts[corr.id]
            if nc == 0:
                flow[corr.id] = 0.0
                continue
            i = self.index_of[corr.from_bus]
            j = self.index_of[corr.to_bus]
            flow[corr.id] = (nc / corr.x) * (theta[i] - theta[j])
        slack_inj = float(
            sum(flow[c.id] * _incidence(c, case.slack_bus) for c in case.corridors)
        )
        return DcSolution(
            theta=theta,
            bus_ids=self.bus_ids,
            index_of=self.index_of,
            flow=flow,
            slack_injection=slack_inj,
        )


def _incidence(corr, bus_id):
    if corr.from_bus == bus_id:
        return 1.0
    if corr.to_bus == bus_id:
        return -1.0
    return 0.0


def solve_dc(case: Case, plan: ExpansionPlan, p_gen: dict, outage=None) -> DcSolution:
    """One-shot solve; see DcSystem for the factored multi-outage path."""
    return DcSystem(case, plan).solve(p_gen, outage=outage)


def dc_penalties(
    plan: ExpansionPlan,
    p_gen: dict,
    case: Case,
    security: bool,
    cfg=None,
    meter=None,
) -> float:
    """Real-power operating penalties over base and (optionally) N-1 states.

    `p_gen` maps non-slack generator buses to dispatch (fixed plan or
    optimizer genes); the slack picks up the residual by construction of
    the linear model.  All failures fold into penalty mass.
    """
    from .fitness import PenaltyConfig, penalty_term  # deferred: fitness imports dcpf

    if cfg is None:
        cfg = PenaltyConfig.for_case(case)
    required = {b.id for b in case.buses if abs(b.p_demand) > 1e-12}
    required |= {g.bus for g in case.generators}
    required.add(case.slack_bus)
    counts = circuits_in_service(case, plan)
    if not required <= slack_component(case, counts):
        return cfg.infeasible_penalty

    system = DcSystem(case, plan)
    kappa_flow = cfg.kappa["flow_bound"]
    kappa_p = cfg.kappa["pgen_bound"]
    slack_gens = [g for g in case.generators if g.bus == case.slack_bus]
    slack_pmin = sum(g.p_min for g in slack_gens)
    slack_pmax = sum(g.p_max for g in slack_gens)
    slack_demand = case.bus(case.slack_bus).p_demand

    total = 0.0
    outages = [None]
    if security:
        outages += [c.id for c in case.corridors if counts[c.id] >= 1]
    for outage in outages:
        if outage is not None and counts[outage] == 1:
            k_counts = dict(counts)
            k_counts[outage] = 0
            if not required <= slack_component(case, k_counts):
                total += cfg.infeasible_penalty
                continue
        try:
            sol = system.solve(p_gen, outage=outage)
        except IslandingError:
            total += cfg.infeasible_penalty
            continue
        if meter is not None:
            meter.pf_n += 1
        for corr in case.corridors:
            nc = counts[corr.id] - (1 if corr.id == outage else 0)
            if nc == 0:
                continue
            limit = nc * corr.rating
            total += penalty_term(abs(sol.flow[corr.id]), 0.0, limit, kappa_flow)
        slack_out = sol.slack_injection + slack_demand
        total += penalty_term(slack_out, slack_pmin, slack_pmax, kappa_p)
    return total


def dc_fitness(
    plan: ExpansionPlan,
    p_gen: dict,
    case: Case,
    security: bool,
    cfg=None,
    meter=None,
) -> float:
    """Stage-1 objective: line cost plus the DC operating penalties."""
    m = 0.0
    for cid, n in plan.additions.items():
        m += n * case.corridor(cid).circuit_cost
    return m + dc_penalties(plan, p_gen, case, security, cfg=cfg, meter=meter)
