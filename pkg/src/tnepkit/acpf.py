"""Full AC power flow on the expanded network.

Newton-Raphson in polar form over the bus-admittance matrix assembled
from existing plus added circuits.  Divergence is a reported state, not
an exception: the fitness layer owns the infeasibility penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netmodel import Case, ExpansionPlan, StructuralError

TOL_PF = 1e-6
MAX_ITER = 30


@dataclass
class Admittance:
    """Complex Y-bus plus the corridor data needed for flow recovery."""

    y: np.ndarray  # (n, n) complex
    index_of: dict  # bus id -> row index
    bus_ids: list
    circuit_counts: dict  # corridor id -> circuits in service


@dataclass
class Controls:
    """Generator dispatch and voltage setpoints used for one solve."""

    p_gen: dict  # bus id -> total real output of non-slack generators, p.u.
    v_set: dict  # bus id -> magnitude for pv and slack buses
    q_reac: dict = field(default_factory=dict)  # pq bus id -> injection, p.u.


@dataclass
class PFSolution:
    v: np.ndarray
    theta: np.ndarray
    bus_ids: list
    index_of: dict
    p_slack: float
    q_gen: dict  # pv/slack bus id -> reactive generation, p.u.
    s_from: dict  # corridor id -> sending-end apparent flow, p.u.
    s_to: dict
    converged: bool
    iterations: int
    max_mismatch: float
    l_index: float = float("nan")


def circuits_in_service(case: Case, plan: ExpansionPlan, outage=None) -> dict:
    counts = {}
    for corr in case.corridors:
        n = corr.existing + plan.additions.get(corr.id, 0)
        if outage is not None and corr.id == outage:
            if n < 1:
                raise StructuralError("outage on empty corridor %d" % corr.id)
            n -= 1
        counts[corr.id] = n
    return counts


def build_admittance(case: Case, plan: ExpansionPlan, outage=None) -> Admittance:
    """Assemble Y with parallel circuits summed; outage drops one circuit."""
    bus_ids = [b.id for b in case.buses]
    index_of = {bid: i for i, bid in enumerate(bus_ids)}
    n = len(bus_ids)
    y = np.zeros((n, n), dtype=complex)
    counts = circuits_in_service(case, plan, outage)
    for corr in case.corridors:
        nc = counts[corr.id]
        if nc == 0:
            continue
        i = index_of[corr.from_bus]
        j = index_of[corr.to_bus]
        y_series = nc / complex(corr.r, corr.x)
        y_sh = nc * complex(0.0, corr.b_shunt / 2.0)
        y[i, i] += y_series + y_sh
        y[j, j] += y_series + y_sh
        y[i, j] -= y_series
        y[j, i] -= y_series
    return Admittance(y=y, index_of=index_of, bus_ids=bus_ids, circuit_counts=counts)


def _injections(case: Case, controls: Controls, adm: Admittance):
    """Scheduled P at non-slack buses and Q at pq buses, p.u."""
    n = len(adm.bus_ids)
    p = np.zeros(n)
    q = np.zeros(n)
    for b in case.buses:
        i = adm.index_of[b.id]
        p[i] -= b.p_demand
        q[i] -= b.q_demand
    for bus_id, pg in controls.p_gen.items():
        p[adm.index_of[bus_id]] += pg
    for bus_id, qr in controls.q_reac.items():
        q[adm.index_of[bus_id]] += qr
    return p, q


def solve_ac(adm: Admittance, case: Case, controls: Controls) -> PFSolution:
    """Newton-Raphson solve; never raises on divergence."""
    n = len(adm.bus_ids)
    kind = {b.id: b.kind for b in case.buses}
    slack = case.slack_bus
    pv = [i for i, bid in enumerate(adm.bus_ids) if kind[bid] == "pv"]
    pq = [i for i, bid in enumerate(adm.bus_ids) if kind[bid] == "pq"]
    pvpq = sorted(pv + pq)
    isl = adm.index_of[slack]

    v = np.ones(n)
    theta = np.zeros(n)
    for bus_id, vs in controls.v_set.items():
        v[adm.index_of[bus_id]] = vs
    p_sched, q_sched = _injections(case, controls, adm)

    y = adm.y
    pq_arr = np.array(pq, dtype=int)
    pvpq_arr = np.array(pvpq, dtype=int)

    converged = False
    it = 0
    max_mis = np.inf
    for it in range(1, MAX_ITER + 1):
        vc = v * np.exp(1j * theta)
        s_calc = vc * np.conj(y @ vc)
        dp = p_sched[pvpq_arr] - s_calc.real[pvpq_arr]
        dq = q_sched[pq_arr] - s_calc.imag[pq_arr]
        mis = np.concatenate([dp, dq])
        max_mis = float(np.max(np.abs(mis))) if mis.size else 0.0
        if not np.isfinite(max_mis):
            break
        if max_mis < TOL_PF:
            converged = True
            break
        jac = _jacobian(y, v, theta, s_calc, pvpq_arr, pq_arr)
        try:
            dx = np.linalg.solve(jac, mis)
        except np.linalg.LinAlgError:
            break
        theta[pvpq_arr] += dx[: len(pvpq_arr)]
        v[pq_arr] += dx[len(pvpq_arr):]
        if np.any(v <= 0.0) or np.any(v > 3.0):
            break

    vc = v * np.exp(1j * theta)
    s_calc = vc * np.conj(y @ vc)
    p_slack = float(s_calc.real[isl] + case.bus(slack).p_demand)
    q_gen = {}
    for b in case.buses:
        if b.kind in ("pv", "slack"):
            i = adm.index_of[b.id]
            q_gen[b.id] = float(s_calc.imag[i] + b.q_demand - controls.q_reac.get(b.id, 0.0))

    s_from, s_to = corridor_flows_arrays(vc, case, adm)
    return PFSolution(
        v=v,
        theta=theta,
        bus_ids=adm.bus_ids,
        index_of=adm.index_of,
        p_slack=p_slack,
        q_gen=q_gen,
        s_from=s_from,
        s_to=s_to,
        converged=converged,
        iterations=it,
        max_mismatch=max_mis,
    )


def _jacobian(y, v, theta, s_calc, pvpq, pq):
    """Analytic polar Jacobian [[dP/dth, dP/dV], [dQ/dth, dQ/dV]]."""
    vc = v * np.exp(1j * theta)
    ibus = y @ vc
    diag_v = np.diag(vc)
    diag_i = np.diag(ibus)
    diag_vnorm = np.diag(vc / v)
    # complex power derivatives (Matpower-style dense formulation)
    ds_dtheta = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    ds_dv = diag_v @ np.conj(y @ diag_vnorm) + np.conj(diag_i) @ diag_vnorm
    j11 = ds_dtheta.real[np.ix_(pvpq, pvpq)]
    j12 = ds_dv.real[np.ix_(pvpq, pq)]
    j21 = ds_dtheta.imag[np.ix_(pq, pvpq)]
    j22 = ds_dv.imag[np.ix_(pq, pq)]
    # mismatch is sched - calc, so Newton solves J dx = mis with J = d(calc)/dx
    return np.block([[j11, j12], [j21, j22]])


def corridor_flows_arrays(vc: np.ndarray, case: Case, adm: Admittance):
    """Aggregate apparent power per corridor at both ends."""
    s_from = {}
    s_to = {}
    for corr in case.corridors:
        nc = adm.circuit_counts.get(corr.id, 0)
        if nc == 0:
            s_from[corr.id] = 0.0
            s_to[corr.id] = 0.0
            continue
        i = adm.index_of[corr.from_bus]
        j = adm.index_of[corr.to_bus]
        y_series = nc / complex(corr.r, corr.x)
        y_sh = nc * complex(0.0, corr.b_shunt / 2.0)
        i_from = y_series * (vc[i] - vc[j]) + y_sh * vc[i]
        i_to = y_series * (vc[j] - vc[i]) + y_sh * vc[j]
        s_from[corr.id] = float(abs(vc[i] * np.conj(i_from)))
        s_to[corr.id] = float(abs(vc[j] * np.conj(i_to)))
    return s_from, s_to


def corridor_flows(pf: PFSolution, case: Case, plan: ExpansionPlan):
    """Recompute corridor flows for a converged solution."""
    adm = build_admittance(case, plan)
    vc = pf.v * np.exp(1j * pf.theta)
    return corridor_flows_arrays(vc, case, adm)


def l_index(pf: PFSolution, adm: Admittance, case: Case) -> float:
    """Voltage-collapse proximity: max over load buses of |1 - sum F V_g / V_j|.

    F = -Y_LL^-1 Y_LG over the load (pq) / generator (pv + slack) partition.
    """
    kind = {b.id: b.kind for b in case.buses}
    load_idx = [adm.index_of[b.id] for b in case.buses if kind[b.id] == "pq"]
    gen_idx = [adm.index_of[b.id] for b in case.buses if kind[b.id] != "pq"]
    if not load_idx:
        return 0.0
    y_ll = adm.y[np.ix_(load_idx, load_idx)]
    y_lg = adm.y[np.ix_(load_idx, gen_idx)]
    try:
        f = -np.linalg.solve(y_ll, y_lg)
    except np.linalg.LinAlgError:
        raise StructuralError("singular load-bus admittance block")
    vc = pf.v * np.exp(1j * pf.theta)
    v_l = vc[load_idx]
    v_g = vc[gen_idx]
    lvals = np.abs(1.0 - (f @ v_g) / v_l)
    return float(np.max(lvals))
