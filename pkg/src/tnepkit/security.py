"""N-1 contingency enumeration, per-contingency derating, corrective dispatch.

A contingency outages exactly one circuit of one occupied corridor; the
contingency set therefore depends on the evaluated plan.  State 0 is the
base case.
"""

from __future__ import annotations

from dataclasses import dataclass

from .acpf import Controls
from .netmodel import Case, ExpansionPlan


@dataclass(frozen=True)
class ContingencyId:
    k: int  # 0 = base case, 1..NC = outage index
    corridor: int | None  # outaged corridor id (None for base case)


def contingency_list(case: Case, plan: ExpansionPlan) -> list[ContingencyId]:
    """One entry per occupied corridor, in corridor-id order."""
    out = []
    k = 0
    for corr in case.corridors:
        if corr.existing + plan.additions.get(corr.id, 0) >= 1:
            k += 1
            out.append(ContingencyId(k=k, corridor=corr.id))
    return out


def derated_limit(corridor, circuits: int, outaged: bool) -> float:
    """Aggregate rating of a corridor in one contingency state."""
    n = circuits - 1 if outaged else circuits
    return max(n, 0) * corridor.rating


def redistribute_imbalance(base_controls: Controls, imbalance: float, case: Case) -> Controls:
    """Spread a real-power imbalance over non-slack generators.

    Shares are proportional to participation times remaining headroom in
    the movement direction; outputs are clipped to their limits and any
    residual that cannot be placed is left for the slack (and penalized).
    """
    gens = [g for g in case.generators if g.bus != case.slack_bus]
    p_new = dict(base_controls.p_gen)
    remaining = imbalance
    for _ in range(len(gens) + 1):
        if abs(remaining) < 1e-12:
            break
        weights = {}
        for g in gens:
            p_now = p_new.get(g.bus, 0.0)
            headroom = (g.p_max - p_now) if remaining > 0 else (p_now - g.p_min)
            w = g.participation * max(headroom, 0.0)
            if w > 0:
                weights[g.bus] = (w, headroom)
        total_w = sum(w for w, _ in weights.values())
        if total_w <= 0:
            break
        placed = 0.0
        for g in gens:
            if g.bus not in weights:
                continue
            w, headroom = weights[g.bus]
            share = remaining * (w / total_w)
            step = min(abs(share), headroom)
            p_new[g.bus] = p_new.get(g.bus, 0.0) + (step if remaining > 0 else -step)
            placed += step if remaining > 0 else -step
        remaining -= placed
        if abs(placed) < 1e-15:
            break
    return Controls(p_gen=p_new, v_set=dict(base_controls.v_set), q_reac=dict(base_controls.q_reac))


def corrective_dispatch(
    base_controls: Controls,
    outage,
    case: Case,
    mode: str,
    slack_output: float | None = None,
) -> Controls:
    """Controls actually used in a contingency state.

    Fixed mode returns the base controls unchanged.  Dispatch mode
    redistributes the post-outage slack imbalance (slack output beyond its
    limits, as measured on the presolved contingency state) across the other
    generators; voltage setpoints stay at their base values.
    """
    if mode == "fixed" or slack_output is None:
        return base_controls
    slack_gens = [g for g in case.generators if g.bus == case.slack_bus]
    if not slack_gens:
        return base_controls
    p_min = sum(g.p_min for g in slack_gens)
    p_max = sum(g.p_max for g in slack_gens)
    imbalance = 0.0
    if slack_output > p_max:
        imbalance = slack_output - p_max
    elif slack_output < p_min:
        imbalance = slack_output - p_min
    if imbalance == 0.0:
        return base_controls
    return redistribute_imbalance(base_controls, imbalance, case)
