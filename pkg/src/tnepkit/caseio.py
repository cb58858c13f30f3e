"""Case and plan file formats plus bundled benchmark fixtures.

A case is one self-describing JSON document.  Field names are the
repository's documented contract:

    schema_version   "1"
    name             short case identifier
    base_mva         system MVA base (asserted 100 for bundled fixtures)
    currency_unit    e.g. "1e3 USD", "1e6 USD"
    buses            [{id, kind, p_demand, q_demand, v_setpoint, v_min, v_max}]
    generators       [{bus, p_min, p_max, q_min, q_max, participation}]
    corridors        [{id, from_bus, to_bus, r, x, b_shunt, rating,
                       circuit_cost, existing, max_new}]
    reactive_candidates  [{bus, fixed_cost, variable_cost, q_max}]
    limits           {v_min, v_max, l_min, l_max}
    horizon          optional {t_years, discount, load_scale, gen_scale}
    generation_plan  optional {bus: fixed P_G} for the fixed-generation mode
    penalties        optional per-case penalty weight overrides

Plan files round-trip losslessly: every numeric field is written with
full repr precision by the json encoder.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .netmodel import (
    Bus,
    Case,
    Corridor,
    DynamicPlan,
    ExpansionPlan,
    Generator,
    HorizonConfig,
    ReactiveCandidate,
    StructuralError,
)

SCHEMA_VERSION = "1"


class CaseFormatError(ValueError):
    """Malformed case or plan document; message carries field diagnostics."""


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture ('garver6', 'ieee24', ...)."""
    root = resources.files("tnepkit") / "fixtures"
    p = Path(str(root / (name + ".json")))
    if not p.exists():
        raise CaseFormatError("no bundled fixture named %r" % name)
    return p


def load_case(path) -> Case:
    """Parse and validate a case document."""
    path = Path(path)
    if not path.exists():
        raise CaseFormatError("case file not found: %s" % path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseFormatError("parse error in %s line %d: %s" % (path, exc.lineno, exc.msg))
    return case_from_dict(doc, name=path.stem)


def case_from_dict(doc: dict, name: str = "case") -> Case:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CaseFormatError(
            "unsupported schema_version %r (this build reads %r)" % (version, SCHEMA_VERSION)
        )
    for key in ("base_mva", "currency_unit", "buses", "generators", "corridors"):
        if key not in doc:
            raise CaseFormatError("missing required field %r" % key)

    limits = doc.get("limits", {})
    horizon = None
    if doc.get("horizon"):
        h = doc["horizon"]
        horizon = HorizonConfig(
            t_years=int(h["t_years"]),
            discount=tuple(float(d) for d in h["discount"]),
            load_scale=tuple(float(s) for s in h.get("load_scale", [])),
            gen_scale=tuple(float(s) for s in h.get("gen_scale", [])),
        )

    try:
        case = Case(
            name=doc.get("name", name),
            base_mva=float(doc["base_mva"]),
            currency_unit=str(doc["currency_unit"]),
            buses=tuple(
                Bus(
                    id=int(b["id"]),
                    kind=str(b["kind"]),
                    p_demand=float(b.get("p_demand", 0.0)),
                    q_demand=float(b.get("q_demand", 0.0)),
                    v_setpoint=float(b.get("v_setpoint", 1.0)),
                    v_min=float(b.get("v_min", limits.get("v_min", 0.95))),
                    v_max=float(b.get("v_max", limits.get("v_max", 1.05))),
                )
                for b in doc["buses"]
            ),
            generators=tuple(
                Generator(
                    bus=int(g["bus"]),
                    p_min=float(g.get("p_min", 0.0)),
                    p_max=float(g["p_max"]),
                    q_min=float(g["q_min"]),
                    q_max=float(g["q_max"]),
                    participation=float(g.get("participation", g["p_max"])),
                )
                for g in doc["generators"]
            ),
            corridors=tuple(
                Corridor(
                    id=int(c["id"]),
                    from_bus=int(c["from_bus"]),
                    to_bus=int(c["to_bus"]),
                    r=float(c.get("r", 0.0)),
                    x=float(c["x"]),
                    b_shunt=float(c.get("b_shunt", 0.0)),
                    rating=float(c["rating"]),
                    circuit_cost=float(c["circuit_cost"]),
                    existing=int(c.get("existing", 0)),
                    max_new=int(c.get("max_new", 0)),
                )
                for c in doc["corridors"]
            ),
            reactive_candidates=tuple(
                ReactiveCandidate(
                    bus=int(rc["bus"]),
                    fixed_cost=float(rc["fixed_cost"]),
                    variable_cost=float(rc["variable_cost"]),
                    q_max=float(rc["q_max"]),
                )
                for rc in doc.get("reactive_candidates", [])
            ),
            v_min=float(limits.get("v_min", 0.95)),
            v_max=float(limits.get("v_max", 1.05)),
            l_min=float(limits.get("l_min", 0.0)),
            l_max=float(limits.get("l_max", 0.45)),
            horizon=horizon,
            generation_plan={int(k): float(v) for k, v in doc.get("generation_plan", {}).items()},
            penalty_overrides=dict(doc.get("penalties", {})),
        )
    except StructuralError as exc:
        raise CaseFormatError("integrity violation in %s: %s" % (name, exc))
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseFormatError("bad field in %s: %s" % (name, exc))
    return case


def load_fixture(name: str) -> Case:
    return load_case(fixture_path(name))


# --- plan files ---


def plan_to_dict(plan) -> dict:
    if isinstance(plan, DynamicPlan):
        return {
            "per_year": [
                {
                    "additions": {str(k): v for k, v in sorted(p.additions.items())},
                    "reactive": {str(k): v for k, v in sorted(p.reactive.items())},
                }
                for p in plan.per_year
            ]
        }
    return {
        "additions": {str(k): v for k, v in sorted(plan.additions.items())},
        "reactive": {str(k): v for k, v in sorted(plan.reactive.items())},
    }


def plan_from_dict(doc: dict):
    if "per_year" in doc:
        return DynamicPlan(
            per_year=tuple(
                ExpansionPlan(
                    additions={int(k): int(v) for k, v in p.get("additions", {}).items()},
                    reactive={int(k): float(v) for k, v in p.get("reactive", {}).items()},
                )
                for p in doc["per_year"]
            )
        )
    return ExpansionPlan(
        additions={int(k): int(v) for k, v in doc.get("additions", {}).items()},
        reactive={int(k): float(v) for k, v in doc.get("reactive", {}).items()},
    )


def save_plan(result: dict, path) -> None:
    """Write a plan document; `result` holds plain dict/list/number fields."""
    doc = dict(result)
    doc["schema_version"] = SCHEMA_VERSION
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_plan(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CaseFormatError("plan file not found: %s" % path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseFormatError("parse error in %s line %d: %s" % (path, exc.lineno, exc.msg))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CaseFormatError(
            "unsupported plan schema_version %r (this build reads %r)"
            % (doc.get("schema_version"), SCHEMA_VERSION)
        )
    return doc
