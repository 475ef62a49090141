"""JSON file formats for MDPs, policies and reports.

Serialization is canonical (fixed key order, fixed layout), so parsing a file and writing
it back reproduces it byte for byte. Unbounded spec limits are written as ``null``.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .errors import InvalidMdp, InvalidPolicy, SspsError
from .mdp import STEADY, TRANSIENT, Mdp, Spec, StationaryPolicy, validate

FORMAT_VERSION = "1"

MDP_FIELDS = ("ssps_version", "states", "actions", "transitions", "beta", "labels", "specs")
POLICY_FIELDS = ("ssps_version", "policy", "provenance")
PROVENANCE_FIELDS = ("mode", "epsilon", "lp_objective", "iterations", "x", "y")


class FormatError(SspsError):
    """A file does not match the expected JSON layout."""


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def _load(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None


def _check_fields(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise FormatError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise FormatError(f"{where}: unknown field(s) {unknown}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise FormatError(f"{where}: missing field(s) {missing}")


def _limit(v: float):
    return None if math.isinf(v) else float(v)


def mdp_to_dict(mdp: Mdp) -> dict:
    transitions = []
    for p, sp, prob, r in zip(mdp.t_pair, mdp.t_next, mdp.t_prob, mdp.t_reward):
        s = int(mdp.pair_state[p])
        a = int(mdp.pair_action[p])
        transitions.append({"s": mdp.state_names[s], "a": mdp.action_names[s][a],
                            "sp": mdp.state_names[int(sp)], "p": float(prob), "r": float(r)})
    labels = {}
    for name, lab in mdp.labels.items():
        if lab.pairs:
            labels[name] = [[mdp.state_names[s], mdp.action_names[s][a]] for s, a in lab.members]
        else:
            labels[name] = [mdp.state_names[s] for s in lab.members]
    return {
        "ssps_version": FORMAT_VERSION,
        "states": list(mdp.state_names),
        "actions": [list(a) for a in mdp.action_names],
        "transitions": transitions,
        "beta": [float(b) for b in mdp.beta],
        "labels": labels,
        "specs": [{"label": s.label, "lo": float(s.lo), "hi": _limit(s.hi), "kind": s.kind} for s in mdp.specs],
    }


def dumps_mdp(mdp: Mdp) -> str:
    return _dump(mdp_to_dict(mdp))


def _number(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"{where} must be a number, got {v!r}")
    return float(v)


def mdp_from_dict(obj) -> Mdp:
    _check_fields(obj, MDP_FIELDS, ("states", "actions", "transitions", "beta"), "MDP file")
    transitions = []
    for i, t in enumerate(obj["transitions"]):
        _check_fields(t, ("s", "a", "sp", "p", "r"), ("s", "a", "sp", "p"), f"transition #{i}")
        transitions.append((t["s"], t["a"], t["sp"], _number(t["p"], f"transition #{i} p"),
                            _number(t.get("r", 0.0), f"transition #{i} r")))
    specs = []
    for i, s in enumerate(obj.get("specs", [])):
        _check_fields(s, ("label", "lo", "hi", "kind"), ("label", "lo"), f"spec #{i}")
        kind = s.get("kind", STEADY)
        if kind not in (STEADY, TRANSIENT):
            raise FormatError(f"spec #{i}: kind must be {STEADY!r} or {TRANSIENT!r}")
        hi = s.get("hi")
        hi = (1.0 if kind == STEADY else math.inf) if hi is None else _number(hi, f"spec #{i} hi")
        specs.append(Spec(str(s["label"]), _number(s["lo"], f"spec #{i} lo"), hi, kind))
    beta = [_number(b, "beta entry") for b in obj["beta"]]
    labels = {}
    for name, members in obj.get("labels", {}).items():
        labels[name] = [tuple(m) if isinstance(m, list) else m for m in members]
    mdp = Mdp.build(obj["states"], obj["actions"], transitions, np.array(beta), labels, specs)
    report = validate(mdp)
    if not report.ok:
        raise InvalidMdp("; ".join(report.violations))
    return mdp


def loads_mdp(text: str) -> Mdp:
    return mdp_from_dict(_load(text))


def policy_to_dict(mdp: Mdp, pi: StationaryPolicy, provenance: dict | None = None) -> dict:
    rows = {}
    for s, name in enumerate(mdp.state_names):
        row = pi.row(s)
        rows[name] = {a: float(p) for a, p in zip(mdp.action_names[s], row)}
    out = {"ssps_version": FORMAT_VERSION, "policy": rows}
    if provenance is not None:
        out["provenance"] = provenance
    return out


def dumps_policy(mdp: Mdp, pi: StationaryPolicy, provenance: dict | None = None) -> str:
    return _dump(policy_to_dict(mdp, pi, provenance))


def policy_from_dict(mdp: Mdp, obj) -> tuple[StationaryPolicy, dict | None]:
    """Parse a policy file against ``mdp``. Actions missing from a row get probability 0."""
    _check_fields(obj, POLICY_FIELDS, ("policy",), "policy file")
    rows = obj["policy"]
    if not isinstance(rows, dict):
        raise FormatError("policy must map state names to action distributions")
    for s in rows:
        if s not in mdp.state_names:
            raise InvalidPolicy(f"policy names unknown state {s!r}")
    missing = [s for s in mdp.state_names if s not in rows]
    if missing:
        raise InvalidPolicy(f"policy has no row for state(s) {missing[:5]}")
    parsed = {}
    for s, row in rows.items():
        if not isinstance(row, dict):
            raise FormatError(f"policy row {s!r} must be an object")
        parsed[s] = {a: _number(p, f"policy[{s}][{a}]") for a, p in row.items()}
    try:
        pi = StationaryPolicy.from_rows(mdp, parsed)
    except (KeyError, IndexError) as exc:
        raise InvalidPolicy(f"policy names an unknown action: {exc}") from None
    prov = obj.get("provenance")
    if prov is not None:
        _check_fields(prov, PROVENANCE_FIELDS, ("mode",), "provenance")
    return pi, prov


def loads_policy(mdp: Mdp, text: str) -> tuple[StationaryPolicy, dict | None]:
    return policy_from_dict(mdp, _load(text))


def dumps_report(obj: dict) -> str:
    return _dump(obj)


def _pair_map(mdp: Mdp, values) -> dict:
    out = {}
    for s, name in enumerate(mdp.state_names):
        out[name] = {a: float(values[mdp.offsets[s] + k]) for k, a in enumerate(mdp.action_names[s])}
    return out


def pair_vector(mdp: Mdp, mapping: dict) -> np.ndarray:
    """Inverse of the nested {state: {action: value}} layout used in provenance."""
    out = np.zeros(mdp.n_pairs)
    for s, row in mapping.items():
        si = mdp.state_index(s)
        for a, v in row.items():
            out[mdp.pair_index(si, mdp.action_index(si, a))] = _number(v, f"provenance value {s}/{a}")
    return out


def provenance_dict(mdp: Mdp, result) -> dict:
    return {
        "mode": result.mode,
        "epsilon": result.epsilon,
        "lp_objective": float(result.objective),
        "iterations": int(result.iterations),
        "x": _pair_map(mdp, result.x),
        "y": _pair_map(mdp, result.y),
    }


def verification_to_dict(mdp: Mdp, report) -> dict:
    names = mdp.state_names
    return {
        "policy_class": {"ep": report.policy_class.ep, "cp": report.policy_class.cp,
                         "cpu": report.policy_class.cpu, "name": report.policy_class.name},
        "average_reward": float(report.average_reward),
        "steady_state": {names[s]: float(v) for s, v in enumerate(report.occupation.states)},
        "expected_visits": {names[s]: float(v) for s, v in enumerate(report.visits.states)},
        "specs": [
            {"label": r.spec.label, "kind": r.spec.kind, "lo": float(r.spec.lo), "hi": _limit(r.spec.hi),
             "attained": float(r.attained), "satisfied": bool(r.satisfied)}
            for r in report.spec_results
        ],
        "all_specs_pass": report.all_specs_pass,
        "correspondence_residual": report.correspondence_residual,
        "visits_residual": report.visits_residual,
    }
