"""Builders for the occupation-measure linear programs.

Variables: ``x[s,a]`` (long-run frequency of the pair), ``y[s,a]`` (expected transient
visits), and per-TSCC edge flows ``f[s,s']`` / reverse flows ``frev[s,s']`` used to certify
strong connectivity. Row tags name the constraint family each row belongs to.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..chain import check_transient_labels
from ..graph import StateClassification, classify_mdp
from ..mdp import STEADY, TRANSIENT, Mdp
from .model import EQ, FLOW, FLOWREV, GE, LE, X, Y, LinearProgram, VarKey


@dataclass(frozen=True)
class SynthesisConfig:
    epsilon_pos: float = 1e-4
    epsilon_cut: float = 1e-4
    max_cut_iterations: int | None = None
    support_tol: float = 1e-12
    fill: str = "uniform"

    def __post_init__(self):
        if not (self.epsilon_pos > 0 and self.epsilon_cut > 0):
            raise ValueError("epsilons must be positive")
        if self.fill not in ("uniform", "first"):
            raise ValueError(f"unknown fill rule {self.fill!r}")


def _xkey(mdp: Mdp, p: int) -> VarKey:
    return VarKey(X, int(mdp.pair_state[p]), int(mdp.pair_action[p]))


def _ykey(mdp: Mdp, p: int) -> VarKey:
    return VarKey(Y, int(mdp.pair_state[p]), int(mdp.pair_action[p]))


def _objective(mdp: Mdp, lp: LinearProgram) -> None:
    R = mdp.expected_reward
    for p in range(mdp.n_pairs):
        lp.objective[lp.index(_xkey(mdp, p))] = float(R[p])


def _stationarity_rows(mdp: Mdp, lp: LinearProgram, tag: str) -> None:
    """sum_{s,a} x[s,a] T(s'|s,a) = sum_a x[s',a] for each s'."""
    P = mdp.kernel
    for sp in range(mdp.n_states):
        terms = [(_xkey(mdp, p), P[p, sp]) for p in np.flatnonzero(P[:, sp])]
        terms += [(_xkey(mdp, p), -1.0) for p in mdp.pairs_of(sp)]
        lp.add_constraint(terms, EQ, 0.0, tag)


def _variables(mdp: Mdp, lp: LinearProgram, with_y: bool) -> None:
    for p in range(mdp.n_pairs):
        lp.add_var(_xkey(mdp, p), 0.0, 1.0)
    if with_y:
        for p in range(mdp.n_pairs):
            lp.add_var(_ykey(mdp, p), 0.0, np.inf)


def _transient_flow_rows(mdp: Mdp, lp: LinearProgram) -> None:
    """sum_{s,a} y[s,a] T(s'|s,a) = sum_a (x[s',a] + y[s',a]) - beta[s'] for each s'."""
    P = mdp.kernel
    for sp in range(mdp.n_states):
        terms = [(_ykey(mdp, p), P[p, sp]) for p in np.flatnonzero(P[:, sp])]
        terms += [(_xkey(mdp, p), -1.0) for p in mdp.pairs_of(sp)]
        terms += [(_ykey(mdp, p), -1.0) for p in mdp.pairs_of(sp)]
        lp.add_constraint(terms, EQ, -float(mdp.beta[sp]), "(ii)")


def build_q0(mdp: Mdp, cls: StateClassification | None = None, name: str = "Q0") -> LinearProgram:
    """Stationarity (i), transient flow balance (ii) and zero mass outside the TSCCs (iii)."""
    cls = cls or classify_mdp(mdp)
    lp = LinearProgram(name)
    _variables(mdp, lp, with_y=True)
    _stationarity_rows(mdp, lp, "(i)")
    _transient_flow_rows(mdp, lp)
    outside = [p for s in cls.complement for p in mdp.pairs_of(s)]
    lp.add_constraint([(_xkey(mdp, p), 1.0) for p in outside], EQ, 0.0, "(iii)")
    return lp


def add_steady_spec_constraints(mdp: Mdp, lp: LinearProgram, specs=None) -> LinearProgram:
    """l <= sum over label of x <= u. Sides implied by 0 <= mass <= 1 are omitted."""
    specs = mdp.specs if specs is None else specs
    for sp in specs:
        if sp.kind != STEADY:
            continue
        terms = [(_xkey(mdp, p), 1.0) for p in np.flatnonzero(mdp.label_pair_mask(sp.label))]
        if sp.lo > 0:
            lp.add_constraint(terms, GE, sp.lo, "(iv)")
        if sp.hi < 1:
            lp.add_constraint(terms, LE, sp.hi, "(iv)")
    return lp


def add_transient_spec_constraints(mdp: Mdp, lp: LinearProgram, specs=None,
                                   cls: StateClassification | None = None) -> LinearProgram:
    """l <= sum over label of y <= u for every transient spec."""
    specs = mdp.specs if specs is None else specs
    transient = [sp for sp in specs if sp.kind == TRANSIENT]
    if not transient:
        return lp
    check_transient_labels(mdp, transient, cls or classify_mdp(mdp))
    for sp in transient:
        terms = [(_ykey(mdp, p), 1.0) for p in np.flatnonzero(mdp.label_pair_mask(sp.label))]
        if sp.lo > 0:
            lp.add_constraint(terms, GE, sp.lo, "(xv)")
        if np.isfinite(sp.hi):
            lp.add_constraint(terms, LE, sp.hi, "(xv)")
    return lp


def _with_specs(mdp, lp, specs, cls):
    add_steady_spec_constraints(mdp, lp, specs)
    add_transient_spec_constraints(mdp, lp, specs, cls)
    _objective(mdp, lp)
    return lp


def build_lp3(mdp: Mdp, cls: StateClassification | None = None, specs=None) -> LinearProgram:
    cls = cls or classify_mdp(mdp)
    return _with_specs(mdp, build_q0(mdp, cls, "LP3"), specs, cls)


def build_lp0(mdp: Mdp, cls: StateClassification | None = None) -> LinearProgram:
    cls = cls or classify_mdp(mdp)
    lp = build_q0(mdp, cls, "LP0")
    _objective(mdp, lp)
    return lp


def build_lp1(mdp: Mdp, cls: StateClassification | None = None, specs=None,
              cfg: SynthesisConfig = SynthesisConfig()) -> LinearProgram:
    """Q0 and specs, plus x[s,a] >= epsilon on every TSCC pair (stored as variable bounds)."""
    cls = cls or classify_mdp(mdp)
    lp = _with_specs(mdp, build_q0(mdp, cls, "LP1"), specs, cls)
    for s in cls.recurrent:
        for p in mdp.pairs_of(s):
            lp.set_lower(_xkey(mdp, p), cfg.epsilon_pos, "(v)'")
    return lp


def tscc_relation(mdp: Mdp, tscc) -> list[tuple[int, int]]:
    """Edges s -> s' (s != s') between states of one TSCC."""
    members = set(tscc)
    P = mdp.kernel
    edges = set()
    for s in tscc:
        for p in mdp.pairs_of(s):
            for sp in np.flatnonzero(P[p]):
                if int(sp) in members and int(sp) != s:
                    edges.add((s, int(sp)))
    return sorted(edges)


def build_lp2(mdp: Mdp, cls: StateClassification | None = None, specs=None,
              cfg: SynthesisConfig = SynthesisConfig()) -> LinearProgram:
    """Q0 and specs plus forward and reverse flows from a root in each TSCC.

    Each non-root state must absorb at least epsilon more flow than it emits, in the
    edge graph and in its reverse, which certifies that the support of x keeps the TSCC
    strongly connected. Flows are capped by the x-mass carried along each edge. The root is
    the lowest-index state. A single-state TSCC has only its self-loop, so its flow
    certificate reduces to one row asking for at least epsilon of x-mass on that state.
    """
    cls = cls or classify_mdp(mdp)
    lp = _with_specs(mdp, build_q0(mdp, cls, "LP2"), specs, cls)
    P = mdp.kernel
    eps = cfg.epsilon_pos
    for tscc in cls.tsccs:
        if len(tscc) < 2:
            lp.add_constraint([(_xkey(mdp, p), 1.0) for p in mdp.pairs_of(tscc[0])], GE, eps, "(xii)")
            continue
        root = tscc[0]
        edges = tscc_relation(mdp, tscc)
        for s, sp in edges:
            lp.add_var(VarKey(FLOW, s, sp), 0.0, 1.0)
            lp.add_var(VarKey(FLOWREV, sp, s), 0.0, 1.0)

        def carried(s, sp):
            return [(_xkey(mdp, p), P[p, sp]) for p in mdp.pairs_of(s) if P[p, sp] > 0]

        for s, sp in edges:
            fwd = [(VarKey(FLOW, s, sp), 1.0)] + [(k, -c) for k, c in carried(s, sp)]
            rev = [(VarKey(FLOWREV, sp, s), 1.0)] + [(k, -c) for k, c in carried(s, sp)]
            if s == root:
                lp.add_constraint(fwd, EQ, 0.0, "(vi)")
            else:
                lp.add_constraint(fwd, LE, 0.0, "(viii)")
            if sp == root:
                lp.add_constraint(rev, EQ, 0.0, "(vii)")
            else:
                lp.add_constraint(rev, LE, 0.0, "(ix)")

        for v in tscc:
            f_in = [(VarKey(FLOW, s, sp), 1.0) for s, sp in edges if sp == v]
            f_out = [(VarKey(FLOW, s, sp), -1.0) for s, sp in edges if s == v]
            r_in = [(VarKey(FLOWREV, sp, s), 1.0) for s, sp in edges if s == v]
            r_out = [(VarKey(FLOWREV, sp, s), -1.0) for s, sp in edges if sp == v]
            if v != root:
                lp.add_constraint(f_in + f_out, GE, eps, "(x)")
                lp.add_constraint(r_in + r_out, GE, eps, "(xi)")
            lp.add_constraint(f_in, GE, eps, "(xii)")
            lp.add_constraint(r_in, GE, eps, "(xiii)")
    return lp


def build_kallenberg(mdp: Mdp, specs=None, with_specs: bool = True) -> LinearProgram:
    """Multichain LP with stationarity and flow balance but no zero-mass row outside the TSCCs."""
    lp = LinearProgram("Kallenberg")
    _variables(mdp, lp, with_y=True)
    _stationarity_rows(mdp, lp, "(i)")
    _transient_flow_rows(mdp, lp)
    if with_specs:
        add_steady_spec_constraints(mdp, lp, specs)
        add_transient_spec_constraints(mdp, lp, specs)
    _objective(mdp, lp)
    return lp


def build_unichain_lp(mdp: Mdp, specs=None, with_specs: bool = True) -> LinearProgram:
    """Stationarity plus normalization. Assumes a unichain MDP; no correspondence otherwise."""
    lp = LinearProgram("Unichain")
    _variables(mdp, lp, with_y=False)
    _stationarity_rows(mdp, lp, "(i)")
    lp.add_constraint([(_xkey(mdp, p), 1.0) for p in range(mdp.n_pairs)], EQ, 1.0, "(norm)")
    if with_specs:
        add_steady_spec_constraints(mdp, lp, specs)
    _objective(mdp, lp)
    return lp


def add_cut(mdp: Mdp, lp: LinearProgram, pairs, epsilon: float) -> None:
    lp.add_constraint([(_xkey(mdp, p), 1.0) for p in pairs], GE, epsilon, "(cut)")


def pair_values(mdp: Mdp, lp: LinearProgram, values: np.ndarray, kind: str = X) -> np.ndarray:
    """Extract the x (or y) block of a solution as a vector over pairs (zeros if absent)."""
    out = np.zeros(mdp.n_pairs)
    for p in range(mdp.n_pairs):
        key = VarKey(kind, int(mdp.pair_state[p]), int(mdp.pair_action[p]))
        if lp.has(key):
            out[p] = values[lp.index(key)]
    return out
