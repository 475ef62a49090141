"""Policy extraction and the synthesis pipelines (EP, CP, CPU, plus baselines)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BudgetExhausted, Infeasible
from ..graph import Digraph, StateClassification, classify_mdp, tarjan_sccs
from ..mdp import Mdp, StationaryPolicy
from .model import INFEASIBLE, UNBOUNDED, X, Y, LinearProgram, LpSolution, LpSolver
from .programs import (
    SynthesisConfig, add_cut, build_kallenberg, build_lp0, build_lp1, build_lp2, build_lp3,
    build_unichain_lp, pair_values,
)
from .simplex import SimplexSolver

MODES = ("ep", "cp", "cpu", "lp3", "lp0", "kallenberg", "unichain")


def extract_policy(mdp: Mdp, x: np.ndarray, y: np.ndarray | None = None,
                   cfg: SynthesisConfig = SynthesisConfig()) -> StationaryPolicy:
    """pi(a|s) = x[s,a]/x_s where x_s > tau, else y[s,a]/y_s where y_s > tau, else the fill rule.

    Pair values at or below tau are treated as solver noise and zeroed first.
    """
    tau = cfg.support_tol
    x = np.where(x > tau, x, 0.0)
    y = np.zeros(mdp.n_pairs) if y is None else np.where(y > tau, y, 0.0)
    probs = np.zeros(mdp.n_pairs)
    for s in range(mdp.n_states):
        sl = slice(int(mdp.offsets[s]), int(mdp.offsets[s + 1]))
        xs, ys = x[sl].sum(), y[sl].sum()
        if xs > tau:
            probs[sl] = x[sl] / xs
        elif ys > tau:
            probs[sl] = y[sl] / ys
        elif cfg.fill == "first":
            probs[sl.start] = 1.0
        else:
            probs[sl] = 1.0 / (sl.stop - sl.start)
    return StationaryPolicy(mdp.offsets, probs)


@dataclass(frozen=True, eq=False)
class SupportGraph:
    """Support of x inside one TSCC: vertices with mass, edges from pairs with mass."""

    tscc: tuple
    vertices: tuple
    graph: Digraph

    @property
    def strongly_connected(self) -> bool:
        return bool(self.vertices) and len(tarjan_sccs(self.graph)) == 1


def support_digraph(mdp: Mdp, x: np.ndarray, tscc, tau: float = 1e-12) -> SupportGraph:
    members = set(tscc)
    xs = np.add.reduceat(x, mdp.offsets[:-1])
    verts = tuple(s for s in tscc if xs[s] > tau)
    edges = set()
    P = mdp.kernel
    for s in verts:
        for p in mdp.pairs_of(s):
            if x[p] > tau:
                for sp in np.flatnonzero(P[p]):
                    if int(sp) in members:
                        edges.add((s, int(sp)))
    pos = {s: i for i, s in enumerate(verts)}
    inner = [(pos[u], pos[v]) for u, v in edges if u in pos and v in pos]
    return SupportGraph(tuple(tscc), verts, Digraph.from_edges(len(verts), inner))


def find_cuts(mdp: Mdp, support: SupportGraph) -> list[tuple[tuple, tuple]]:
    """(C, pairs) per sink component C of the support condensation.

    ``pairs`` are the actions at states of C that can leave C while staying in the TSCC.
    An empty support yields one cut forcing mass onto the TSCC's lowest-index state.
    """
    tscc = support.tscc
    if not support.vertices:
        s = tscc[0]
        return [((s,), tuple(mdp.pairs_of(s)))]
    if support.strongly_connected:
        return []
    comps = tarjan_sccs(support.graph)
    comp_of = {}
    for k, c in enumerate(comps):
        for i in c:
            comp_of[i] = k
    sinks = []
    for k, c in enumerate(comps):
        leaves = any(comp_of[int(j)] != k for i in c for j in support.graph.successors(i))
        if not leaves:
            sinks.append(tuple(sorted(support.vertices[i] for i in c)))
    members = set(tscc)
    P = mdp.kernel
    cuts = []
    for C in sorted(sinks):
        inside = set(C)
        pairs = tuple(
            p for s in C for p in mdp.pairs_of(s)
            if any(int(sp) in members and int(sp) not in inside for sp in np.flatnonzero(P[p]))
        )
        if pairs:
            cuts.append((C, pairs))
    return cuts


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    strongly_connected: tuple
    cuts: list


@dataclass
class SynthesisResult:
    mode: str
    policy: StationaryPolicy
    lp: LinearProgram
    solution: LpSolution
    x: np.ndarray
    y: np.ndarray
    objective: float
    iterations: int = 1
    trace: list = field(default_factory=list)
    epsilon: float | None = None


def _solve_or_raise(lp: LinearProgram, solver: LpSolver) -> LpSolution:
    sol = solver.solve(lp)
    if sol.status == INFEASIBLE:
        raise Infeasible(f"{lp.name} is infeasible: {sol.message}", lp.name)
    if sol.status == UNBOUNDED:
        raise Infeasible(f"{lp.name} is unbounded", lp.name)
    return sol


def _finish(mode, mdp, lp, sol, cfg, iterations=1, trace=None, epsilon=None) -> SynthesisResult:
    x = pair_values(mdp, lp, sol.values, X)
    y = pair_values(mdp, lp, sol.values, Y)
    pi = extract_policy(mdp, x, y, cfg)
    return SynthesisResult(mode, pi, lp, sol, x, y, float(sol.objective), iterations, trace or [], epsilon)


def synthesize_cpu(mdp: Mdp, cls: StateClassification | None = None, specs=None,
                   cfg: SynthesisConfig = SynthesisConfig(), solver: LpSolver | None = None) -> SynthesisResult:
    """Row generation on LP3: add a cut for every sink of a disconnected support until each
    TSCC's support digraph is strongly connected. Cuts persist across iterations."""
    cls = cls or classify_mdp(mdp)
    solver = solver or SimplexSolver()
    budget = cfg.max_cut_iterations or mdp.n_states * mdp.max_actions
    lp = build_lp3(mdp, cls, specs)
    lp.name = "LP3"
    trace = []
    for it in range(1, budget + 1):
        sol = solver.solve(lp)
        if sol.status != "optimal":
            where = "LP3" if it == 1 else f"LP3 with {lp.tags().get('(cut)', 0)} cuts"
            raise Infeasible(f"{where} is {sol.status}: {sol.message}", "LP3")
        x = pair_values(mdp, lp, sol.values, X)
        supports = [support_digraph(mdp, x, t, cfg.support_tol) for t in cls.tsccs]
        flags = tuple(g.strongly_connected for g in supports)
        new_cuts = [] if all(flags) else [c for g in supports for c in find_cuts(mdp, g)]
        trace.append(IterationRecord(it, float(sol.objective), flags, new_cuts))
        if all(flags):
            return _finish("cpu", mdp, lp, sol, cfg, it, trace, cfg.epsilon_cut)
        for _, pairs in new_cuts:
            add_cut(mdp, lp, pairs, cfg.epsilon_cut)
    raise BudgetExhausted(f"no strongly connected support after {budget} iterations")


def synthesize(mdp: Mdp, mode: str, cfg: SynthesisConfig = SynthesisConfig(),
               solver: LpSolver | None = None, cls: StateClassification | None = None,
               specs=None) -> SynthesisResult:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    solver = solver or SimplexSolver()
    if mode == "cpu":
        return synthesize_cpu(mdp, cls, specs, cfg, solver)
    if mode in ("kallenberg", "unichain"):
        lp = build_kallenberg(mdp, specs) if mode == "kallenberg" else build_unichain_lp(mdp, specs)
        return _finish(mode, mdp, lp, _solve_or_raise(lp, solver), cfg)
    cls = cls or classify_mdp(mdp)
    if mode == "ep":
        lp = build_lp1(mdp, cls, specs, cfg)
    elif mode == "cp":
        lp = build_lp2(mdp, cls, specs, cfg)
    elif mode == "lp3":
        lp = build_lp3(mdp, cls, specs)
    else:
        lp = build_lp0(mdp, cls)
    eps = cfg.epsilon_pos if mode in ("ep", "cp") else None
    return _finish(mode, mdp, lp, _solve_or_raise(lp, solver), cfg, epsilon=eps)
