"""Transition graphs, strongly connected components and state classification."""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from . import _kernels
from .errors import NoReachableTscc
from .mdp import MarkovChain, Mdp, StationaryPolicy, induced_chain


@dataclass(frozen=True, eq=False)
class Digraph:
    """Directed graph in CSR form with sorted, duplicate-free adjacency lists."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges) -> "Digraph":
        edges = sorted({(int(u), int(v)) for u, v in edges})
        indptr = np.zeros(n + 1, dtype=np.int64)
        for u, _ in edges:
            indptr[u + 1] += 1
        np.cumsum(indptr, out=indptr)
        indices = np.array([v for _, v in edges], dtype=np.int64)
        return cls(n, indptr, indices)

    @classmethod
    def from_matrix(cls, adj: np.ndarray) -> "Digraph":
        rows, cols = np.nonzero(adj)
        n = adj.shape[0]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return cls(n, indptr, cols.astype(np.int64))

    def successors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edges(self) -> set:
        return {(u, int(v)) for u in range(self.n) for v in self.successors(u)}

    def subgraph(self, vertices) -> "Digraph":
        """Induced subgraph, relabelled to ``0..len(vertices)-1`` in the given order."""
        vertices = list(vertices)
        pos = {v: i for i, v in enumerate(vertices)}
        edges = [(pos[u], pos[int(w)]) for u in vertices for w in self.successors(u) if int(w) in pos]
        return Digraph.from_edges(len(vertices), edges)


def transition_graph(m: Mdp | MarkovChain) -> Digraph:
    """Edge s -> s' whenever some action (or the chain) moves s to s' with positive probability."""
    if isinstance(m, Mdp):
        keep = m.t_prob > 0
        src = m.pair_state[m.t_pair[keep]]
        adj = np.zeros((m.n_states, m.n_states), dtype=bool)
        adj[src, m.t_next[keep]] = True
        return Digraph.from_matrix(adj)
    return Digraph.from_matrix(m.T > 0)


def scc_labels(g: Digraph) -> tuple[np.ndarray, int]:
    if g.n == 0:
        return np.zeros(0, dtype=np.int64), 0
    return _kernels.scc_labels(g.n, g.indptr, g.indices)


def tarjan_sccs(g: Digraph) -> list[tuple]:
    """SCCs as sorted vertex tuples, sinks of the condensation first."""
    comp, k = scc_labels(g)
    groups = [[] for _ in range(k)]
    for v in range(g.n):
        groups[comp[v]].append(v)
    return [tuple(c) for c in groups]


def reachable_from(g: Digraph, sources) -> np.ndarray:
    seen = np.zeros(g.n, dtype=bool)
    todo = [int(s) for s in sources]
    seen[todo] = True
    while todo:
        v = todo.pop()
        for w in g.successors(v):
            if not seen[w]:
                seen[w] = True
                todo.append(int(w))
    return seen


def closed_components(g: Digraph) -> list[tuple]:
    """SCCs with no edge leaving them, ordered by smallest member."""
    comp, k = scc_labels(g)
    leaves = np.zeros(k, dtype=bool)
    for v in range(g.n):
        succ = g.successors(v)
        if succ.size and np.any(comp[succ] != comp[v]):
            leaves[comp[v]] = True
    groups = {}
    for v in range(g.n):
        if not leaves[comp[v]]:
            groups.setdefault(int(comp[v]), []).append(v)
    return sorted((tuple(c) for c in groups.values()), key=lambda c: c[0])


def class_period(g: Digraph, members) -> int:
    """gcd of cycle lengths inside a strongly connected vertex set."""
    members = list(members)
    inside = set(members)
    level = {members[0]: 0}
    order = [members[0]]
    period = 0
    for v in order:
        for w in g.successors(v):
            w = int(w)
            if w not in inside:
                continue
            if w not in level:
                level[w] = level[v] + 1
                order.append(w)
            else:
                period = gcd(period, level[v] + 1 - level[w])
    return abs(period) if period else 1


@dataclass(frozen=True, eq=False)
class StateClassification:
    """State partition of an MDP or chain.

    ``tsccs`` are the closed SCCs reachable from the support of beta. For chains,
    ``closed_classes`` additionally contains unreachable closed classes, ``isolated`` holds
    every state unreachable from the beta support, and ``transient`` the reachable states
    outside the TSCCs.
    """

    n_states: int
    tsccs: tuple
    closed_classes: tuple
    transient: tuple
    isolated: tuple
    periods: tuple

    @property
    def recurrent(self) -> tuple:
        return tuple(sorted(s for c in self.tsccs for s in c))

    @property
    def complement(self) -> tuple:
        rec = set(self.recurrent)
        return tuple(s for s in range(self.n_states) if s not in rec)

    @property
    def tscc_index(self) -> np.ndarray:
        out = np.full(self.n_states, -1, dtype=np.int64)
        for k, c in enumerate(self.tsccs):
            out[list(c)] = k
        return out

    def recurrent_mask(self) -> np.ndarray:
        return self.tscc_index >= 0


def _classify(g: Digraph, beta: np.ndarray) -> StateClassification:
    reach = reachable_from(g, np.flatnonzero(beta > 0))
    closed = closed_components(g)
    tsccs = tuple(c for c in closed if reach[c[0]])
    in_tscc = np.zeros(g.n, dtype=bool)
    for c in tsccs:
        in_tscc[list(c)] = True
    transient = tuple(int(s) for s in np.flatnonzero(reach & ~in_tscc))
    isolated = tuple(int(s) for s in np.flatnonzero(~reach))
    periods = tuple(class_period(g, c) for c in tsccs)
    return StateClassification(g.n, tsccs, tuple(closed), transient, isolated, periods)


def classify_mdp(mdp: Mdp) -> StateClassification:
    cls = _classify(transition_graph(mdp), mdp.beta)
    if not cls.tsccs:
        raise NoReachableTscc("no terminal strongly connected component is reachable from beta")
    return cls


def classify_chain(chain: MarkovChain) -> StateClassification:
    return _classify(transition_graph(chain), chain.beta)


@dataclass(frozen=True)
class PolicyClass:
    ep: bool
    cp: bool
    cpu: bool

    @property
    def name(self) -> str:
        if self.ep:
            return "EP"
        if self.cp:
            return "CP"
        if self.cpu:
            return "CPU"
        return "none"


def policy_class(mdp: Mdp, pi: StationaryPolicy, cls: StateClassification | None = None) -> PolicyClass:
    """Membership of pi in the edge-preserving, class-preserving and unichain-preserving sets."""
    cls = cls or classify_mdp(mdp)
    chain_cls = classify_chain(induced_chain(mdp, pi))
    mdp_rec = set(cls.recurrent)
    pi_rec = set(chain_cls.recurrent)

    full_support = all(np.all(pi.row(s) > 0) for s in mdp_rec)
    ep = pi_rec == mdp_rec and full_support
    cp = {frozenset(c) for c in chain_cls.tsccs} == {frozenset(c) for c in cls.tsccs}
    cpu = pi_rec <= mdp_rec
    if cpu:
        owner = cls.tscc_index
        per_class = np.zeros(len(cls.tsccs), dtype=int)
        for c in chain_cls.tsccs:
            per_class[owner[c[0]]] += 1
        cpu = bool(np.all(per_class == 1))
    return PolicyClass(ep=bool(ep), cp=bool(cp), cpu=bool(cpu))
