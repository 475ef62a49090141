"""Deterministic generators for the benchmark MDPs and small fixtures.

State names are ``s1, s2, ...`` (one-based) except for the toll collector, whose hub is
``s0``. All generators are pure: the same arguments always produce the same MDP.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, InvalidParameter, NoReachableTscc
from .graph import classify_mdp
from .mdp import STEADY, TRANSIENT, MarkovChain, Mdp, Spec, StationaryPolicy


def _names(n: int, start: int = 1) -> list[str]:
    return [f"s{i}" for i in range(start, start + n)]


# --------------------------------------------------------------------------- three-state

THREE_STATE_SCENARIOS = ("plain", "example1", "lp0", "bounded")


def three_state(scenario: str = "plain") -> Mdp:
    """Three states, two deterministic actions each.

    s1: a1->s2, a2->s3;  s2: a1->s3, a2->s2;  s3: a1->s2, a2->s3.

    Scenarios set beta, rewards and specs:

    * ``plain``: beta on s1, no reward.
    * ``example1``: beta on s2, unit reward on the self-loops (s2,a2) and (s3,a2), and specs
      asking for at least half the long-run mass on each of s2 and s3.
    * ``lp0``: beta = (0, 1/2, 1/2), unit reward on (s2,a2) and (s3,a2).
    * ``bounded``: beta on s1, reward 0.5 on (s2,a2) and 0.1 on (s2,a1), (s3,a1), (s3,a2).
    """
    if scenario not in THREE_STATE_SCENARIOS:
        raise InvalidParameter(f"unknown three-state scenario {scenario!r}")
    edges = {("s1", "a1"): "s2", ("s1", "a2"): "s3", ("s2", "a1"): "s3",
             ("s2", "a2"): "s2", ("s3", "a1"): "s2", ("s3", "a2"): "s3"}
    reward = {}
    labels, specs = {}, []
    beta = [1.0, 0.0, 0.0]
    if scenario == "example1":
        beta = [0.0, 1.0, 0.0]
        reward = {("s2", "a2"): 1.0, ("s3", "a2"): 1.0}
        labels = {"at_s2": ["s2"], "at_s3": ["s3"]}
        specs = [Spec("at_s2", 0.5, 1.0), Spec("at_s3", 0.5, 1.0)]
    elif scenario == "lp0":
        beta = [0.0, 0.5, 0.5]
        reward = {("s2", "a2"): 1.0, ("s3", "a2"): 1.0}
    elif scenario == "bounded":
        reward = {("s2", "a2"): 0.5, ("s2", "a1"): 0.1, ("s3", "a1"): 0.1, ("s3", "a2"): 0.1}
    transitions = [(s, a, sp, 1.0, reward.get((s, a), 0.0)) for (s, a), sp in edges.items()]
    return Mdp.build(["s1", "s2", "s3"], [["a1", "a2"]] * 3, transitions, beta, labels, specs)


# --------------------------------------------------------------------------- figure fixtures

def fig1_chain() -> MarkovChain:
    """Eleven-state chain with four communicating classes.

    {s1, s2} transient (beta split between them), {s3, s4} closed but never reached,
    {s5..s8} aperiodic closed class, {s9, s10, s11} a 3-cycle.
    """
    T = np.zeros((11, 11))
    rows = {
        1: {2: 0.5, 5: 0.5},
        2: {1: 0.5, 9: 0.5},
        3: {4: 1.0},
        4: {3: 0.5, 4: 0.5},
        5: {6: 1.0},
        6: {7: 1.0},
        7: {8: 1.0},
        8: {5: 0.5, 6: 0.5},
        9: {10: 1.0},
        10: {11: 1.0},
        11: {9: 1.0},
    }
    for s, row in rows.items():
        for sp, p in row.items():
            T[s - 1, sp - 1] = p
    beta = np.zeros(11)
    beta[:2] = 0.5
    return MarkovChain(T, beta, tuple(_names(11)))


def fig2c_chain() -> MarkovChain:
    """Chain induced on the three-state MDP by s1->s2, s2 self-loop, s3 self-loop."""
    T = np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return MarkovChain(T, np.array([1.0, 0.0, 0.0]), ("s1", "s2", "s3"))


_FIG6_EDGES = {
    "s1": [("a1", "s3"), ("a2", "s6")],
    "s2": [("a1", "s1"), ("a2", "s4"), ("a3", "s7")],
    "s3": [("a1", "s4"), ("a2", "s3")],
    "s4": [("a1", "s5"), ("a2", "s3")],
    "s5": [("a1", "s3"), ("a2", "s5"), ("a3", "s4")],
    "s6": [("a1", "s7")],
    "s7": [("a1", "s8"), ("a2", "s6")],
    "s8": [("a1", "s9"), ("a2", "s6")],
    "s9": [("a1", "s8"), ("a2", "s9")],
}


def fig6_mdp() -> Mdp:
    """Deterministic 9-state MDP with TSCCs {s3,s4,s5} and {s6..s9}.

    s1 carries no initial mass and is only entered from s2. Unit rewards on (s5,a3) and (s8,a1).
    """
    states = _names(9)
    actions = [[a for a, _ in _FIG6_EDGES[s]] for s in states]
    reward = {("s5", "a3"): 1.0, ("s8", "a1"): 1.0}
    transitions = [(s, a, sp, 1.0, reward.get((s, a), 0.0)) for s in states for a, sp in _FIG6_EDGES[s]]
    beta = [0.0] + [1.0 / 8] * 8
    return Mdp.build(states, actions, transitions, beta)


def fig6_policies(mdp: Mdp | None = None) -> dict[str, StationaryPolicy]:
    """Example edge-, class- and unichain-preserving policies on :func:`fig6_mdp`."""
    mdp = mdp or fig6_mdp()
    leave_s2 = {"a2": 0.5, "a3": 0.5}
    ep = StationaryPolicy.from_rows(mdp, {"s2": leave_s2})
    cp = StationaryPolicy.from_rows(mdp, {
        "s2": leave_s2, "s3": {"a1": 1.0}, "s5": {"a1": 0.5, "a3": 0.5}, "s9": {"a1": 1.0},
    })
    cpu = StationaryPolicy.from_rows(mdp, {
        "s2": leave_s2, "s3": {"a1": 1.0}, "s4": {"a1": 1.0}, "s5": {"a2": 1.0},
        "s7": {"a1": 1.0}, "s8": {"a1": 1.0}, "s9": {"a1": 1.0},
    })
    return {"ep": ep, "cp": cp, "cpu": cpu}


_FIG13_EDGES = {
    "s1": [("a1", {"s2": 1.0}), ("a2", {"s3": 1.0})],
    "s2": [("a1", {"s1": 1.0}), ("a2", {"s6": 1.0}), ("a3", {"s10": 1.0})],
    "s3": [("a1", {"s4": 1.0})],
    "s4": [("a1", {"s5": 1.0}), ("a2", {"s3": 1.0})],
    "s5": [("a1", {"s4": 1.0}), ("a2", {"s3": 1.0})],
    "s6": [("a1", {"s7": 1.0}), ("a2", {"s6": 0.5, "s7": 0.5})],
    "s7": [("a1", {"s6": 1.0}), ("a2", {"s8": 1.0})],
    "s8": [("a1", {"s9": 1.0})],
    "s9": [("a1", {"s8": 1.0}), ("a2", {"s6": 1.0})],
    "s10": [("a1", {"s11": 1.0})],
    "s11": [("a1", {"s10": 1.0}), ("a2", {"s12": 1.0})],
    "s12": [("a1", {"s13": 1.0}), ("a2", {"s10": 1.0})],
    "s13": [("a1", {"s14": 1.0}), ("a2", {"s12": 1.0})],
    "s14": [("a1", {"s15": 1.0})],
    "s15": [("a1", {"s14": 1.0}), ("a2", {"s13": 1.0})],
}
_FIG13_REWARD = {("s4", "a1"): 0.5, ("s8", "a1"): 1.0, ("s14", "a1"): 1.0, ("s15", "a1"): 1.0}


def fig13_mdp(scenario: str = "states") -> Mdp:
    """15-state MDP with three TSCCs: {s3,s4,s5}, {s6..s9} and {s10..s15}; beta uniform.

    Inside the second TSCC the rewarding loop s8<->s9 is separate from the labelled pair
    {s6,s7}; inside the third, the labelled loop s10<->s11 and the rewarding loop
    s14<->s15 are joined only through the corridor states s12 and s13.

    ``scenario="states"`` uses state labels gold1={s4,s5} >= 0.20, gold2={s6,s7} >= 0.10,
    gold3={s10,s11} >= 0.15. ``scenario="pairs"`` uses pair labels (s4,a1) >= 0.10,
    (s6,a2) >= 0.12, (s10,a1) >= 0.20, transient visits of (s2,a1) in [20, 50] and at most
    50 expected visits to {s1, s2} overall.
    """
    states = _names(15)
    actions = [[a for a, _ in _FIG13_EDGES[s]] for s in states]
    transitions = [
        (s, a, sp, p, _FIG13_REWARD.get((s, a), 0.0))
        for s in states for a, row in _FIG13_EDGES[s] for sp, p in row.items()
    ]
    beta = [1.0 / 15] * 15
    if scenario == "states":
        labels = {"gold1": ["s4", "s5"], "gold2": ["s6", "s7"], "gold3": ["s10", "s11"]}
        specs = [Spec("gold1", 0.20, 1.0), Spec("gold2", 0.10, 1.0), Spec("gold3", 0.15, 1.0)]
    elif scenario == "pairs":
        labels = {
            "gold1": [("s4", "a1")], "gold2": [("s6", "a2")], "gold3": [("s10", "a1")],
            "tool": [("s2", "a1")], "transient": ["s1", "s2"],
        }
        specs = [
            Spec("gold1", 0.10, 1.0), Spec("gold2", 0.12, 1.0), Spec("gold3", 0.20, 1.0),
            Spec("tool", 20.0, 50.0, TRANSIENT), Spec("transient", 0.0, 50.0, TRANSIENT),
        ]
    else:
        raise InvalidParameter(f"unknown fig13 scenario {scenario!r}")
    return Mdp.build(states, actions, transitions, beta, labels, specs)


# --------------------------------------------------------------------------- frozen islands

_MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
_SIDEWAYS = {"up": ("left", "right"), "down": ("left", "right"), "left": ("up", "down"), "right": ("up", "down")}


def frozen_islands_layout(n: int) -> dict:
    """Cell -> state index maps for the three islands of an n x n grid (all zero-based).

    The large island is the top half, numbered row-major. The bottom half is split into a
    left and a right (n/2 x n/2) island, each numbered row-major within itself, left first.
    """
    if n < 4 or n % 2:
        raise InvalidParameter(f"frozen islands needs an even n >= 4, got {n}")
    h = n // 2
    cell = {}
    for r in range(h):
        for c in range(n):
            cell[(r, c)] = (0, r * n + c)
    base = n * h
    for k in range(2):
        for r in range(h):
            for c in range(h):
                cell[(h + r, k * h + c)] = (k + 1, base + k * h * h + r * h + c)
    return cell


def frozen_islands(n: int = 8, transient_specs: bool = False, transient_cap: float | None = None,
                   seed: int = 0) -> Mdp:
    """Grid world with a large starting island and two small terminal islands.

    Moves succeed with probability 0.9 and slip to each perpendicular neighbour with 0.05;
    mass that would leave the current island stays in place. The cells of the large island's
    bottom row at columns 0 and n/2 are crossings: "down" there moves deterministically to
    the top-left cell of the island below, with no way back.

    For n = 8 the labels are log1={s34,s36,s38,s43}, log2={s52,s55,s57,s61}, canoe1={s33},
    canoe2={s49}, fish1={s48}, fish2={s64} with the matching lower bounds. For other n, logs
    cover a seeded quarter of each small island, and specs bound the two log sets and the
    two canoes jointly. ``transient_specs`` (n=8 only) adds visit bounds on three groups of
    large-island cells; ``transient_cap`` bounds total visits to the large island.
    """
    cell = frozen_islands_layout(n)
    h = n // 2
    n_states = n * n
    island_of = {}
    for rc, (isl, idx) in cell.items():
        island_of[idx] = (isl, rc)
    crossings = {(h - 1, 0): cell[(h, 0)][1], (h - 1, h): cell[(h, h)][1]}
    fish = {cell[(n - 1, h - 1)][1], cell[(n - 1, n - 1)][1]}

    def target(isl, rc, move):
        dr, dc = _MOVES[move]
        nr, nc = rc[0] + dr, rc[1] + dc
        nxt = cell.get((nr, nc))
        if nxt is None or nxt[0] != isl:
            return cell[rc][1]
        return nxt[1]

    transitions = []
    acts = ["up", "down", "left", "right"]
    for idx in range(n_states):
        isl, rc = island_of[idx]
        for a in acts:
            if isl == 0 and a == "down" and rc in crossings:
                dist = {crossings[rc]: 1.0}
            else:
                dist = {}
                for move, p in ((a, 0.9), (_SIDEWAYS[a][0], 0.05), (_SIDEWAYS[a][1], 0.05)):
                    t = target(isl, rc, move)
                    dist[t] = dist.get(t, 0.0) + p
            for sp, p in sorted(dist.items()):
                transitions.append((idx, a, sp, p, 1.0 if sp in fish else 0.0))

    beta = np.zeros(n_states)
    beta[: n * h] = 1.0 / (n * h)
    names = _names(n_states)
    island1 = [cell[(h + r, c)][1] for r in range(h) for c in range(h)]
    island2 = [cell[(h + r, h + c)][1] for r in range(h) for c in range(h)]

    if n == 8:
        labels = {
            "log1": ["s34", "s36", "s38", "s43"], "log2": ["s52", "s55", "s57", "s61"],
            "canoe1": ["s33"], "canoe2": ["s49"], "fish1": ["s48"], "fish2": ["s64"],
        }
        specs = [
            Spec("log1", 0.25, 1.0), Spec("log2", 0.25, 1.0), Spec("canoe1", 0.05, 1.0),
            Spec("canoe2", 0.05, 1.0), Spec("fish1", 0.1, 1.0), Spec("fish2", 0.1, 1.0),
        ]
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
        logs = []
        for isl in (island1, island2):
            pool = isl[1:-1]
            logs += sorted(int(v) for v in rng.choice(pool, size=max(1, len(isl) // 4), replace=False))
        labels = {
            "logs": [names[i] for i in logs],
            "canoes": [names[island1[0]], names[island2[0]]],
            "fish": [names[island1[-1]], names[island2[-1]]],
        }
        specs = [Spec("logs", 0.3, 1.0), Spec("canoes", 0.05, 1.0)]

    if transient_specs:
        if n != 8:
            raise InvalidParameter("transient label layout is defined for n = 8 only")
        labels.update({"tools": ["s7", "s13", "s23"], "gas": ["s10", "s16"], "supplies": ["s2", "s15", "s29"]})
        specs += [Spec("tools", 10.0, 200.0, TRANSIENT), Spec("gas", 12.0, 200.0, TRANSIENT),
                  Spec("supplies", 15.0, 200.0, TRANSIENT)]
    if transient_cap is not None:
        labels["large_island"] = names[: n * h]
        specs.append(Spec("large_island", 0.0, float(transient_cap), TRANSIENT))
    return Mdp.build(names, [acts] * n_states, transitions, beta, labels, specs)


# --------------------------------------------------------------------------- toll collector

def toll_collector(m: int = 3, n: int = 25, l: float = 0.05) -> Mdp:
    """Hub s0 with one action per clique; each clique is complete on n states.

    Clique k holds states s_{1+(k-1)n} .. s_{kn}. Moving between the first two states of a
    clique (either direction) pays 1. Label ``L{k}`` holds clique k's other states, with a
    steady-state lower bound l. Beta is uniform over all states.
    """
    if m < 1 or n < 2 or not 0 <= l <= 1:
        raise InvalidParameter(f"toll collector needs m >= 1, n >= 2, 0 <= l <= 1; got {m}, {n}, {l}")
    names = _names(1 + m * n, start=0)
    actions = [[f"to_T{k + 1}" for k in range(m)]]
    transitions = [("s0", f"to_T{k + 1}", 1 + k * n, 1.0, 0.0) for k in range(m)]
    labels, specs = {}, []
    for k in range(m):
        members = list(range(1 + k * n, 1 + (k + 1) * n))
        first, second = members[0], members[1]
        for s in members:
            acts = []
            for t in members:
                if t == s:
                    continue
                a = f"to_{names[t]}"
                acts.append(a)
                r = 1.0 if {s, t} == {first, second} else 0.0
                transitions.append((s, a, t, 1.0, r))
            actions.append(acts)
        labels[f"L{k + 1}"] = [names[s] for s in members[2:]]
        specs.append(Spec(f"L{k + 1}", l, 1.0))
    beta = np.full(len(names), 1.0 / len(names))
    return Mdp.build(names, actions, transitions, beta, labels, specs)


# --------------------------------------------------------------------------- random partitions

def _partition_sizes(n: int, rng: np.random.Generator) -> list[int]:
    mean = n / 5
    sizes = []
    while sum(sizes) < n:
        size = max(1, int(round(rng.normal(mean, np.sqrt(mean)))))
        sizes.append(min(size, n - sum(sizes)))
    return sizes


def random_partition_mdp(n: int = 20, p_in: float = 0.9, p_out: float = 0.05, seed: int = 0,
                         spec_lo: float = 0.05, max_attempts: int = 100) -> Mdp:
    """Deterministic MDP on a random clustered digraph.

    Cluster sizes are normal with mean and variance n/5 (rounded, at least 1, the last one
    truncated to fit). Edges appear independently with probability p_in inside a cluster and
    p_out across clusters. Each out-edge of a state is one action; a state without
    out-edges gets a single self-loop. Beta is uniform over states outside closed
    components; action a1 pays 1 inside the TSCCs. The default spec asks for ``spec_lo`` of
    the long-run mass on the lowest-index state of the TSCC that collects the most initial
    mass. A draw is rejected (and the next sub-seed tried) when it has no state outside the
    closed components, or when the spec is infeasible for edge-preserving policies.
    """
    from .graph import reachable_from, transition_graph
    from .lp.programs import build_lp1
    from .lp.simplex import SimplexSolver

    if n < 5 or not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise InvalidParameter(f"random partition MDP needs n >= 5 and probabilities in [0,1]")
    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        sizes = _partition_sizes(n, rng)
        cluster = np.repeat(np.arange(len(sizes)), sizes)
        probs = np.where(cluster[:, None] == cluster[None, :], p_in, p_out)
        adj = rng.random((n, n)) < probs
        np.fill_diagonal(adj, False)
        names = _names(n)
        actions, transitions = [], []
        for s in range(n):
            succ = np.flatnonzero(adj[s]) if adj[s].any() else np.array([s])
            actions.append([f"a{i + 1}" for i in range(len(succ))])
            transitions += [(s, f"a{i + 1}", int(t), 1.0, 0.0) for i, t in enumerate(succ)]
        probe = Mdp.build(names, actions, transitions, np.full(n, 1.0 / n))
        closed = {s for c in classify_mdp(probe).tsccs for s in c}
        outside = [s for s in range(n) if s not in closed]
        if not outside:
            continue
        beta = np.zeros(n)
        beta[outside] = 1.0 / len(outside)
        try:
            cls = classify_mdp(probe.with_beta(beta))
        except NoReachableTscc:
            continue
        rec = set(cls.recurrent)
        transitions = [(s, a, t, p, 1.0 if (s in rec and a == "a1") else 0.0) for s, a, t, p, _ in transitions]
        g = transition_graph(probe)
        reach = {s: reachable_from(g, [s]) for s in outside}
        reach_mass = [sum(beta[s] for s in outside if reach[s][c[0]]) for c in cls.tsccs]
        target = cls.tsccs[int(np.argmax(reach_mass))][0]
        mdp = Mdp.build(names, actions, transitions, beta, {"target": [names[target]]},
                        [Spec("target", spec_lo, 1.0)])
        if SimplexSolver().solve(build_lp1(mdp, cls)).optimal:
            return mdp
    raise NoReachableTscc(f"no usable random partition MDP after {max_attempts} attempts")


@dataclass(frozen=True)
class EnvSpec:
    name: str
    params: dict


GENERATORS = {
    "three-state": three_state,
    "fig6": fig6_mdp,
    "fig13": fig13_mdp,
    "frozen-islands": frozen_islands,
    "toll-collector": toll_collector,
    "random-partition": random_partition_mdp,
}


def generate(name: str, **params) -> Mdp:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise InvalidParameter(f"unknown environment {name!r}; known: {sorted(GENERATORS)}") from None
    try:
        return gen(**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {name}: {exc}") from None
