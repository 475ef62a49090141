"""Core data model: labeled MDPs, Markov chains, stationary policies and specifications."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidMdp, InvalidPolicy

PROB_TOL = 1e-9
STEADY = "steady"
TRANSIENT = "transient"
SPEC_KINDS = (STEADY, TRANSIENT)


def _clamp_small_negative(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float).copy()
    values[(values < 0) & (values >= -PROB_TOL)] = 0.0
    return values


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Spec:
    """Bound ``lo <= measure(label) <= hi`` on a steady-state or transient quantity."""

    label: str
    lo: float
    hi: float
    kind: str = STEADY


@dataclass(frozen=True)
class Label:
    """Named set of states, or of (state, action) pairs when ``pairs`` is true."""

    name: str
    members: tuple
    pairs: bool = False


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP with a sparse kernel stored as sorted COO arrays over (pair, next state).

    State-action pairs are numbered contiguously: the actions of state ``s`` occupy
    pair indices ``offsets[s]:offsets[s+1]``.
    """

    state_names: tuple
    action_names: tuple
    offsets: np.ndarray
    t_pair: np.ndarray
    t_next: np.ndarray
    t_prob: np.ndarray
    t_reward: np.ndarray
    beta: np.ndarray
    labels: Mapping[str, Label] = field(default_factory=dict)
    specs: tuple = ()

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_pairs(self) -> int:
        return int(self.offsets[-1])

    def n_actions(self, s: int) -> int:
        return int(self.offsets[s + 1] - self.offsets[s])

    @property
    def max_actions(self) -> int:
        return int(np.diff(self.offsets).max(initial=0))

    def pairs_of(self, s: int) -> range:
        return range(int(self.offsets[s]), int(self.offsets[s + 1]))

    def pair_index(self, s: int, a: int) -> int:
        if not 0 <= a < self.n_actions(s):
            raise IndexError(f"action {a} out of range for state {s}")
        return int(self.offsets[s]) + a

    @cached_property
    def pair_state(self) -> np.ndarray:
        return _frozen(np.repeat(np.arange(self.n_states), np.diff(self.offsets)))

    @cached_property
    def pair_action(self) -> np.ndarray:
        return _frozen(np.arange(self.n_pairs) - self.offsets[self.pair_state])

    @cached_property
    def kernel(self) -> np.ndarray:
        """Dense matrix ``P[pair, s'] = T(s'|s,a)``."""
        P = np.zeros((self.n_pairs, self.n_states))
        np.add.at(P, (self.t_pair, self.t_next), self.t_prob)
        return _frozen(P)

    @cached_property
    def expected_reward(self) -> np.ndarray:
        """``R(s,a) = sum_s' T(s'|s,a) R(s,a,s')`` per pair."""
        r = np.zeros(self.n_pairs)
        np.add.at(r, self.t_pair, self.t_prob * self.t_reward)
        return _frozen(r)

    @cached_property
    def _state_lookup(self) -> dict:
        return {name: i for i, name in enumerate(self.state_names)}

    def state_index(self, name) -> int:
        if isinstance(name, (int, np.integer)):
            return int(name)
        try:
            return self._state_lookup[name]
        except KeyError:
            raise KeyError(f"unknown state {name!r}") from None

    def action_index(self, s: int, name) -> int:
        if isinstance(name, (int, np.integer)):
            return int(name)
        try:
            return self.action_names[s].index(name)
        except ValueError:
            raise KeyError(f"unknown action {name!r} at state {self.state_names[s]!r}") from None

    def label_pair_mask(self, name: str) -> np.ndarray:
        """Pairs covered by a label; a state label covers every action of its states."""
        label = self.labels[name]
        mask = np.zeros(self.n_pairs, dtype=bool)
        if label.pairs:
            for s, a in label.members:
                mask[self.pair_index(s, a)] = True
        else:
            for s in label.members:
                mask[self.offsets[s]:self.offsets[s + 1]] = True
        return mask

    def label_states(self, name: str) -> frozenset:
        label = self.labels[name]
        if label.pairs:
            return frozenset(s for s, _ in label.members)
        return frozenset(label.members)

    def steady_specs(self) -> tuple:
        return tuple(sp for sp in self.specs if sp.kind == STEADY)

    def transient_specs(self) -> tuple:
        return tuple(sp for sp in self.specs if sp.kind == TRANSIENT)

    def parse_label(self, name, members) -> Label:
        """Turn a list of states, or of (state, action) pairs, given by name or index into a Label."""
        if isinstance(members, Label):
            return members
        members = list(members)
        is_pairs = bool(members) and isinstance(members[0], (list, tuple))
        try:
            if is_pairs:
                idx = []
                for s, a in members:
                    si = self.state_index(s)
                    idx.append((si, self.action_index(si, a)))
                parsed = tuple(sorted(set(idx)))
            else:
                parsed = tuple(sorted({self.state_index(s) for s in members}))
        except (KeyError, IndexError) as exc:
            raise InvalidMdp(f"label {name!r}: {exc}") from None
        return Label(str(name), parsed, is_pairs)

    def with_specs(self, specs: Iterable[Spec], labels: Mapping[str, Label] | None = None) -> "Mdp":
        merged = dict(self.labels)
        for name, members in (labels or {}).items():
            merged[str(name)] = self.parse_label(name, members)
        return Mdp(self.state_names, self.action_names, self.offsets, self.t_pair, self.t_next,
                   self.t_prob, self.t_reward, self.beta, merged, tuple(specs))

    def with_beta(self, beta) -> "Mdp":
        return Mdp(self.state_names, self.action_names, self.offsets, self.t_pair, self.t_next,
                   self.t_prob, self.t_reward, _frozen(_clamp_small_negative(beta)), self.labels, self.specs)

    @classmethod
    def build(
        cls,
        states: Sequence,
        actions: Sequence[Sequence],
        transitions: Iterable,
        beta,
        labels: Mapping[str, Sequence] | None = None,
        specs: Iterable[Spec] = (),
    ) -> "Mdp":
        """Assemble an MDP from names.

        ``transitions`` holds ``(s, a, s', p)`` or ``(s, a, s', p, r)`` tuples where states and
        actions may be given by name or index. Labels map a name to a list of states, or to a
        list of ``(state, action)`` pairs.
        """
        state_names = tuple(str(s) for s in states)
        if len(set(state_names)) != len(state_names):
            raise InvalidMdp("duplicate state names")
        action_names = tuple(tuple(str(a) for a in acts) for acts in actions)
        if len(action_names) != len(state_names):
            raise InvalidMdp("actions must list one action set per state")
        offsets = np.zeros(len(state_names) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(a) for a in action_names])
        proto = cls(state_names, action_names, _frozen(offsets), *(np.zeros(0),) * 4, np.zeros(0))

        seen = {}
        for entry in transitions:
            if len(entry) == 4:
                s, a, sp, p = entry
                r = 0.0
            elif len(entry) == 5:
                s, a, sp, p, r = entry
            else:
                raise InvalidMdp(f"transition entry {entry!r} must have 4 or 5 fields")
            try:
                si = proto.state_index(s)
                ai = proto.action_index(si, a)
                spi = proto.state_index(sp)
                if not (0 <= si < proto.n_states and 0 <= spi < proto.n_states):
                    raise KeyError(f"state index out of range in {entry!r}")
                pi = proto.pair_index(si, ai)
            except (KeyError, IndexError) as exc:
                raise InvalidMdp(str(exc)) from None
            key = (pi, spi)
            if key in seen:
                raise InvalidMdp(f"duplicate transition {entry!r}")
            seen[key] = (float(p), float(r))

        keys = sorted(seen)
        t_pair = np.array([k[0] for k in keys], dtype=np.int64)
        t_next = np.array([k[1] for k in keys], dtype=np.int64)
        t_prob = _clamp_small_negative([seen[k][0] for k in keys])
        t_reward = np.array([seen[k][1] for k in keys], dtype=float)

        parsed_labels = {str(name): proto.parse_label(name, members) for name, members in (labels or {}).items()}

        beta = _clamp_small_negative(beta)
        return cls(
            state_names, action_names, proto.offsets, _frozen(t_pair), _frozen(t_next),
            _frozen(t_prob), _frozen(t_reward), _frozen(beta), parsed_labels, tuple(specs),
        )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(mdp: Mdp) -> ValidationReport:
    """List every broken structural invariant; an empty report means the MDP is well formed."""
    out = []
    n = mdp.n_states
    names = mdp.state_names
    for s in range(n):
        if mdp.n_actions(s) == 0:
            out.append(f"state {names[s]} has no actions")
    if len(mdp.beta) != n:
        out.append(f"beta has length {len(mdp.beta)}, expected {n}")
    else:
        if np.any(mdp.beta < 0):
            bad = [names[i] for i in np.flatnonzero(mdp.beta < 0)]
            out.append(f"beta is negative at {bad}")
        total = float(mdp.beta.sum())
        if abs(total - 1.0) > PROB_TOL:
            out.append(f"beta sums to {total:.12g}")
    if np.any(mdp.t_prob < 0) or np.any(mdp.t_prob > 1 + PROB_TOL):
        for k in np.flatnonzero((mdp.t_prob < 0) | (mdp.t_prob > 1 + PROB_TOL)):
            p = int(mdp.t_pair[k])
            s, a = int(mdp.pair_state[p]), int(mdp.pair_action[p])
            out.append(f"kernel entry ({names[s]},{mdp.action_names[s][a]})->{names[mdp.t_next[k]]} "
                       f"has probability {mdp.t_prob[k]:.12g}")
    if mdp.n_pairs:
        sums = np.bincount(mdp.t_pair, weights=mdp.t_prob, minlength=mdp.n_pairs)
        for p in np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL):
            s, a = int(mdp.pair_state[p]), int(mdp.pair_action[p])
            out.append(f"kernel row ({names[s]},{mdp.action_names[s][a]}) sums to {sums[p]:.12g}")
    for name, label in mdp.labels.items():
        if label.pairs:
            for s, a in label.members:
                if not (0 <= s < n and 0 <= a < mdp.n_actions(s)):
                    out.append(f"label {name} references missing pair ({s},{a})")
        else:
            for s in label.members:
                if not 0 <= s < n:
                    out.append(f"label {name} references missing state {s}")
    for i, sp in enumerate(mdp.specs):
        where = f"spec #{i} ({sp.label}, [{sp.lo}, {sp.hi}], {sp.kind})"
        if sp.label not in mdp.labels:
            out.append(f"{where} references unknown label {sp.label!r}")
        if sp.kind not in SPEC_KINDS:
            out.append(f"{where} has unknown kind")
        if not sp.lo <= sp.hi:
            out.append(f"{where} has lo > hi")
        if sp.kind == STEADY and not (0 <= sp.lo and sp.hi <= 1 + PROB_TOL):
            out.append(f"{where} steady-state bounds must lie in [0, 1]")
        if sp.kind == TRANSIENT and sp.lo < 0:
            out.append(f"{where} transient bounds must be nonnegative")
    return ValidationReport(tuple(out))


@dataclass(frozen=True, eq=False)
class MarkovChain:
    T: np.ndarray
    beta: np.ndarray
    state_names: tuple = ()

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ValueError("transition matrix must be square")
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (T.shape[0],):
            raise ValueError("beta length does not match the transition matrix")
        object.__setattr__(self, "T", _frozen(_clamp_small_negative(T)))
        object.__setattr__(self, "beta", _frozen(_clamp_small_negative(beta)))
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"s{i + 1}" for i in range(T.shape[0])))

    @property
    def n_states(self) -> int:
        return self.T.shape[0]

    def is_stochastic(self, tol: float = PROB_TOL) -> bool:
        return bool(np.all(self.T >= 0) and np.allclose(self.T.sum(axis=1), 1.0, atol=tol, rtol=0))


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    """Action distribution per state, stored flat over the MDP's pair numbering."""

    offsets: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        probs = _clamp_small_negative(self.probs)
        offsets = np.asarray(self.offsets, dtype=np.int64)
        if probs.shape != (int(offsets[-1]),):
            raise InvalidPolicy(f"policy has {probs.size} entries, expected {int(offsets[-1])}")
        if np.any(probs < 0) or np.any(probs > 1 + PROB_TOL):
            raise InvalidPolicy("policy probabilities must lie in [0, 1]")
        sums = np.add.reduceat(probs, offsets[:-1]) if probs.size else np.zeros(0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
        if bad.size:
            raise InvalidPolicy(f"policy row for state {int(bad[0])} sums to {sums[bad[0]]:.12g}")
        object.__setattr__(self, "offsets", _frozen(offsets.copy()))
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def n_states(self) -> int:
        return len(self.offsets) - 1

    def row(self, s: int) -> np.ndarray:
        return self.probs[self.offsets[s]:self.offsets[s + 1]]

    def prob(self, s: int, a: int) -> float:
        return float(self.probs[self.offsets[s] + a])

    @classmethod
    def uniform(cls, mdp: Mdp) -> "StationaryPolicy":
        counts = np.diff(mdp.offsets)
        return cls(mdp.offsets, np.repeat(1.0 / counts, counts))

    @classmethod
    def deterministic(cls, mdp: Mdp, choice: Mapping | Sequence) -> "StationaryPolicy":
        """``choice`` maps state -> action (names or indices); unlisted states play uniformly."""
        probs = StationaryPolicy.uniform(mdp).probs.copy()
        items = choice.items() if isinstance(choice, Mapping) else enumerate(choice)
        for s, a in items:
            si = mdp.state_index(s)
            ai = mdp.action_index(si, a)
            probs[mdp.offsets[si]:mdp.offsets[si + 1]] = 0.0
            probs[mdp.pair_index(si, ai)] = 1.0
        return cls(mdp.offsets, probs)

    @classmethod
    def from_rows(cls, mdp: Mdp, rows: Mapping) -> "StationaryPolicy":
        """``rows`` maps state -> {action: prob}; unlisted states play uniformly."""
        probs = StationaryPolicy.uniform(mdp).probs.copy()
        for s, dist in rows.items():
            si = mdp.state_index(s)
            probs[mdp.offsets[si]:mdp.offsets[si + 1]] = 0.0
            for a, p in dist.items():
                probs[mdp.pair_index(si, mdp.action_index(si, a))] = float(p)
        return cls(mdp.offsets, probs)


def check_policy(mdp: Mdp, pi: StationaryPolicy) -> None:
    if pi.offsets.shape != mdp.offsets.shape or np.any(pi.offsets != mdp.offsets):
        raise InvalidPolicy("policy action sets do not match the MDP")


def induced_chain(mdp: Mdp, pi: StationaryPolicy) -> MarkovChain:
    """``T_pi(s'|s) = sum_a T(s'|s,a) pi(a|s)``."""
    check_policy(mdp, pi)
    T = np.add.reduceat(mdp.kernel * pi.probs[:, None], mdp.offsets[:-1], axis=0)
    return MarkovChain(T, mdp.beta, mdp.state_names)
