"""Exact limiting behaviour of finite Markov chains and of MDPs under stationary policies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, NonTransientBlock, NotUnichain
from .graph import PolicyClass, StateClassification, classify_chain, classify_mdp, policy_class
from .mdp import STEADY, TRANSIENT, MarkovChain, Mdp, Spec, StationaryPolicy, check_policy, induced_chain

RESIDUAL_TOL = 1e-7
SPEC_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class CanonicalDecomposition:
    """Block form of a chain: closed classes first, then the non-closed states F.

    ``blocks[k]`` is the transition block of ``classes[k]``, ``Z`` the block of F to
    itself and ``couplings[k]`` the block from F into ``classes[k]``.
    """

    classes: tuple
    F: tuple
    blocks: tuple
    Z: np.ndarray
    couplings: tuple
    perm: np.ndarray

    def permuted_matrix(self, chain: MarkovChain) -> np.ndarray:
        return chain.T[np.ix_(self.perm, self.perm)]

    def restore(self, permuted: np.ndarray) -> np.ndarray:
        out = np.empty_like(permuted)
        out[np.ix_(self.perm, self.perm)] = permuted
        return out


def canonical_form(chain: MarkovChain, cls: StateClassification | None = None) -> CanonicalDecomposition:
    cls = cls or classify_chain(chain)
    classes = tuple(cls.closed_classes)
    closed = {s for c in classes for s in c}
    F = tuple(s for s in range(chain.n_states) if s not in closed)
    T = chain.T
    blocks = tuple(T[np.ix_(c, c)].copy() for c in classes)
    Z = T[np.ix_(F, F)].copy()
    couplings = tuple(T[np.ix_(F, c)].copy() for c in classes)
    perm = np.array([s for c in classes for s in c] + list(F), dtype=np.int64)
    return CanonicalDecomposition(classes, F, blocks, Z, couplings, perm)


def class_stationary_distribution(Tk: np.ndarray) -> np.ndarray:
    """Unique eta with eta^T T_k = eta^T and sum(eta) = 1 via least squares on the stacked system."""
    Tk = np.asarray(Tk, dtype=float)
    k = Tk.shape[0]
    A = np.vstack([np.eye(k) - Tk.T, np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    eta, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < k:
        raise NotUnichain(f"stationary system has rank {rank} < {k}: more than one recurrent class")
    residual = float(np.abs(A @ eta - b).max())
    if residual > RESIDUAL_TOL:
        raise NotUnichain(f"stationary system residual {residual:.3g} exceeds {RESIDUAL_TOL}")
    eta[np.abs(eta) < 1e-15] = 0.0
    return eta


def absorption_probabilities(Z: np.ndarray, L: np.ndarray) -> np.ndarray:
    """``(I - Z)^{-1} L e``; ``L`` may hold several classes as a list of blocks or columns."""
    Z = np.asarray(Z, dtype=float)
    if isinstance(L, (list, tuple)):
        rhs = np.column_stack([np.asarray(b, dtype=float).sum(axis=1) for b in L]) if L else np.zeros((Z.shape[0], 0))
        return _solve_transient(Z, rhs)
    L = np.asarray(L, dtype=float)
    return _solve_transient(Z, L.sum(axis=1))


def _solve_transient(Z: np.ndarray, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
    n = Z.shape[0]
    if n == 0:
        return np.zeros_like(rhs, dtype=float)
    M = np.eye(n) - Z
    if transpose:
        M = M.T
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        raise NonTransientBlock("I - Z is singular") from None
    if not np.all(np.isfinite(sol)) or np.abs(M @ sol - rhs).max(initial=0.0) > 1e-8 * max(1.0, np.abs(sol).max(initial=0.0)):
        raise NonTransientBlock("I - Z is numerically singular")
    return sol


def stationary_matrix(chain: MarkovChain, cls: StateClassification | None = None) -> np.ndarray:
    """Cesaro limit assembled block by block: no matrix powers are taken."""
    cls = cls or classify_chain(chain)
    dec = canonical_form(chain, cls)
    n = chain.n_states
    Tinf = np.zeros((n, n))
    etas = [class_stationary_distribution(b) for b in dec.blocks]
    for c, eta in zip(dec.classes, etas):
        Tinf[np.ix_(c, c)] = np.tile(eta, (len(c), 1))
    if dec.F and dec.classes:
        # every non-closed state drains into some closed class, so I - Z is nonsingular
        P = absorption_probabilities(dec.Z, list(dec.couplings))
        F = list(dec.F)
        for k, (c, eta) in enumerate(zip(dec.classes, etas)):
            Tinf[np.ix_(F, c)] = np.outer(P[:, k], eta)
    return Tinf


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    pairs: np.ndarray
    states: np.ndarray


@dataclass(frozen=True, eq=False)
class TransientVisits:
    states: np.ndarray
    pairs: np.ndarray


def occupation_measure(mdp: Mdp, pi: StationaryPolicy) -> OccupationMeasure:
    """``Pr(s,a) = (beta^T T_inf)_s pi(a|s)``."""
    chain = induced_chain(mdp, pi)
    marginal = mdp.beta @ stationary_matrix(chain)
    marginal[np.abs(marginal) < 1e-15] = 0.0
    pairs = marginal[mdp.pair_state] * pi.probs
    return OccupationMeasure(pairs, marginal)


def expected_average_reward(mdp: Mdp, pi: StationaryPolicy, occ: OccupationMeasure | None = None) -> float:
    occ = occ or occupation_measure(mdp, pi)
    return float(occ.pairs @ mdp.expected_reward)


def expected_visits(mdp: Mdp, pi: StationaryPolicy) -> TransientVisits:
    """Expected number of visits to each transient state of the induced chain.

    Isolated states get zero; recurrent states are reported as zero as well (their visit
    count is infinite, and they are outside the domain of this quantity).
    """
    check_policy(mdp, pi)
    chain = induced_chain(mdp, pi)
    cls = classify_chain(chain)
    trans = list(cls.transient)
    zeta = np.zeros(mdp.n_states)
    if trans:
        Z = chain.T[np.ix_(trans, trans)]
        zeta[trans] = _solve_transient(Z, mdp.beta[trans], transpose=True)
    zeta[np.abs(zeta) < 1e-15] = 0.0
    return TransientVisits(zeta, zeta[mdp.pair_state] * pi.probs)


@dataclass(frozen=True)
class SpecResult:
    spec: Spec
    attained: float
    satisfied: bool
    slack: float


def _label_mass(mdp: Mdp, label: str, pair_values: np.ndarray) -> float:
    return float(pair_values[mdp.label_pair_mask(label)].sum())


def check_transient_labels(mdp: Mdp, specs, cls: StateClassification) -> None:
    rec = set(cls.recurrent)
    for sp in specs:
        if sp.kind == TRANSIENT and mdp.label_states(sp.label) & rec:
            raise InvalidSpec(f"transient spec on {sp.label!r} touches a terminal component")


def check_specs(mdp: Mdp, occ: OccupationMeasure, visits: TransientVisits, specs=None,
                cls: StateClassification | None = None, tol: float = SPEC_TOL) -> list[SpecResult]:
    """Attained value and pass/fail per spec; slack is the distance to the nearest bound."""
    specs = mdp.specs if specs is None else specs
    if any(sp.kind == TRANSIENT for sp in specs):
        check_transient_labels(mdp, specs, cls or classify_mdp(mdp))
    out = []
    for sp in specs:
        values = occ.pairs if sp.kind == STEADY else visits.pairs
        attained = _label_mass(mdp, sp.label, values)
        slack = min(attained - sp.lo, sp.hi - attained)
        out.append(SpecResult(sp, attained, bool(slack >= -tol), slack))
    return out


@dataclass(frozen=True, eq=False)
class VerificationReport:
    occupation: OccupationMeasure
    visits: TransientVisits
    average_reward: float
    spec_results: tuple
    policy_class: PolicyClass
    correspondence_residual: float | None = None
    visits_residual: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def all_specs_pass(self) -> bool:
        return all(r.satisfied for r in self.spec_results)


def verify(mdp: Mdp, pi: StationaryPolicy, x_star: np.ndarray | None = None,
           y_star: np.ndarray | None = None, cls: StateClassification | None = None) -> VerificationReport:
    """Analytic verification of a policy, optionally against an LP solution (x*, y*) over pairs.

    The visits residual compares expected visits with y* over states outside the terminal
    components, where the two must agree for unichain-preserving policies.
    """
    cls = cls or classify_mdp(mdp)
    occ = occupation_measure(mdp, pi)
    visits = expected_visits(mdp, pi)
    results = tuple(check_specs(mdp, occ, visits, cls=cls))
    pclass = policy_class(mdp, pi, cls)
    corr = None if x_star is None else float(np.abs(occ.pairs - np.asarray(x_star)).max(initial=0.0))
    vres = None
    if y_star is not None:
        y_state = np.bincount(mdp.pair_state, weights=np.asarray(y_star), minlength=mdp.n_states)
        outside = list(cls.complement)
        vres = float(np.abs(visits.states[outside] - y_state[outside]).max(initial=0.0))
    return VerificationReport(occ, visits, expected_average_reward(mdp, pi, occ), results, pclass, corr, vres)
