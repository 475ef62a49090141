import itertools
import sys

import numpy as np
import pytest
from scipy.optimize import linprog

from ssps.chain import expected_average_reward, occupation_measure
from ssps.lp.model import EQ, GE, LE
from ssps.mdp import MarkovChain, Mdp, StationaryPolicy


def random_mdp(rng, n=6, max_actions=3, max_succ=2, reward=True) -> Mdp:
    """Small random MDP; beta puts mass on the first two states."""
    names = [f"s{i + 1}" for i in range(n)]
    actions, transitions = [], []
    for s in range(n):
        k = int(rng.integers(1, max_actions + 1))
        acts = [f"a{j + 1}" for j in range(k)]
        actions.append(acts)
        for a in acts:
            succ = rng.choice(n, size=int(rng.integers(1, max_succ + 1)), replace=False)
            w = rng.random(succ.size) + 0.1
            w /= w.sum()
            r = float(rng.random()) if reward else 0.0
            transitions += [(s, a, int(t), float(p), r) for t, p in zip(succ, w)]
    beta = np.zeros(n)
    beta[: min(2, n)] = 1.0 / min(2, n)
    return Mdp.build(names, actions, transitions, beta)


def random_chain(rng, n, density=0.3, absorbing=0.2) -> MarkovChain:
    T = np.zeros((n, n))
    for s in range(n):
        if rng.random() < absorbing:
            T[s, s] = 1.0
            continue
        mask = rng.random(n) < density
        if not mask.any():
            mask[rng.integers(n)] = True
        w = rng.random(n) * mask
        T[s] = w / w.sum()
    beta = rng.random(n)
    return MarkovChain(T, beta / beta.sum())


def cesaro_average(T: np.ndarray, doublings: int = 22) -> np.ndarray:
    """(1/N) * sum_{k<N} T^k for N = 2**doublings, using S_2N = S_N + T^N S_N.

    The truncation error of a Cesaro partial sum decays like 1/N, so many terms are needed
    before it can serve as an oracle at the 1e-3 level on slowly mixing chains.
    """
    S, P = np.eye(T.shape[0]), T.copy()
    for _ in range(doublings):
        S = S + P @ S
        P = P @ P
    return S / 2.0 ** doublings


def deterministic_policies(mdp: Mdp):
    for choice in itertools.product(*[range(mdp.n_actions(s)) for s in range(mdp.n_states)]):
        probs = np.zeros(mdp.n_pairs)
        for s, a in enumerate(choice):
            probs[mdp.offsets[s] + a] = 1.0
        yield StationaryPolicy(mdp.offsets, probs)


def average_reward(mdp, pi) -> float:
    return expected_average_reward(mdp, pi, occupation_measure(mdp, pi))


def highs_solve(lp):
    """Solve a LinearProgram with HiGHS (maximization). Returns the scipy result."""
    A, senses, b = lp.matrix()
    rows_ub = [A[i] if senses[i] == LE else -A[i] for i in range(len(b)) if senses[i] != EQ]
    rhs_ub = [b[i] if senses[i] == LE else -b[i] for i in range(len(b)) if senses[i] != EQ]
    eq = [i for i in range(len(b)) if senses[i] == EQ]
    kw = {}
    if rows_ub:
        kw.update(A_ub=np.array(rows_ub), b_ub=np.array(rhs_ub))
    if eq:
        kw.update(A_eq=A[eq], b_eq=b[eq])
    bounds = [(None if np.isinf(l) else l, None if np.isinf(h) else h) for l, h in zip(lp.lo, lp.hi)]
    return linprog(-np.array(lp.objective), bounds=bounds, method="highs", **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(n))
