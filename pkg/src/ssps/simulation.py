"""Monte Carlo evaluation of stationary policies.

Every path owns a Philox stream keyed by (master seed, path index), so results do not
depend on how paths are grouped into chunks or spread over threads. A path first draws one
uniform for its initial state, then two uniforms per step (action, successor).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidParameter
from .graph import classify_mdp
from .mdp import Mdp, StationaryPolicy, check_policy

TRANSIENT_SET = "_transient"


@dataclass(frozen=True)
class SimConfig:
    paths: int = 5000
    horizon: int = 100_000
    seed: int = 0
    workers: int = 1
    chunk: int = 256
    block: int = 4096
    checkpoints: tuple = ()

    def __post_init__(self):
        if self.paths < 1 or self.horizon < 1:
            raise InvalidParameter("paths and horizon must be positive")
        if self.chunk < 1 or self.block < 1 or self.workers < 1:
            raise InvalidParameter("chunk, block and workers must be positive")
        if any(not 1 <= c <= self.horizon for c in self.checkpoints):
            raise InvalidParameter("checkpoints must lie in [1, horizon]")


@dataclass
class Estimate:
    mean: float
    se: float

    def as_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se}


@dataclass
class EmpiricalReport:
    """Ensemble averages with standard errors of the mean.

    ``steady[L]`` is the fraction of the first ``horizon`` steps spent on label L,
    ``reward`` the average reward per step, ``visits[L]`` the number of steps spent on L
    (``_transient`` is the complement of the TSCCs), and ``entry_time`` the mean first
    time a TSCC state is occupied over the paths that got there.
    """

    paths: int
    horizon: int
    seed: int
    steady: dict
    reward: Estimate
    visits: dict
    entry_time: Estimate
    entered: int
    checkpoints: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "paths": self.paths,
            "horizon": self.horizon,
            "seed": self.seed,
            "backend": _kernels.backend_name(),
            "steady": {k: v.as_dict() for k, v in self.steady.items()},
            "reward": self.reward.as_dict(),
            "visits": {k: v.as_dict() for k, v in self.visits.items()},
            "entry_time": self.entry_time.as_dict(),
            "entered": self.entered,
        }

    def curves_csv(self) -> str:
        """One row per checkpoint: n, mean reward, then mean J per label."""
        names = list(self.steady)
        lines = [",".join(["n", "reward"] + names)]
        for k, n in enumerate(self.checkpoints):
            row = [str(n), repr(float(self.curves["reward"][k]))]
            row += [repr(float(self.curves[name][k])) for name in names]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def path_rng(master_seed: int, path: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(path,))))


@dataclass(frozen=True)
class _Tables:
    act_cum: np.ndarray
    act_count: np.ndarray
    state_offsets: np.ndarray
    succ_cum: np.ndarray
    succ_next: np.ndarray
    succ_reward: np.ndarray
    succ_count: np.ndarray
    beta_cum: np.ndarray
    in_target: np.ndarray
    pair_label: np.ndarray
    label_names: tuple


def _tables(mdp: Mdp, pi: StationaryPolicy) -> _Tables:
    cls = classify_mdp(mdp)
    n, P = mdp.n_states, mdp.n_pairs
    max_a = mdp.max_actions
    act_cum = np.full((n, max_a), np.inf)
    act_count = np.zeros(n, dtype=np.int64)
    for s in range(n):
        row = pi.row(s)
        act_cum[s, : row.size] = np.cumsum(row)
        act_count[s] = row.size

    order = np.lexsort((mdp.t_next, mdp.t_pair))
    t_pair, t_next = mdp.t_pair[order], mdp.t_next[order]
    t_prob, t_rew = mdp.t_prob[order], mdp.t_reward[order]
    keep = t_prob > 0
    t_pair, t_next, t_prob, t_rew = t_pair[keep], t_next[keep], t_prob[keep], t_rew[keep]
    succ_count = np.bincount(t_pair, minlength=P).astype(np.int64)
    width = max(1, int(succ_count.max(initial=1)))
    succ_cum = np.full((P, width), np.inf)
    succ_next = np.zeros((P, width), dtype=np.int64)
    succ_reward = np.zeros((P, width))
    start = np.concatenate([[0], np.cumsum(succ_count)])
    for p in range(P):
        sl = slice(start[p], start[p + 1])
        k = sl.stop - sl.start
        succ_cum[p, :k] = np.cumsum(t_prob[sl])
        succ_next[p, :k] = t_next[sl]
        succ_reward[p, :k] = t_rew[sl]

    names = tuple(mdp.labels) + (TRANSIENT_SET,)
    pair_label = np.zeros((P, len(names)), dtype=np.bool_)
    for k, name in enumerate(mdp.labels):
        pair_label[:, k] = mdp.label_pair_mask(name)
    target = np.zeros(n, dtype=np.bool_)
    target[list(cls.recurrent)] = True
    pair_label[:, -1] = ~target[mdp.pair_state]
    return _Tables(act_cum, act_count, mdp.offsets[:-1].astype(np.int64), succ_cum, succ_next, succ_reward,
                   succ_count, np.cumsum(mdp.beta), target, pair_label, names)


def _initial_state(beta_cum: np.ndarray, u: float) -> int:
    return int(min(np.searchsorted(beta_cum, u, side="right"), beta_cum.size - 1))


def _run_chunk(tab: _Tables, cfg: SimConfig, first: int, count: int, cps: np.ndarray):
    rngs = [path_rng(cfg.seed, first + i) for i in range(count)]
    state = np.array([_initial_state(tab.beta_cum, g.random()) for g in rngs], dtype=np.int64)
    n_labels = len(tab.label_names)
    counts = np.zeros((count, n_labels), dtype=np.int64)
    reward = np.zeros(count)
    tau = np.full(count, -1, dtype=np.int64)
    cp_labels = np.zeros((count, cps.size, n_labels), dtype=np.int64)
    cp_reward = np.zeros((count, cps.size))
    for t0 in range(0, cfg.horizon, cfg.block):
        steps = min(cfg.block, cfg.horizon - t0)
        u = np.stack([g.random((steps, 2)) for g in rngs])
        _kernels.simulate_block(state, u, t0, cfg.horizon, tab.act_cum, tab.act_count, tab.state_offsets,
                                tab.succ_cum, tab.succ_next, tab.succ_reward, tab.succ_count, tab.in_target,
                                tab.pair_label, cps, counts, reward, tau, cp_labels, cp_reward)
    return counts, reward, tau, cp_labels, cp_reward


def _estimate(values: np.ndarray) -> Estimate:
    n = values.size
    se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return Estimate(float(values.mean()) if n else float("nan"), se)


def ensemble_metrics(mdp: Mdp, pi: StationaryPolicy, cfg: SimConfig = SimConfig()) -> EmpiricalReport:
    check_policy(mdp, pi)
    tab = _tables(mdp, pi)
    cps = np.array(sorted(set(int(c) for c in cfg.checkpoints)), dtype=np.int64)
    starts = list(range(0, cfg.paths, cfg.chunk))
    jobs = [(s, min(cfg.chunk, cfg.paths - s)) for s in starts]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda j: _run_chunk(tab, cfg, j[0], j[1], cps), jobs))
    else:
        parts = [_run_chunk(tab, cfg, s, c, cps) for s, c in jobs]
    counts = np.concatenate([p[0] for p in parts])
    reward = np.concatenate([p[1] for p in parts])
    tau = np.concatenate([p[2] for p in parts])
    cp_labels = np.concatenate([p[3] for p in parts])
    cp_reward = np.concatenate([p[4] for p in parts])

    n = cfg.horizon
    steady = {name: _estimate(counts[:, k] / n) for k, name in enumerate(tab.label_names)}
    visits = {name: _estimate(counts[:, k].astype(float)) for k, name in enumerate(tab.label_names)}
    entered = tau >= 0
    curves = {}
    if cps.size:
        curves["reward"] = (cp_reward / cps).mean(axis=0)
        for k, name in enumerate(tab.label_names):
            curves[name] = (cp_labels[:, :, k] / cps).mean(axis=0)
    return EmpiricalReport(cfg.paths, n, cfg.seed, steady, _estimate(reward / n), visits,
                           _estimate(tau[entered].astype(float)), int(entered.sum()), cps.tolist(), curves)


@dataclass
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray


def sample_trajectory(mdp: Mdp, pi: StationaryPolicy, seed: int, horizon: int, path: int = 0) -> Trajectory:
    """States S_0..S_{h-1}, actions A_0..A_{h-1} and rewards; the same stream as ensemble path ``path``."""
    check_policy(mdp, pi)
    if horizon < 1:
        raise InvalidParameter("horizon must be positive")
    tab = _tables(mdp, pi)
    g = path_rng(seed, path)
    s = _initial_state(tab.beta_cum, g.random())
    u = g.random((horizon, 2))
    states = np.empty(horizon, dtype=np.int64)
    actions = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon)
    for t in range(horizon):
        states[t] = s
        j = min(int((u[t, 0] >= tab.act_cum[s]).sum()), tab.act_count[s] - 1)
        p = tab.state_offsets[s] + j
        q = min(int((u[t, 1] >= tab.succ_cum[p]).sum()), tab.succ_count[p] - 1)
        actions[t] = j
        rewards[t] = tab.succ_reward[p, q]
        s = int(tab.succ_next[p, q])
    return Trajectory(states, actions, rewards)
