"""Hot loops: SCC labelling and trajectory stepping.

The loop bodies are plain Python over numpy arrays. When numba is importable and
``SSPS_DISABLE_NUMBA`` is unset (or "0"), they are compiled with ``@njit``; otherwise
the trajectory stepper falls back to a vectorized numpy implementation that consumes the
same uniforms and therefore produces bit-identical results.
"""
from __future__ import annotations

import os

import numpy as np

_NJIT_OPTIONS = dict(nogil=True, cache=True, fastmath=False)


def _numba_requested() -> bool:
    return os.environ.get("SSPS_DISABLE_NUMBA", "0").strip().lower() in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by SSPS_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def scc_labels_py(n, indptr, indices):
    """Iterative Tarjan. Returns (component id per vertex, component count).

    Component ids are assigned in completion order, which is a reverse topological
    order of the condensation (sink components first).
    """
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=np.bool_)
    comp = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    call_v = np.empty(n, dtype=np.int64)
    call_e = np.empty(n, dtype=np.int64)
    sp = 0
    counter = 0
    n_comp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        depth = 0
        call_v[0] = root
        call_e[0] = indptr[root]
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        on_stack[root] = True
        while depth >= 0:
            v = call_v[depth]
            e = call_e[depth]
            if e < indptr[v + 1]:
                call_e[depth] = e + 1
                w = indices[e]
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    on_stack[w] = True
                    depth += 1
                    call_v[depth] = w
                    call_e[depth] = indptr[w]
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            else:
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        w = stack[sp]
                        on_stack[w] = False
                        comp[w] = n_comp
                        if w == v:
                            break
                    n_comp += 1
                depth -= 1
                if depth >= 0:
                    u = call_v[depth]
                    if low[v] < low[u]:
                        low[u] = low[v]
    return comp, n_comp


def simulate_block_py(state, uniforms, t0, horizon, act_cum, act_count, state_offsets,
                      succ_cum, succ_next, succ_reward, succ_count, in_target,
                      pair_label, checkpoints, counts, reward_sum, tau,
                      cp_labels, cp_reward):
    """Advance every path in a chunk through one block of uniforms.

    ``uniforms[i, t, 0]`` picks the action and ``uniforms[i, t, 1]`` the successor. Visits
    are counted per label at each step (the state occupied at time t with the action taken),
    so time 0 counts the initial state. ``tau`` is the first time a target state is occupied.
    Checkpoint snapshots are taken after ``checkpoints[k]`` steps.
    """
    n_paths = state.shape[0]
    n_steps = uniforms.shape[1]
    n_labels = pair_label.shape[1]
    n_cp = checkpoints.shape[0]
    for i in range(n_paths):
        s = state[i]
        # next checkpoint index for this block
        k = 0
        while k < n_cp and checkpoints[k] <= t0:
            k += 1
        for t in range(n_steps):
            step = t0 + t
            if step >= horizon:
                break
            if tau[i] < 0 and in_target[s]:
                tau[i] = step
            base = act_count[s]
            j = 0
            u = uniforms[i, t, 0]
            while j < base - 1 and u >= act_cum[s, j]:
                j += 1
            p = state_offsets[s] + j
            for l in range(n_labels):
                if pair_label[p, l]:
                    counts[i, l] += 1
            m = succ_count[p]
            q = 0
            u = uniforms[i, t, 1]
            while q < m - 1 and u >= succ_cum[p, q]:
                q += 1
            reward_sum[i] += succ_reward[p, q]
            s = succ_next[p, q]
            while k < n_cp and checkpoints[k] == step + 1:
                for l in range(n_labels):
                    cp_labels[i, k, l] = counts[i, l]
                cp_reward[i, k] = reward_sum[i]
                k += 1
        state[i] = s


def simulate_block_numpy(state, uniforms, t0, horizon, act_cum, act_count, state_offsets,
                         succ_cum, succ_next, succ_reward, succ_count, in_target,
                         pair_label, checkpoints, counts, reward_sum, tau,
                         cp_labels, cp_reward):
    """Vectorized-over-paths twin of :func:`simulate_block_py` with identical arithmetic."""
    n_paths = state.shape[0]
    n_steps = uniforms.shape[1]
    rows = np.arange(n_paths)
    label_rows = pair_label.astype(np.int64)
    s = state.copy()
    cp_at = {int(c): k for k, c in enumerate(checkpoints)}
    for t in range(n_steps):
        step = t0 + t
        if step >= horizon:
            break
        fresh = (tau < 0) & in_target[s]
        tau[fresh] = step
        nact = act_count[s]
        u = uniforms[:, t, 0]
        j = (u[:, None] >= act_cum[s]).sum(axis=1)
        j = np.minimum(j, nact - 1)
        p = state_offsets[s] + j
        counts += label_rows[p]
        m = succ_count[p]
        u = uniforms[:, t, 1]
        q = (u[:, None] >= succ_cum[p]).sum(axis=1)
        q = np.minimum(q, m - 1)
        reward_sum += succ_reward[p, q]
        s = succ_next[p, q]
        k = cp_at.get(step + 1)
        if k is not None:
            cp_labels[rows, k, :] = counts
            cp_reward[rows, k] = reward_sum
    state[:] = s


if HAVE_NUMBA:
    scc_labels = _njit(**_NJIT_OPTIONS)(scc_labels_py)
    simulate_block = _njit(**_NJIT_OPTIONS)(simulate_block_py)
else:
    scc_labels = scc_labels_py
    simulate_block = simulate_block_numpy


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
