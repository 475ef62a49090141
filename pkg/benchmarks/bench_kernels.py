"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--paths 256] [--steps 20000] [--repeat 3]

Both paths get identical inputs; the script checks that they produce identical outputs
before reporting timings. Requires numba (the fallback is what SSPS_DISABLE_NUMBA selects).
"""
import argparse
import time

import numpy as np

from ssps import _kernels
from ssps.environments import fig13_mdp, frozen_islands
from ssps.graph import transition_graph
from ssps.lp.synthesis import synthesize
from ssps.simulation import _tables, path_rng


def _sim_inputs(mdp, pi, paths, steps):
    tab = _tables(mdp, pi)
    rngs = [path_rng(0, i) for i in range(paths)]
    state = np.array([min(np.searchsorted(tab.beta_cum, g.random(), side="right"), mdp.n_states - 1)
                      for g in rngs], dtype=np.int64)
    u = np.stack([g.random((steps, 2)) for g in rngs])
    return tab, state, u


def _run_sim(kernel, tab, state0, u):
    paths, steps = u.shape[:2]
    L = len(tab.label_names)
    cps = np.zeros(0, dtype=np.int64)
    out = [state0.copy(), np.zeros((paths, L), np.int64), np.zeros(paths), np.full(paths, -1, np.int64),
           np.zeros((paths, 0, L), np.int64), np.zeros((paths, 0))]
    kernel(out[0], u, 0, steps, tab.act_cum, tab.act_count, tab.state_offsets, tab.succ_cum, tab.succ_next,
           tab.succ_reward, tab.succ_count, tab.in_target, tab.pair_label, cps, out[1], out[2], out[3], out[4],
           out[5])
    return out


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=256)
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is unavailable or disabled; nothing to compare")

    m = fig13_mdp()
    pi = synthesize(m, "cpu").policy
    tab, state0, u = _sim_inputs(m, pi, args.paths, args.steps)
    _run_sim(_kernels.simulate_block, tab, state0, u[:, :10])  # compile outside the timing
    t_jit, a = _best(lambda: _run_sim(_kernels.simulate_block, tab, state0, u), args.repeat)
    t_np, b = _best(lambda: _run_sim(_kernels.simulate_block_numpy, tab, state0, u), args.repeat)
    assert all(np.array_equal(x, y) for x, y in zip(a, b)), "kernels disagree"
    steps = args.paths * args.steps

    g = transition_graph(frozen_islands(32))
    indptr, indices = g.indptr, g.indices
    _kernels.scc_labels(g.n, indptr, indices)
    t_scc_jit, c1 = _best(lambda: _kernels.scc_labels(g.n, indptr, indices), args.repeat)
    t_scc_py, c2 = _best(lambda: _kernels.scc_labels_py(g.n, indptr, indices), args.repeat)
    assert np.array_equal(c1[0], c2[0]), "SCC kernels disagree"

    print(f"{'kernel':32s} {'numba':>12s} {'fallback':>12s} {'speedup':>8s}")
    print(f"{'simulate (fig13 CPU policy)':32s} {t_jit:11.3f}s {t_np:11.3f}s {t_np / t_jit:7.1f}x"
          f"   {steps / t_jit / 1e6:.1f} vs {steps / t_np / 1e6:.1f} Msteps/s")
    print(f"{'scc (frozen_islands(32) graph)':32s} {t_scc_jit:11.4f}s {t_scc_py:11.4f}s {t_scc_py / t_scc_jit:7.1f}x")


if __name__ == "__main__":
    main()
