import numpy as np
import pytest

from conftest import average_reward, deterministic_policies, highs_solve, random_mdp
from ssps.chain import occupation_measure, verify
from ssps.environments import fig6_mdp, fig13_mdp, frozen_islands, three_state, toll_collector
from ssps.errors import BudgetExhausted, Infeasible, InvalidSpec
from ssps.graph import classify_mdp, policy_class
from ssps.lp import SimplexSolver, VarKey, X, Y
from ssps.lp.programs import (
    SynthesisConfig, build_kallenberg, build_lp0, build_lp1, build_lp2, build_lp3, build_q0,
    build_unichain_lp, pair_values,
)
from ssps.lp.synthesis import extract_policy, synthesize, synthesize_cpu
from ssps.mdp import TRANSIENT, Spec, StationaryPolicy


def test_q0_dimensions_three_state():
    lp = build_q0(three_state("plain"))
    assert (lp.n_rows, lp.n_vars) == (7, 12)
    assert lp.tags() == {"(i)": 3, "(ii)": 3, "(iii)": 1}


def test_lp2_has_all_flow_families():
    lp = build_lp2(fig13_mdp())
    tags = lp.tags()
    for t in ("(i)", "(ii)", "(iii)", "(iv)", "(vi)", "(vii)", "(viii)", "(ix)", "(x)", "(xi)", "(xii)", "(xiii)"):
        assert tags.get(t, 0) > 0, t


def test_lp1_positivity_is_a_bound():
    m = fig13_mdp()
    lp = build_lp1(m, cfg=SynthesisConfig(epsilon_pos=1e-3))
    keys = lp.bound_tags["(v)'"]
    assert len(keys) == sum(m.n_actions(s) for s in classify_mdp(m).recurrent)
    assert all(lp.lo[lp.index(k)] == 1e-3 for k in keys)


@pytest.mark.parametrize("delta", [0.1, 0.01, 0.001])
def test_lp1_three_state_closed_form(delta):
    m = three_state("bounded")
    res = synthesize(m, "ep", SynthesisConfig(epsilon_pos=delta))
    assert res.objective == pytest.approx(0.5 - 1.2 * delta, abs=1e-8)
    pi = res.policy
    assert pi.prob(1, 0) == pytest.approx(delta / (1 - 2 * delta), abs=1e-8)
    assert pi.prob(1, 1) == pytest.approx((1 - 3 * delta) / (1 - 2 * delta), abs=1e-8)
    assert pi.row(2) == pytest.approx([0.5, 0.5], abs=1e-8)


def _envs():
    return {
        "three-state": three_state("bounded"),
        "fig6": fig6_mdp(),
        "fig13": fig13_mdp(),
        "fig13-pairs": fig13_mdp("pairs"),
        "toll3": toll_collector(3, 3, 0.05),
        "fi8": frozen_islands(8),
    }


@pytest.mark.parametrize("name", list(_envs()))
def test_objectives_match_highs(name):
    m = _envs()[name]
    cls = classify_mdp(m)
    builders = [build_lp0(m, cls), build_lp1(m, cls), build_lp3(m, cls), build_kallenberg(m)]
    if name != "fi8":
        builders.append(build_lp2(m, cls))
    for lp in builders:
        ours = SimplexSolver().solve(lp)
        ref = highs_solve(lp)
        assert ref.status == 0 and ours.optimal, lp.name
        assert ours.objective == pytest.approx(-ref.fun, abs=1e-7), lp.name


def test_extract_policy_rules():
    m = three_state("plain")
    x = np.array([0, 0, 0.0, 0.3, 0.2, 0.2])
    y = np.array([0.6, 0.2, 0, 0, 0, 0])
    pi = extract_policy(m, x, y)
    assert pi.row(0) == pytest.approx([0.75, 0.25])
    assert pi.row(1) == pytest.approx([0, 1])
    assert pi.row(2) == pytest.approx([0.5, 0.5])
    empty = extract_policy(m, np.zeros(6), np.zeros(6))
    assert empty.row(0) == pytest.approx([0.5, 0.5])
    first = extract_policy(m, np.zeros(6), np.zeros(6), SynthesisConfig(fill="first"))
    assert first.row(0) == pytest.approx([1, 0])
    noisy = extract_policy(m, np.array([0, 0, 1e-13, 0.5, 0.25, 0.25]), np.zeros(6))
    assert noisy.row(1) == pytest.approx([0, 1])


def test_cpu_on_fig13_takes_three_iterations():
    m = fig13_mdp()
    res = synthesize_cpu(m)
    assert res.iterations == 3
    assert res.trace[0].objective == pytest.approx(-highs_solve(build_lp3(m)).fun, abs=1e-9)
    assert [r.strongly_connected for r in res.trace][-1] == (True, True, True)
    rep = verify(m, res.policy, res.x, res.y)
    assert rep.policy_class.cpu and rep.all_specs_pass
    assert rep.correspondence_residual <= 1e-6


def test_budget_exhaustion():
    with pytest.raises(BudgetExhausted):
        synthesize_cpu(fig13_mdp(), cfg=SynthesisConfig(max_cut_iterations=1))


def test_contradictory_specs_are_infeasible():
    m = fig13_mdp().with_specs([Spec("gold1", 0.6, 1.0), Spec("gold2", 0.6, 1.0)], None)
    for mode, name in (("ep", "LP1"), ("cp", "LP2"), ("cpu", "LP3")):
        with pytest.raises(Infeasible) as info:
            synthesize(m, mode)
        assert info.value.lp_name == name and name in str(info.value)


def test_transient_spec_on_recurrent_state_is_rejected():
    m = fig13_mdp().with_specs([Spec("gold1", 1.0, 5.0, TRANSIENT)], None)
    with pytest.raises(InvalidSpec):
        build_lp3(m)


def test_three_state_brute_force():
    """Best deterministic CPU policy equals the CPU synthesis optimum and the LP3 bound."""
    m = three_state("bounded")
    cls = classify_mdp(m)
    best = max(average_reward(m, pi) for pi in deterministic_policies(m) if policy_class(m, pi, cls).cpu)
    lp3 = -highs_solve(build_lp3(m, cls)).fun
    cpu = synthesize(m, "cpu").objective
    assert best == pytest.approx(0.5)
    assert cpu == pytest.approx(best, abs=1e-9)
    assert lp3 >= cpu - 1e-12


def test_toll_collector_brute_force():
    m = toll_collector(3, 3, 0.0)
    best = max(average_reward(m, pi) for pi in deterministic_policies(m))
    assert synthesize(m, "cpu").objective == pytest.approx(best, abs=1e-6)


def test_unichain_lp_on_unichain_model():
    m = three_state("lp0")
    res = synthesize(m, "unichain")
    assert res.lp.tags()["(norm)"] == 1
    assert res.objective == pytest.approx(1.0)
    assert build_unichain_lp(m).n_vars == m.n_pairs


def test_kallenberg_counterexample():
    m = three_state("example1")
    res = synthesize(m, "kallenberg")
    rep = verify(m, res.policy, res.x, res.y)
    assert res.x[m.pair_index(1, 1)] == pytest.approx(0.5)
    assert rep.occupation.pairs[m.pair_index(1, 1)] == pytest.approx(1.0)
    assert rep.correspondence_residual >= 0.49


def test_lp0_optimum_without_correspondence():
    """A documented optimal LP0 point whose extracted policy splits mass 1/2, 1/2 instead of 1/3, 2/3."""
    m = three_state("lp0")
    lp = build_lp0(m)
    point = np.zeros(lp.n_vars)
    for (s, a, kind), v in {(1, 1, X): 1 / 3, (2, 1, X): 2 / 3, (1, 0, Y): 1 / 6}.items():
        point[lp.index(VarKey(kind, s, a))] = v
    assert lp.max_violation(point) <= 1e-12
    best = SimplexSolver().solve(lp)
    assert float(np.dot(lp.objective, point)) == pytest.approx(best.objective) == pytest.approx(1.0)
    x, y = (pair_values(m, lp, point, kind) for kind in (X, Y))
    rep = verify(m, extract_policy(m, x, y), x, y)
    assert rep.occupation.pairs[[m.pair_index(1, 1), m.pair_index(2, 1)]] == pytest.approx([0.5, 0.5])
    assert rep.correspondence_residual == pytest.approx(1 / 6)


def test_ep_occupation_measures_are_q0_feasible():
    """Occupation measures of EP policies satisfy Q0 for some y."""
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        m = random_mdp(rng, n=int(rng.integers(3, 7)))
        cls = classify_mdp(m)
        probs = rng.random(m.n_pairs) + 0.01
        probs /= np.repeat(np.add.reduceat(probs, m.offsets[:-1]), np.diff(m.offsets))
        pi = StationaryPolicy(m.offsets, probs)
        if not policy_class(m, pi, cls).ep:
            continue
        occ = occupation_measure(m, pi).pairs
        lp = build_q0(m, cls)
        for p in range(m.n_pairs):
            k = lp.index(VarKey(X, int(m.pair_state[p]), int(m.pair_action[p])))
            lp.lo[k] = lp.hi[k] = occ[p]
        assert SimplexSolver().solve(lp).optimal
        checked += 1


def test_cpu_feasible_points_correspond():
    """Any Q0 point whose extracted policy is CPU reproduces x as its occupation measure."""
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(150):
        m = random_mdp(rng, n=int(rng.integers(3, 8)))
        cls = classify_mdp(m)
        lp = build_q0(m, cls)
        lp.objective = list(rng.normal(size=lp.n_vars) * (np.arange(lp.n_vars) < m.n_pairs))
        sol = SimplexSolver().solve(lp)
        x = sol.values[: m.n_pairs]
        y = sol.values[m.n_pairs: 2 * m.n_pairs]
        pi = extract_policy(m, x, y)
        if policy_class(m, pi, cls).cpu:
            hits += 1
            assert np.abs(occupation_measure(m, pi).pairs - x).max() <= 1e-6
    assert hits > 30


@pytest.mark.parametrize("name", ["fig13", "fig13-pairs", "fi8"])
@pytest.mark.parametrize("mode", ["ep", "cp", "cpu"])
def test_modes_produce_their_policy_class(name, mode):
    m = _envs()[name]
    res = synthesize(m, mode)
    rep = verify(m, res.policy, res.x, res.y)
    assert getattr(rep.policy_class, mode)
    assert rep.correspondence_residual <= 1e-6
    assert rep.visits_residual <= 1e-6
    assert rep.all_specs_pass


def test_epsilon_monotone_on_fig13():
    m = fig13_mdp()
    vals = [synthesize(m, "ep", SynthesisConfig(epsilon_pos=e)).objective for e in (1e-2, 1e-3, 1e-4, 1e-5)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
