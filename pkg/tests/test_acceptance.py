"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
Criterion 11 trains a model (tens of minutes on one core); the trained
checkpoint is kept in the pytest cache and reused when its configuration
matches.
"""

import os
import time
from dataclasses import replace
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from dynproof.agent import GreedyPolicy, RandomPolicy, TrainConfig, evaluate, sample_graphs, train
from dynproof.cli import main
from dynproof.env import ProverState, extract_proof, sequential_policy
from dynproof.features import build_class_table, featurize
from dynproof.graphs import Graph, complete, max_stable_set, random_gnp
from dynproof.hierarchy import check_lower_bound_theorem, enumerate_generators, solve_level, \
    verify_static_certificate
from dynproof.proof import parse_proof, verify
from dynproof.qnet import (ActionCache, init_params, load, q_all_actions, q_from_features,
                           q_value)

from conftest import fixture_text
from test_qnet import _real_samples, gradient_error, permute_action, permuted_state, random_state

TABLE = build_class_table(2)
E = len(TABLE)

STATIC_L3_N15 = Fraction(501, 100)   # reference level-3 mean at n = 15
RANDOM_N15 = 5.91                    # reference random-prover mean at n = 15


@lru_cache(maxsize=None)
def _static(n, edges, level):
    bound, cert = solve_level(Graph(n, list(edges)), level)
    return bound, cert


def static(g, level):
    return _static(g.n, tuple(g.sorted_edges()), level)


def n15_graphs():
    return sample_graphs(20, 15, seed=0, stream="static-n15")


def random_episode(g, seed, horizon=100):
    s = ProverState(g, 2, horizon)
    pol = RandomPolicy(seed)
    pol.reset(s)
    while s.step < horizon and s.legal_actions():
        s.apply(pol(s))
    return s


# 1 ---------------------------------------------------------------------------

def test_c01_golden_proofs(criterion, capsys):
    details, ok = [], True
    expect = {"cycle7_table2.txt": (3, 10), "petersen.txt": (4, 42)}
    for name, (bound, nsteps) in expect.items():
        with resources.as_file(resources.files("dynproof").joinpath("fixtures", name)) as path:
            t0 = time.perf_counter()
            code = main(["verify", "--proof", str(path)])
            dt = time.perf_counter() - t0
        capsys.readouterr()
        trace = parse_proof(fixture_text(name))
        lams = {lam for _, lam in trace.combination}
        good = (code == 0 and trace.claimed_bound == bound and len(trace.steps) == nsteps
                and dt < 1.0)
        if name == "petersen.txt":
            good = good and lams <= {Fraction(1, 5), Fraction(2, 5), Fraction(3, 5)}
        ok &= good
        details.append(f"{name} exit {code} bound {trace.claimed_bound} steps {nsteps} {dt:.2f}s")
    criterion(1, ok, "; ".join(details))
    assert ok


# 2 ---------------------------------------------------------------------------

def test_c02_complete_graphs(criterion):
    t0 = time.perf_counter()
    ok, notes = True, []
    for n in range(3, 11):
        s = ProverState(complete(n), 2, 100)
        while True:
            a = sequential_policy(s)
            if a is None:
                break
            s.apply(a)
        trace = extract_proof(s)
        deg = max(e.poly.degree() for e in s.memory)
        good = s.bound == 1 and s.step == n - 1 and deg <= 2 and verify(trace).ok
        ok &= good
        if not good:
            notes.append(f"K{n}: bound {s.bound} steps {s.step} degree {deg}")
    dt = time.perf_counter() - t0
    ok &= dt < 5.0
    criterion(2, ok, f"K3..K10 bound 1 in n-1 steps, {dt:.2f}s " + " ".join(notes))
    assert ok


# 3 ---------------------------------------------------------------------------

def test_c03_static_hierarchy_n15(criterion):
    t0 = time.perf_counter()
    graphs = n15_graphs()
    l2 = [static(g, 2)[0] for g in graphs]
    l3 = [static(g, 3)[0] for g in graphs]
    certs_ok = all(verify_static_certificate(static(g, l)[1]).ok for g in graphs for l in (2, 3))
    dt = time.perf_counter() - t0
    mean3 = sum(l3, Fraction(0)) / len(l3)
    ok = (all(b == Fraction(15, 2) for b in l2) and abs(mean3 - STATIC_L3_N15) <= Fraction(1, 5)
          and certs_ok and dt < 600)
    criterion(3, ok, f"level 2 values {sorted(set(map(str, l2)))}; level 3 mean {float(mean3):.3f} "
                     f"(ref 5.01 +- 0.2); {dt:.0f}s")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_c04_lower_bound_theorem(criterion):
    checked, bad = 0, []
    graphs = list(n15_graphs()) + list(sample_graphs(10, 5, seed=4, stream="theorem", n_max=10))
    for g in graphs:
        for level in (1, 2, 3):
            b = static(g, level)[0]
            checked += 1
            if not check_lower_bound_theorem(g, level, b):
                bad.append((g.n, level, b))
    equal = {n: static(complete(n), 2)[0] for n in (4, 6, 8)}
    ok = not bad and all(v == Fraction(n, 2) for n, v in equal.items())
    criterion(4, ok, f"{checked} solves with bound >= n/l; K4,K6,K8 level 2 = "
                     f"{', '.join(str(v) for v in equal.values())}")
    assert ok


# 5 ---------------------------------------------------------------------------

def seed_level2(g):
    """Apply every product of an axiom with a literal; memory then holds the
    level-2 generators except the constant 1, which is implied."""
    s = ProverState(g, 2, 10**6)
    n_ax = len(s.memory)
    for a in [a for a in s.legal_actions() if a.memory_index < n_ax]:
        if not s.contains(s.action_poly(a)):
            s.apply(a)
    return s


def test_c05_oracle_equivalence(criterion):
    graphs = sample_graphs(20, 5, seed=5, stream="oracle", n_max=10)
    mism = []
    for g in graphs:
        s = seed_level2(g)
        gens = {p for _, _, p in enumerate_generators(g.ctx, 2).generators}
        mem = set(s.memory_polys)
        assert mem <= gens and len(gens - mem) <= 1
        if s.bound != static(g, 2)[0]:
            mism.append((g.n, s.bound, static(g, 2)[0]))
    ok = not mism
    criterion(5, ok, f"20 graphs n<=10, seeded dynamic bound == static level 2; mismatches {mism}")
    assert ok


# 6 / 7 -------------------------------------------------------------------------

_EPISODES: list = []


def test_c06_soundness_sweep(criterion):
    t0 = time.perf_counter()
    graphs = sample_graphs(50, 5, seed=6, stream="soundness", n_max=14)
    bad = []
    for k, g in enumerate(graphs):
        alpha = max_stable_set(g)[0]
        s = random_episode(g, seed=k)
        _EPISODES.append(list(s.bounds))
        if min(s.bounds) < alpha or not verify(extract_proof(s)).ok:
            bad.append(k)
    dt = time.perf_counter() - t0
    ok = not bad and dt < 600
    criterion(6, ok, f"50 graphs n<=14, all bounds >= alpha and certificates verify; "
                     f"failures {bad}; {dt:.0f}s")
    assert ok


def test_c07_monotonicity(criterion):
    episodes = _EPISODES or [list(random_episode(g, k).bounds) for k, g in
                             enumerate(sample_graphs(10, 5, seed=6, stream="soundness", n_max=14))]
    dyn_ok = all(b1 <= b0 for bs in episodes for b0, b1 in zip(bs, bs[1:]))
    graphs = sample_graphs(8, 5, seed=7, stream="monotone", n_max=10)
    static_ok = True
    for g in graphs:
        vals = [static(g, level)[0] for level in range(1, 5)]
        static_ok &= all(b <= a for a, b in zip(vals, vals[1:]))
    ok = dyn_ok and static_ok
    criterion(7, ok, f"dynamic over {len(episodes)} episodes: {dyn_ok}; "
                     f"static levels 1..4 on 8 graphs n<=10: {static_ok}")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_c08_symmetry(criterion):
    params = init_params(E, 16, 0, TABLE)
    rng = np.random.default_rng(8)
    checked = fails = 0
    while checked < 100:
        g = random_gnp(int(rng.integers(5, 9)), float(rng.uniform(0.4, 0.9)), rng)
        s = random_state(g, int(rng.integers(0, 12)), int(rng.integers(1 << 30)))
        acts, q = q_all_actions(s, params)
        if not acts:
            continue
        k = int(rng.integers(len(acts)))
        perm = [int(v) for v in rng.permutation(g.n)]
        sp = permuted_state(s, perm)
        acts_p, q_p = q_all_actions(sp, params)
        relabel = dict(zip(acts_p, q_p))[permute_action(acts[k], perm, g.n)] == q[k]
        a = s.action_poly(acts[k])
        Zm = np.array([featurize(m, s.objective, a, TABLE) for m in s.memory_polys])
        Ze = np.array([featurize(e, s.objective, a, TABLE) for e in s.equalities]) if s.equalities else None
        q0 = q_value(s, acts[k], params, TABLE)
        shuffled = q_from_features(params, Zm[rng.permutation(len(Zm))],
                                   None if Ze is None else Ze[rng.permutation(len(Ze))])
        fails += not (relabel and q0 == q[k] and shuffled == q0)
        checked += 1
    criterion(8, fails == 0, f"100 (state, action, permutation) triples, bitwise mismatches {fails}")
    assert fails == 0


# 9 ---------------------------------------------------------------------------

def test_c09_gradient_check(criterion):
    rng = np.random.default_rng(9)
    samples = _real_samples(rng, 20)
    worst = max(gradient_error(init_params(E, 8, k, TABLE), smp, rng)
                for k, smp in enumerate(samples))
    criterion(9, worst < 1e-4, f"max relative error {worst:.2e} over 20 width-8 configurations")
    assert worst < 1e-4


# 10 --------------------------------------------------------------------------

def test_c10_cache_coherence(criterion):
    params = init_params(E, 16, 10, TABLE)
    rng = np.random.default_rng(10)
    compared = mism = 0
    for g in sample_graphs(10, 8, seed=10, stream="cache", n_max=12):
        s = ProverState(g, 2, 100)
        cache = ActionCache(s)
        while s.step < 100:
            acts, qc = q_all_actions(s, params, cache)
            if not acts:
                break
            acts_u, qu = q_all_actions(s, params)
            compared += len(acts)
            mism += not (acts == acts_u and np.array_equal(qc, qu))
            s.apply(acts[int(rng.integers(len(acts)))])
    criterion(10, mism == 0, f"10 full episodes, {compared} q-values compared, mismatching steps {mism}")
    assert mism == 0


# 11 --------------------------------------------------------------------------

DESK = TrainConfig(total_steps=20_000, graph_n=10, graph_n_max=15, width=128, seed=0,
                   checkpoint_every=2000)
_VOLATILE = ("log_path", "checkpoint_path", "steps_done")


def desk_model(cache_dir: Path, steps: int):
    path = cache_dir / f"desk_w{DESK.width}_s{steps}.npz"
    cfg = replace(DESK, total_steps=steps, checkpoint_path=str(path),
                  log_path=str(path.with_suffix(".csv")))
    want = {k: v for k, v in cfg.as_dict().items() if k not in _VOLATILE}
    if path.exists():
        params, meta = load(path, TABLE)
        hyper = meta.get("hyper") or {}
        if hyper.get("steps_done") == steps and {k: v for k, v in hyper.items()
                                                 if k not in _VOLATILE} == want:
            return params, "cached"
    params, tlog = train(cfg)
    return params, f"trained in {tlog.seconds / 60:.0f} min"


@pytest.mark.slow
def test_c11_training_efficacy(criterion, request):
    cache_dir = Path(request.config.cache.mkdir("dynproof-desk"))
    held_out = sample_graphs(20, 15, seed=0, stream="eval")
    rand = evaluate(RandomPolicy(0), held_out).mean_bound
    budgets = [DESK.total_steps]
    relax = int(os.environ.get("DYNPROOF_RELAX_STEPS", "0"))
    lines, ok = [], False
    for steps in budgets + ([relax] if relax else []):
        params, how = desk_model(cache_dir, steps)
        model = evaluate(GreedyPolicy(params), held_out).mean_bound
        ok = model <= rand - Fraction(1, 2) and model <= Fraction(13, 2)
        lines.append(f"{steps} steps ({how}): model {float(model):.3f}")
        if ok:
            break
    criterion(11, ok, f"random {float(rand):.3f}; " + "; ".join(lines)
              + "; need model <= random - 0.5 and <= 6.5")
    assert ok


# 12 --------------------------------------------------------------------------

def test_c12_random_baseline(criterion):
    graphs = sample_graphs(100, 15, seed=12, stream="baseline")
    rep = evaluate(RandomPolicy(12), graphs, horizon=100)
    mean = float(rep.mean_bound)
    alpha_mean = np.mean([max_stable_set(g)[0] for g in graphs])
    within = abs(mean - RANDOM_N15) <= 1.0
    criterion(12, within, f"random mean {mean:.3f} at n=15 over 100 graphs (ref 5.91 +- 1.0, "
                          f"informative); alpha mean {alpha_mean:.2f}")
    # informative only; the soundness bracket is the hard requirement
    assert alpha_mean <= mean <= 7.5
