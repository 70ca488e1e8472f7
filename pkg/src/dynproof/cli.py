"""Command line: instances, dynamic and static proofs, training, benchmarks.

Exit codes: 0 success, 2 verification failure, 3 resource budget exceeded,
4 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .agent import (GreedyPolicy, RandomPolicy, ScriptedPolicy, TrainConfig, evaluate,
                    sample_graphs, train)
from .env import ProverState, extract_proof, scripted_from_trace, sequential_policy
from .features import build_class_table
from .graphs import BudgetExceeded, Graph, complete, cycle, empty, load_graph, max_stable_set, petersen, random_gnp
from .hierarchy import (DEFAULT_GENERATOR_LIMIT, StaticCertificate, lp_size, solve_level,
                        verify_static_certificate)
from .lp import PivotBudgetExceeded
from .poly import MalformedInput
from .proof import ProofTrace, parse_proof, render_proof, verify
from .qnet import ModelFileError, load

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_BUDGET = 3
EXIT_MALFORMED = 4

BENCH_SCHEMA = "dynproof-bench/1"

log = logging.getLogger("dynproof")


class VerificationFailed(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Manifests and config files

@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: dict = field(default_factory=dict)  # path -> sha256

    def add_output(self, path) -> None:
        self.outputs[str(path)] = hashlib.sha256(Path(path).read_bytes()).hexdigest()

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def read_config(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    for k, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedInput(f"{path}:{k}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _finish(manifest: RunManifest, out_path, manifest_path=None) -> None:
    manifest.finished = _now()
    if out_path:
        manifest.add_output(out_path)
        manifest.write(manifest_path or f"{out_path}.manifest.json")


def _fixture(name: str) -> str:
    return resources.files("dynproof").joinpath("fixtures", name).read_text()


# ---------------------------------------------------------------------------
# Commands

def cmd_gen_graph(args) -> int:
    if args.kind == "random":
        if args.n is None:
            raise MalformedInput("--n is required for random graphs")
        g = random_gnp(args.n, args.p, args.seed)
    elif args.kind == "petersen":
        g = petersen()
    else:
        if args.n is None:
            raise MalformedInput(f"--n is required for {args.kind} graphs")
        g = {"complete": complete, "cycle": cycle, "empty": empty}[args.kind](args.n)
    text = g.to_dimacs() if args.format == "dimacs" else json.dumps(g.to_json()) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        m = RunManifest("gen-graph", vars_clean(args), {"graph": args.seed}, started=_now())
        _finish(m, args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _make_policy(args, g: Graph):
    if args.agent == "random":
        return RandomPolicy(args.seed)
    if args.agent == "scripted":
        return ScriptedPolicy(sequential_policy)
    if args.agent == "scripted-table2":
        trace = parse_proof(_fixture("cycle7_table2.txt"))
        if trace.graph != g:
            raise MalformedInput("scripted-table2 replays the 7-cycle proof; use --graph cycle7")
        return ScriptedPolicy(scripted_from_trace(trace))
    if args.agent == "model":
        if not args.model:
            raise MalformedInput("--agent model needs --model")
        params, _ = load(args.model, build_class_table(args.degree_cap))
        return GreedyPolicy(params)
    raise MalformedInput(f"unknown agent {args.agent}")


def cmd_prove(args) -> int:
    g = load_graph(args.graph)
    policy = _make_policy(args, g)
    manifest = RunManifest("prove", vars_clean(args), {"agent": args.seed}, started=_now())
    s = ProverState(g, args.degree_cap, args.steps)
    policy.reset(s)
    while s.step < args.steps and s.legal_actions():
        a = policy(s)
        if a is None:
            break
        s.apply(a)
    trace = extract_proof(s)
    report = verify(trace)
    print(f"bound {s.bound} after {s.step} steps ({len(trace.steps)} used); verify: {report}")
    if args.pretty:
        print(render_proof(trace))
    if args.out:
        Path(args.out).write_text(json.dumps(trace.to_json(), indent=1) + "\n")
        _finish(manifest, args.out)
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_static(args) -> int:
    g = load_graph(args.graph)
    manifest = RunManifest("static", vars_clean(args), {}, started=_now())
    bound, cert = solve_level(g, args.level, args.limit)
    report = verify_static_certificate(cert)
    print(f"level {args.level} bound {bound} "
          f"(lp size {lp_size(cert)}: {cert.n_columns} columns, {cert.n_rows} rows); verify: {report}")
    if args.out:
        Path(args.out).write_text(json.dumps(cert.to_json(), indent=1) + "\n")
        _finish(manifest, args.out)
    return EXIT_OK if report.ok else EXIT_VERIFY


def load_certificate(path):
    """A dynamic trace (JSON or text) or a static certificate (JSON)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"bad JSON in {path}: {exc}") from exc
        if data.get("format") == "dynproof-static-certificate":
            return StaticCertificate.from_json(data)
        return ProofTrace.from_json(data)
    return parse_proof(text)


def cmd_verify(args) -> int:
    cert = load_certificate(args.proof)
    if isinstance(cert, StaticCertificate):
        report = verify_static_certificate(cert)
    else:
        report = verify(cert)
    print(report)
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_alpha(args) -> int:
    g = load_graph(args.graph)
    size, nodes = max_stable_set(g)
    print(f"alpha {size} stable set {' '.join(str(v + 1) for v in sorted(nodes))}")
    return EXIT_OK


def cmd_train(args) -> int:
    values = read_config(args.config) if args.config else {}
    for key in ("total_steps", "seed", "width", "graph_n", "graph_n_max"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if args.log:
        values["log_path"] = args.log
    if args.out:
        values["checkpoint_path"] = args.out
    try:
        cfg = TrainConfig.from_mapping(values)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad training config: {exc}") from exc
    manifest = RunManifest("train", cfg.as_dict(), {"seed": cfg.seed, "init": cfg.init_seed},
                           started=_now())

    def progress(step, episode, bound, loss):
        log.info("step %d episode %d final bound %s loss %.4g", step, episode, bound, loss)

    _, tlog = train(cfg, progress=progress)
    print(f"trained {cfg.total_steps} steps over {len(tlog.rows)} episodes in {tlog.seconds:.1f}s")
    manifest.finished = _now()
    for p in (cfg.checkpoint_path, cfg.log_path):
        if p:
            manifest.add_output(p)
    if cfg.checkpoint_path:
        manifest.write(f"{cfg.checkpoint_path}.manifest.json")
    return EXIT_OK


# -- bench ------------------------------------------------------------------

def _bench_graph(job):
    """All measurements on one graph; runs in a worker process."""
    g, levels, agents, model_path, horizon, seed = job
    row = {"alpha": max_stable_set(g)[0]}
    for level in levels:
        bound, cert = solve_level(g, level)
        if not verify_static_certificate(cert).ok:
            raise VerificationFailed(f"static level {level} certificate failed")
        row[f"static_l{level}"] = bound
        row[f"static_l{level}_lp_size"] = lp_size(cert)
    for agent in agents:
        if agent == "random":
            policy = RandomPolicy(seed)
        else:
            params, _ = load(model_path, build_class_table(2))
            policy = GreedyPolicy(params)
        rep = evaluate(policy, [g], horizon)
        s_bound = rep.bounds[0]
        row[f"{agent}"] = s_bound
        row[f"{agent}_proof_steps"] = len(rep.traces[0].steps)
    return row


def cmd_bench(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",")]
    levels = [int(x) for x in args.levels.split(",")] if args.levels else []
    agents = [a for a in args.agents.split(",") if a] if args.agents else []
    for a in agents:
        if a not in ("random", "model"):
            raise MalformedInput(f"unknown agent {a}")
    if "model" in agents:
        if not args.model:
            raise MalformedInput("agent 'model' needs --model")
        load(args.model, build_class_table(2))  # fail fast on a bad file
    manifest = RunManifest("bench", vars_clean(args), {"graphs": args.seed}, started=_now())
    columns = ["n", "count", "alpha_mean"]
    for a in agents:
        columns += [f"{a}_mean", f"{a}_proof_steps_mean"]
    for level in levels:
        columns += [f"static_l{level}_mean", f"static_l{level}_lp_size_mean"]
    out_rows = []
    for n in sizes:
        graphs = sample_graphs(args.count, n, args.seed, stream=f"bench-{n}")
        jobs = [(g, levels, agents, args.model, args.steps, args.seed + k) for k, g in enumerate(graphs)]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                rows = list(pool.map(_bench_graph, jobs))
        else:
            rows = [_bench_graph(j) for j in jobs]
        out = {"n": n, "count": len(rows),
               "alpha_mean": f"{np.mean([r['alpha'] for r in rows]):.4f}"}
        for a in agents:
            out[f"{a}_mean"] = f"{float(np.mean([float(r[a]) for r in rows])):.4f}"
            out[f"{a}_proof_steps_mean"] = f"{np.mean([r[a + '_proof_steps'] for r in rows]):.2f}"
        for level in levels:
            vals = [r[f"static_l{level}"] for r in rows]
            out[f"static_l{level}_mean"] = f"{float(sum(vals, Fraction(0)) / len(vals)):.4f}"
            out[f"static_l{level}_lp_size_mean"] = f"{np.mean([r[f'static_l{level}_lp_size'] for r in rows]):.1f}"
        out_rows.append(out)
    buf = io.StringIO()
    buf.write(f"# schema: {BENCH_SCHEMA}\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(out_rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
        _finish(manifest, args.out)
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------

def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynproof", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"dynproof {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="write a graph instance")
    p.add_argument("--kind", choices=["random", "complete", "cycle", "petersen", "empty"], default="random")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "dimacs"], default="json")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("prove", help="search for a dynamic proof")
    p.add_argument("--graph", required=True)
    p.add_argument("--agent", choices=["random", "scripted", "scripted-table2", "model"], default="random")
    p.add_argument("--model")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--degree-cap", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("static", help="solve one level of the static hierarchy")
    p.add_argument("--graph", required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--limit", type=int, default=DEFAULT_GENERATOR_LIMIT, help="generator budget")
    p.add_argument("--out")
    p.set_defaults(func=cmd_static)

    p = sub.add_parser("verify", help="check a proof trace or static certificate")
    p.add_argument("--proof", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("alpha", help="exact stability number")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("train", help="train the Q-network")
    p.add_argument("--config")
    p.add_argument("--total-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--graph-n", type=int)
    p.add_argument("--graph-n-max", type=int)
    p.add_argument("--out", help="model file")
    p.add_argument("--log", help="training log CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="benchmark table over random graphs")
    p.add_argument("--sizes", default="15")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--agents", default="random")
    p.add_argument("--levels", default="2,3")
    p.add_argument("--model")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MalformedInput, ModelFileError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (BudgetExceeded, PivotBudgetExceeded) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
