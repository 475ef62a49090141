"""Command-line entry point: ``ssps gen | synth | verify | simulate``.

Exit codes: 0 success, 2 usage / input / file errors, 3 infeasible program,
4 cut budget exhausted. Reports go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .chain import verify
from .environments import GENERATORS, generate
from .errors import BudgetExhausted, Infeasible, SspsError
from .graph import classify_mdp
from .io import (
    dumps_mdp, dumps_policy, dumps_report, loads_mdp, loads_policy, pair_vector, provenance_dict,
    verification_to_dict,
)
from .lp.programs import SynthesisConfig
from .lp.synthesis import synthesize
from .simulation import SimConfig, ensemble_metrics

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 2, 3, 4
SYNTH_MODES = ("ep", "cp", "cpu", "lp3", "lp0", "kallenberg", "unichain")
SEEDED = {"frozen-islands", "random-partition"}


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("SSPS_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SSPS_SEED must be an integer, got {raw!r}") from None


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _env_params(tokens: list[str]) -> dict:
    params = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise UsageError(f"unexpected argument {tok!r}; generator parameters look like --name value")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        elif i + 1 < len(tokens) and not tokens[i + 1].startswith("--"):
            value = tokens[i + 1]
            i += 2
        else:
            value = "true"
            i += 1
        params[key] = _coerce(value)
    return params


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _summary(mdp) -> str:
    cls = classify_mdp(mdp)
    sizes = ", ".join(str(len(t)) for t in cls.tsccs)
    noun = "TSCC" if len(cls.tsccs) == 1 else "TSCCs"
    return f"{mdp.n_states} states, {mdp.n_pairs} state-action pairs, {len(cls.tsccs)} {noun} ({sizes})"


def cmd_gen(args, extra) -> int:
    if args.env not in GENERATORS:
        raise UsageError(f"unknown environment {args.env!r}; known: {', '.join(sorted(GENERATORS))}")
    params = _env_params(extra)
    if args.env in SEEDED:
        params.setdefault("seed", args.seed if args.seed is not None else _default_seed())
    elif args.seed is not None:
        print(f"note: {args.env} is not randomized; --seed ignored", file=sys.stderr)
    mdp = generate(args.env, **params)
    _write(args.out, dumps_mdp(mdp))
    stream = sys.stdout if args.out not in (None, "-") else sys.stderr
    print(_summary(mdp), file=stream)
    return EXIT_OK


def cmd_synth(args, extra) -> int:
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    mdp = loads_mdp(_read(args.inp))
    cfg = SynthesisConfig() if args.epsilon is None else SynthesisConfig(args.epsilon, args.epsilon)
    result = synthesize(mdp, args.mode, cfg)
    _write(args.out, dumps_policy(mdp, result.policy, provenance_dict(mdp, result)))
    stream = sys.stdout if args.out not in (None, "-") else sys.stderr
    print(f"mode={args.mode} objective={result.objective:.10g} iterations={result.iterations}", file=stream)
    return EXIT_OK


def _text_report(mdp, data: dict) -> str:
    pc = data["policy_class"]
    lines = [
        f"policy class: {pc['name']} (EP={pc['ep']}, CP={pc['cp']}, CPU={pc['cpu']})",
        f"average reward: {data['average_reward']:.10g}",
    ]
    if data["correspondence_residual"] is not None:
        lines.append(f"correspondence residual |Pr - x*|: {data['correspondence_residual']:.3g}")
    if data["visits_residual"] is not None:
        lines.append(f"visits residual |zeta - y*|: {data['visits_residual']:.3g}")
    for r in data["specs"]:
        hi = "inf" if r["hi"] is None else f"{r['hi']:g}"
        mark = "ok  " if r["satisfied"] else "FAIL"
        lines.append(f"{mark} {r['kind']:9s} {r['label']}: {r['attained']:.6g} in [{r['lo']:g}, {hi}]")
    lines.append("all specs pass" if data["all_specs_pass"] else "some specs fail")
    return "\n".join(lines) + "\n"


def cmd_verify(args, extra) -> int:
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    mdp = loads_mdp(_read(args.mdp))
    pi, prov = loads_policy(mdp, _read(args.policy))
    x = y = None
    if prov is not None and "x" in prov:
        x = pair_vector(mdp, prov["x"])
        y = pair_vector(mdp, prov["y"]) if "y" in prov else None
    data = verification_to_dict(mdp, verify(mdp, pi, x, y))
    _write(None, dumps_report(data) if args.format == "json" else _text_report(mdp, data))
    return EXIT_OK


def cmd_simulate(args, extra) -> int:
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    if args.horizon < 1 or args.paths < 1:
        raise UsageError("horizon and paths must be positive (nothing to estimate otherwise)")
    mdp = loads_mdp(_read(args.mdp))
    pi, _ = loads_policy(mdp, _read(args.policy))
    seed = args.seed if args.seed is not None else _default_seed()
    checkpoints = ()
    if args.csv:
        grid = np.unique(np.geomspace(1, args.horizon, num=max(2, args.checkpoints)).astype(np.int64))
        checkpoints = tuple(int(c) for c in grid)
    cfg = SimConfig(paths=args.paths, horizon=args.horizon, seed=seed, workers=args.workers,
                    checkpoints=checkpoints)
    report = ensemble_metrics(mdp, pi, cfg)
    _write(args.out, dumps_report(report.as_dict()))
    if args.csv:
        _write(args.csv, report.curves_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssps", description="Steady-state policy synthesis toolkit")
    parser.add_argument("--version", action="version", version=f"ssps {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a benchmark MDP", allow_abbrev=False,
                       description="Generator parameters follow the name, e.g. `gen toll-collector --m 3 --n 25`.")
    g.add_argument("env", help=f"one of: {', '.join(sorted(GENERATORS))}")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None, help="output file (default stdout)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("synth", help="synthesize a policy")
    s.add_argument("--mode", choices=SYNTH_MODES, default="ep")
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify", help="analytic verification of a policy")
    v.add_argument("--mdp", required=True)
    v.add_argument("--policy", required=True)
    v.add_argument("--format", choices=("json", "text"), default="text")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("simulate", help="Monte Carlo estimates for a policy")
    m.add_argument("--mdp", required=True)
    m.add_argument("--policy", required=True)
    m.add_argument("--paths", type=int, default=5000)
    m.add_argument("--horizon", type=int, default=100_000)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", default=None)
    m.add_argument("--csv", default=None, help="write convergence curves here")
    m.add_argument("--checkpoints", type=int, default=50, help="number of log-spaced curve points")
    m.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, SspsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
