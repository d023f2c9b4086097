"""Command-line surface.

Subcommands: convert, simulate, fit, example1, example2, check.  Global
flags (--config, --out, --seed, --quiet) are accepted by every subcommand.
Exit codes: 0 success, 1 validation/usage error, 2 numerical divergence.
The output directory defaults to $LOGFIT_OUT, then ./runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys as _sys
from pathlib import Path

import numpy as np


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors, with help on stderr."""

    def error(self, message):
        print(f"error: {message}", file=_sys.stderr)
        self.print_help(_sys.stderr)
        raise SystemExit(1)


def _common(parser: _Parser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--out", metavar="DIR", help="output directory (default $LOGFIT_OUT or ./runs)")
    parser.add_argument("--seed", type=int, metavar="N", help="override the run seed")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> _Parser:
    parser = _Parser(prog="logfit", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("convert", parents=[], help="sigmoid-sum <-> logistic-ensemble documents (stdin -> stdout)")
    _common(p)

    p = sub.add_parser("simulate", help="forward-simulate a system document")
    _common(p)
    p.add_argument("--system", choices=["autonomous", "multiinput", "feedback"], default="autonomous")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--method", choices=["euler", "rk4"], default="rk4")

    p = sub.add_parser("fit", help="run the adaptive trial protocol from a config file")
    _common(p)

    p = sub.add_parser("example1", help="single-sigmoid recovery study")
    _common(p)
    p.add_argument("--variant", choices=["adaptive", "pattern", "batch"], default="adaptive")
    p.add_argument("--init", metavar="A,C", help="initial parameter guess (two comma-separated numbers)")
    p.add_argument("--t-end", type=float, default=900.0)

    p = sub.add_parser("example2", help="ten-sigmoid trial study")
    _common(p)
    p.add_argument("--scale", choices=["desk", "paper"], default="desk")
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--epochs", type=int, help="override the epoch count")

    p = sub.add_parser("check", help="run the quick invariant battery")
    _common(p)
    return parser


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("LOGFIT_OUT") or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _say(args, *items):
    if not args.quiet:
        print(*items)


def cli(argv=None) -> int:
    from .integrator import DivergenceError
    from .runio import ConfigError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(_sys.stderr)
        return 1
    handler = {
        "convert": _cmd_convert,
        "simulate": _cmd_simulate,
        "fit": _cmd_fit,
        "example1": _cmd_example1,
        "example2": _cmd_example2,
        "check": _cmd_check,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=_sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli(_sys.argv[1:]))


# -- handlers -----------------------------------------------------------------

def _read_doc(args) -> dict:
    if args.config:
        return json.loads(Path(args.config).read_text())
    return json.load(_sys.stdin)


def _cmd_convert(args) -> int:
    from .models import LogisticEnsemble, SigmoidSum, logistic_to_sigmoid, sigmoid_to_logistic

    doc = _read_doc(args)
    kind = doc.get("kind")
    if kind == "sigmoid_sum":
        model = SigmoidSum(a=doc["a"], b=doc["b"], c=doc["c"])
        ens = sigmoid_to_logistic(model)
        out = {
            "kind": "logistic_ensemble",
            "alpha": list(ens.alpha), "beta": list(ens.beta),
            "c_out": list(ens.c_out), "x0": list(ens.x0),
        }
    elif kind == "logistic_ensemble":
        ens = LogisticEnsemble(alpha=doc["alpha"], beta=doc["beta"],
                               c_out=doc["c_out"], x0=doc["x0"])
        model = logistic_to_sigmoid(ens)
        out = {"kind": "sigmoid_sum", "a": list(model.a), "b": list(model.b), "c": list(model.c)}
    else:
        raise ValueError(f"document kind must be sigmoid_sum or logistic_ensemble, got {kind!r}")
    json.dump(out, _sys.stdout, indent=2)
    print()
    return 0


_INPUT_CHANNELS = {
    "constant": lambda spec: (lambda t, v=float(spec.get("value", 1.0)): v),
    "ramp": lambda spec: (lambda t, v=float(spec.get("slope", 1.0)): v),
    "sine": lambda spec: (
        lambda t,
        a=float(spec.get("amplitude", 1.0)),
        w=float(spec.get("omega", 1.0)),
        p=float(spec.get("phase", 0.0)): a * math.sin(w * t + p)
    ),
}


def _cmd_simulate(args) -> int:
    from .dynamics import MultiInputSystem
    from .integrator import (
        IntegratorConfig,
        integrate_autonomous,
        integrate_feedback,
        integrate_multiinput,
    )
    from .models import LogisticEnsemble

    doc = _read_doc(args)
    icfg = IntegratorConfig(dt=args.dt, method=args.method)
    writer = csv.writer(_sys.stdout)
    if args.system == "autonomous":
        ens = LogisticEnsemble(alpha=doc["alpha"], beta=doc["beta"],
                               c_out=doc["c_out"], x0=doc["x0"])
        traj = integrate_autonomous(ens, args.t_end, icfg)
        writer.writerow(["t"] + [f"x_{i + 1}" for i in range(ens.n)] + ["y"])
        for k in range(traj.t.size):
            writer.writerow([repr(float(traj.t[k]))]
                            + [repr(float(v)) for v in traj.x[k]]
                            + [repr(float(traj.y[k]))])
        return 0
    if args.system == "multiinput":
        chans = []
        for spec in doc.get("inputs", []):
            kind = spec.get("type")
            if kind not in _INPUT_CHANNELS:
                raise ValueError(f"unknown input channel type {kind!r}")
            chans.append(_INPUT_CHANNELS[kind](spec))
        sys_m = MultiInputSystem(alpha=doc["alpha"], beta=doc["beta"], c_out=doc["c_out"],
                                 x0=doc["x0"], input_derivs=chans)
        traj = integrate_multiinput(sys_m, args.t_end, icfg)
        writer.writerow(["t"] + [f"x_{i + 1}" for i in range(sys_m.n)] + ["y"])
        for k in range(traj.t.size):
            writer.writerow([repr(float(traj.t[k]))]
                            + [repr(float(v)) for v in traj.x[k]]
                            + [repr(float(traj.y[k]))])
        return 0
    ens = LogisticEnsemble(alpha=doc["alpha"], beta=doc["beta"],
                           c_out=doc["c_out"], x0=doc["x0"])
    traj, z = integrate_feedback(ens, args.t_end, icfg, z0=float(doc.get("z0", 0.0)))
    writer.writerow(["t"] + [f"x_{i + 1}" for i in range(ens.n)] + ["y", "z"])
    for k in range(traj.t.size):
        writer.writerow([repr(float(traj.t[k]))]
                        + [repr(float(v)) for v in traj.x[k]]
                        + [repr(float(traj.y[k])), repr(float(z[k]))])
    return 0


def _cmd_fit(args) -> int:
    from .harness import run_trials
    from .runio import ConfigError, emit_results, load_config_with_digest

    if not args.config:
        raise ConfigError("--config", "fit needs a config file")
    cfg, digest = load_config_with_digest(args.config)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    records = run_trials(cfg)
    out = _out_dir(args)
    emit_results(records, out, config_digest=digest)
    _say(args, f"wrote {len(records)} trials to {out} (digest {digest[:12]})")
    failed = sum(r.status != "ok" for r in records)
    if failed:
        print(f"{failed} trial(s) diverged", file=_sys.stderr)
        return 2
    return 0


def _cmd_example1(args) -> int:
    from .baselines import BaselineRun
    from .harness import example1

    init = None
    if args.init:
        parts = args.init.split(",")
        if len(parts) != 2:
            raise ValueError(f"--init expects 'a,c', got {args.init!r}")
        init = (float(parts[0]), float(parts[1]))
    result = example1(args.variant, init, t_end=args.t_end)
    out = _out_dir(args)
    path = out / f"example1_{args.variant}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "ahat", "chat"])
        for t, a, c in zip(result.t, result.ahat, result.chat):
            w.writerow([repr(float(t)), repr(float(a)), repr(float(c))])
    if isinstance(result, BaselineRun):
        summary = {
            "variant": args.variant,
            "a_final": float(result.ahat[-1]),
            "c_final": float(result.chat[-1]),
            "J_final": result.J_final,
        }
    else:
        summary = {
            "variant": "adaptive",
            "a_final": result.a_final,
            "c_final": result.c_final,
            "J_final": result.J_final,
            "singular_crossings": result.singular_crossings,
        }
    (out / f"example1_{args.variant}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _say(args, json.dumps(summary, indent=2))
    return 0


def _cmd_example2(args) -> int:
    from .harness import example2
    from .runio import emit_results, write_histogram_csv

    seed = args.seed if args.seed is not None else 2024
    result = example2(scale=args.scale, seed=seed, trials=args.trials, epochs=args.epochs)
    out = _out_dir(args)
    emit_results(result.records, out, config_digest=f"example2-{args.scale}-seed{seed}")
    ok = [r for r in result.records if r.status == "ok"]
    write_histogram_csv([r.d0 for r in ok], [r.d_final for r in ok], out / "d_hist.csv")
    write_histogram_csv([r.R0 for r in ok], [r.R_final for r in ok], out / "R_hist.csv")
    _say(args, json.dumps(result.summary, indent=2))
    return 0


def _cmd_check(args) -> int:
    from .checks import run_checks

    failures = 0
    for name, ok, detail in run_checks():
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail and (not ok or not args.quiet):
            line += f"  ({detail})"
        print(line)
        failures += not ok
    return 1 if failures else 0


if __name__ == "__main__":
    main()
