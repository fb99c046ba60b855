"""Command-line front end: run scenarios, convergence studies, spectral-radius
maps, and timing benches from config files or built-in presets."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import yaml

from .output import config_from_dict, emit_results, load_config, save_config
from .scenarios import PRESETS, ConfigError, preset, run_simulation
from .solvers import SolverError
from .studies import (
    BenchConfig,
    CaseSpec,
    ConvergenceStudyConfig,
    convergence_study,
    spectral_study,
    timing_bench,
)


def _resolve_scenario(token: str):
    if os.path.exists(token):
        return load_config(token)
    if token in PRESETS:
        return preset(token)
    raise ConfigError(f"{token!r} is neither a config file nor a preset "
                      f"(presets: {sorted(PRESETS)})")


def _cmd_run(args):
    config = _resolve_scenario(args.config)
    if args.variant:
        config = dataclasses.replace(config, variant=args.variant)
    if args.duration is not None:
        config = dataclasses.replace(config, T_s=args.duration)
    if args.dump_config:
        save_config(config, args.dump_config)
        print(f"wrote {args.dump_config}")
        return 0
    output = run_simulation(config)
    files = emit_results(output, "all", args.out)
    print(f"{config.name}: {output.steps} steps of h={config.h_s:g}s "
          f"({output.wall_time_s:.2f}s wall, "
          f"{output.wall_time_s / max(output.steps, 1) * 1e6:.0f} us/step)")
    u = output.tip_displacement[-1]
    print(f"final tip displacement: [{u[0]:.6e}, {u[1]:.6e}, {u[2]:.6e}] m")
    for f in files:
        print(f"wrote {f}")
    return 0


def _cmd_converge(args):
    with open(args.study) as fh:
        spec = yaml.safe_load(fh)
    base_token = spec.get("base", "cantilever")
    base = (config_from_dict(spec["config"]) if "config" in spec
            else _resolve_scenario(base_token))
    study = ConvergenceStudyConfig(
        base=base,
        t_star_s=float(spec["t_star_s"]),
        reference=CaseSpec(**spec["reference"]),
        cases=[CaseSpec(**c) for c in spec["cases"]],
        eval_points=int(spec.get("eval_points", 201)),
        error_field=spec.get("error_field", "displacement"),
        workers=int(spec.get("workers", 1)),
    )
    variants = [args.variant] if args.variant else list(spec.get(
        "variants", ["cn-nl", "lu-nl", "lu-l"]))
    os.makedirs(args.out, exist_ok=True)
    summary = {"t_star_s": study.t_star_s, "variants": {}}
    for variant in variants:
        res = convergence_study(study, variant)
        summary["variants"][variant] = {
            "cases": [{"p": c.p, "n": c.n, "h_s": c.h_s, "err_l2": e}
                      for c, e in zip(res.cases, res.errors)],
            "rates": {f"p{p}": r for p, r in sorted(res.rates.items())},
        }
        for p, r in sorted(res.rates.items()):
            print(f"{variant} p={p}: rate {r:.2f}")
    path = os.path.join(args.out, "convergence.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    return 0


def _parse_int_list(text):
    return [int(tok) for tok in text.split(",") if tok]


def _cmd_spectral(args):
    rows = spectral_study(_parse_int_list(args.p), _parse_int_list(args.n),
                          [tok.lower() for tok in args.bc.split(",") if tok])
    for row in rows:
        print(f"p={row['p']:>2} n={row['n']:>4} bc={row['bc']}: "
              f"rho={row['rho']:.6f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "spectral.json")
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")
    bad = [r for r in rows if r["rho"] >= 1.0]
    return 0 if not bad else 2


def _cmd_bench(args):
    with open(args.matrix) as fh:
        spec = yaml.safe_load(fh)
    results = []
    for token in spec.get("benchmarks", ["cantilever"]):
        base = _resolve_scenario(token)
        bench = BenchConfig(
            base=base,
            p_list=tuple(spec.get("p_list", (2, 4, 6))),
            n_list=tuple(spec.get("n_list", (10, 20, 40, 60))),
            variants=tuple(spec.get("variants", ("cn-nl", "lu-nl", "lu-l"))),
            steps=int(spec.get("steps", 500)),
            warmup=int(spec.get("warmup", 20)),
        )
        if "fixed_passes" in spec:
            bench.fixed_passes = {int(k): int(v)
                                  for k, v in spec["fixed_passes"].items()}
        rows = timing_bench(bench)
        results.extend(rows)
        for r in rows:
            print(f"{r.benchmark} {r.variant:>5} p={r.p} n={r.n:>3}: "
                  f"{r.seconds_per_step * 1e6:8.1f} us/step  "
                  f"normalized {r.normalized:.3f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "bench.json")
        with open(path, "w") as fh:
            json.dump([dataclasses.asdict(r) for r in results], fh, indent=1,
                      sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="igabeam",
        description="Explicit isogeometric-collocation beam dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("config", help="config file path or preset name")
    p_run.add_argument("--variant", choices=["cn-nl", "lu-nl", "lu-l"])
    p_run.add_argument("--duration", type=float, help="override T_s")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--dump-config", help="write the resolved config "
                       "as YAML and exit")
    p_run.set_defaults(func=_cmd_run)

    p_con = sub.add_parser("converge", help="spatial convergence study")
    p_con.add_argument("study", help="study config file (YAML)")
    p_con.add_argument("--variant", choices=["cn-nl", "lu-nl", "lu-l"])
    p_con.add_argument("--out", default="out")
    p_con.set_defaults(func=_cmd_converge)

    p_sp = sub.add_parser("spectral", help="spectral radius sensitivity map")
    p_sp.add_argument("--p", default="2,4,6,8")
    p_sp.add_argument("--n", default="10,20,40,60,80")
    p_sp.add_argument("--bc", default="dd,dn,nn")
    p_sp.add_argument("--out", default=None)
    p_sp.set_defaults(func=_cmd_spectral)

    p_be = sub.add_parser("bench", help="per-step timing bench")
    p_be.add_argument("matrix", help="bench matrix config file (YAML)")
    p_be.add_argument("--out", default=None)
    p_be.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
