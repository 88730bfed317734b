"""Command line entry point: ``bigworld <subcommand>``.

Exit codes: 0 success, 1 usage or config error, 2 divergence, 3 failed
verification.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import save_checkpoint
from .gradcheck import run_grad_check
from .loop import CSV_COLUMNS, ConfigError, ExperimentConfig, MetricsRecord, read_metrics_csv, run_experiment
from .plot import plot_metrics
from .sweep import SweepGrid, run_sweep
from .ulenv.automaton import random_automaton, random_environment, verify_pomdp_equivalence
from .ulenv.life import GLIDER_FRAMES, LIFE, format_cells, life_run, life_state, life_step, load_pattern
from .ulenv.markov import verify_locality
from .ulenv.turing import TuringMachineSpec, binary_counter, compare_with_direct

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3
OUTPUT_ROOT_ENV = "BIGWORLD_OUTPUT_ROOT"


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not key=value"])
        key, value = item.split("=", 1)
        out[key.strip()] = _parse_value(value.strip())
    return out


FULL_SCALE = {"d": 1000}


def load_config(path, overrides, full_scale=False) -> ExperimentConfig:
    data = dict(FULL_SCALE) if full_scale else {}
    if path:
        loaded = json.loads(Path(path).read_text())
        if not isinstance(loaded, dict):
            raise ConfigError([f"{path}: top level must be an object"])
        data.update(loaded)
    cfg = ExperimentConfig.from_dict(data)
    return cfg.with_overrides(overrides) if overrides else cfg


def resolve_out(path) -> Path:
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.mkdir(parents=True, exist_ok=True)
    return p


def describe_version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(out: Path, cfg_dict: dict, extra: dict):
    manifest = {"version": describe_version(), "config": cfg_dict}
    manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config, parse_overrides(args.overrides), args.full_scale)
    out = resolve_out(args.out)
    t0 = time.time()
    with open(out / "metrics.csv", "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")

        def sink(rec: MetricsRecord):
            fh.write(",".join(rec.csv_row()) + "\n")

        res = run_experiment(cfg, on_record=sink)
    save_checkpoint(out / "checkpoint.json", res.state, cfg)
    write_manifest(out, cfg.to_dict(), {
        "seed": cfg.seed,
        "wall_time_s": round(time.time() - t0, 3),
        "steps_completed": res.state.step,
        "status": "diverged" if res.diverged else "completed",
        "error": res.error,
    })
    if res.diverged:
        print(f"diverged: {res.error}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"wrote {out / 'metrics.csv'} ({len(res.records)} records)")
    return EXIT_OK


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def _str_list(text):
    return [x for x in text.split(",") if x]


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, parse_overrides(args.overrides), args.full_scale)
    if args.grid:
        grid = SweepGrid.from_dict(json.loads(Path(args.grid).read_text()))
    else:
        grid = SweepGrid(
            tuple(_int_list(args.widths)) if args.widths else (cfg.policy.width,),
            tuple(_int_list(args.depths)) if args.depths else (cfg.policy.depth,),
            tuple(_str_list(args.activations)) if args.activations else (cfg.policy.activation,),
            tuple(_int_list(args.seeds)) if args.seeds else (cfg.seed,),
        )
    out = resolve_out(args.out)
    t0 = time.time()
    results, summary = run_sweep(cfg, grid, workers=args.workers, out_dir=out, final_fraction=args.final_fraction)
    write_manifest(out, cfg.to_dict(), {"grid": grid.__dict__, "workers": args.workers,
                                        "wall_time_s": round(time.time() - t0, 3)})
    for row in summary:
        print(f"width={row['width']} depth={row['depth']} act={row['activation']}: "
              f"mean_final={row['mean_final']:.4g} failed={row['n_failed']}/{row['n_seeds']}")
    for r in results:
        if r.error and not r.diverged:
            print(f"cell w{r.width} d{r.depth} {r.activation} s{r.seed} failed: {r.error}", file=sys.stderr)
    return EXIT_OK


def cmd_plot(args) -> int:
    tables = []
    for p in args.csv:
        try:
            tables.append((Path(p).stem if len(args.csv) == 1 else Path(p).parent.name or Path(p).stem,
                           read_metrics_csv(p)))
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        svg = plot_metrics(tables, args.kind)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    Path(args.output).write_text(svg)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    results = run_grad_check(args.configs, seed=args.seed, h=args.h, tol=args.tol)
    for r in results:
        if args.verbose or not r.passed:
            print(r.line())
    n_fail = sum(not r.passed for r in results)
    worst = max(r.rel_error for r in results) if results else 0.0
    print(f"grad-check: {len(results) - n_fail}/{len(results)} passed, worst rel_err {worst:.3e} (tol {args.tol:g})")
    return EXIT_OK if n_fail == 0 else EXIT_VERIFY


def _render(cells, lo=(0, 0), hi=(4, 4)) -> str:
    rows = []
    for y in range(hi[1], lo[1] - 1, -1):
        rows.append("".join("#" if (x, y) in cells else "." for x in range(lo[0], hi[0] + 1)))
    return "\n".join(rows)


def cmd_life(args) -> int:
    if args.pattern:
        frames = life_run(life_state(load_pattern(args.pattern)), args.steps)
        for t, f in enumerate(frames):
            print(f"# t+{t} ({len(f)} live)")
            print(format_cells(f.cells()), end="")
        return EXIT_OK
    ok = True
    print("t (reference):")
    print(_render(GLIDER_FRAMES[0]))
    for t in (1, 2):
        stepped = life_step(life_state(GLIDER_FRAMES[t - 1]))
        expected = GLIDER_FRAMES[t]
        match = stepped.cells() == expected
        ok &= match
        print(f"t+{t}: step(reference t+{t - 1}) {'matches' if match else 'DIFFERS FROM'} reference t+{t}")
        if not match:
            print("  got:\n" + _render(stepped.cells()) + "\n  expected:\n" + _render(expected))
            print(f"  only in result: {sorted(stepped.cells() - expected)}; only in reference: {sorted(expected - stepped.cells())}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_tm(args) -> int:
    spec = TuringMachineSpec.load(args.spec) if args.spec else binary_counter()
    rep = compare_with_direct(spec, args.tape, args.steps, head=args.head)
    print(rep.report())
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_verify(args) -> int:
    ok = True
    if args.what in ("locality", "all"):
        for k in _int_list(args.k):
            v = verify_locality(LIFE, [(0, 0)], k, trials=args.trials, seed=args.seed)
            print(v.report())
            ok &= v.passed
    if args.what in ("pomdp", "all"):
        rng = np.random.default_rng(args.seed)
        n_pass = 0
        for i in range(args.automata):
            aut = random_automaton(rng)
            env, rule = random_environment(rng)
            v = verify_pomdp_equivalence(aut, env, rule, args.steps)
            n_pass += v.passed
            if not v.passed:
                print(f"automaton {i}: {v.report()}")
        print(f"automaton/POMDP equivalence: {n_pass}/{args.automata} random automata over {args.steps} steps")
        ok &= n_pass == args.automata
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bigworld", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one online experiment")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--out", default="runs/run", help="output directory")
    r.add_argument("--full-scale", action="store_true", help="d=1000 (slow)")
    r.add_argument("overrides", nargs="*", help="key=value overrides, dotted for nested keys")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a width/depth/activation/seed grid")
    s.add_argument("--config")
    s.add_argument("--grid", help="JSON file with widths, depths, activations, seeds")
    s.add_argument("--widths")
    s.add_argument("--depths")
    s.add_argument("--activations")
    s.add_argument("--seeds")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--final-fraction", type=float, default=0.2)
    s.add_argument("--out", default="runs/sweep")
    s.add_argument("--full-scale", action="store_true", help="d=1000 (slow)")
    s.add_argument("overrides", nargs="*")
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="SVG line plot of metrics CSVs")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--kind", choices=("interactivity", "actions"), default="interactivity")
    pl.add_argument("-o", "--output", default="plot.svg")
    pl.set_defaults(func=cmd_plot)

    g = sub.add_parser("grad-check", help="finite-difference check of the meta-gradient")
    g.add_argument("--configs", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--h", type=float, default=1e-5)
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("-v", "--verbose", action="store_true")
    g.set_defaults(func=cmd_grad_check)

    lf = sub.add_parser("life", help="replay the reference glider frames, or run a pattern file")
    lf.add_argument("--pattern", help="coordinate-list or RLE file")
    lf.add_argument("--steps", type=int, default=4)
    lf.set_defaults(func=cmd_life)

    tm = sub.add_parser("tm", help="Markov-encoded Turing machine vs direct simulation")
    tm.add_argument("--spec", help="TM JSON (default: binary counter)")
    tm.add_argument("--tape", default="1011")
    tm.add_argument("--head", type=int, default=0)
    tm.add_argument("--steps", type=int, default=200)
    tm.set_defaults(func=cmd_tm)

    v = sub.add_parser("verify", help="locality and automaton/POMDP verifiers")
    v.add_argument("what", nargs="?", choices=("locality", "pomdp", "all"), default="all")
    v.add_argument("--k", default="1,2,3")
    v.add_argument("--trials", type=int, default=10000)
    v.add_argument("--automata", type=int, default=20)
    v.add_argument("--steps", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which here means divergence
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:  # unreadable or malformed input files
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
