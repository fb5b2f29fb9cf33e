# src/cli.py

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from voxelbandit import analyzer, io, visualize
from voxelbandit.core import Design
from voxelbandit.errors import ConfigError, VoxelBanditError
from voxelbandit.models import (
    BendEnvConfig,
    ExperimentConfig,
    GolEnvConfig,
    SplitterEnvConfig,
)
from voxelbandit.photonics import PhotonicEnv

console = Console()


def apply_overrides(
    cfg: ExperimentConfig,
    seeds: Optional[Sequence[int]] = None,
    budget: Optional[int] = None,
    out_dir: Optional[str] = None,
    jobs: Optional[int] = None,
) -> ExperimentConfig:
    """Command-line flags win over the file; the result is validated again."""
    run = cfg.run.model_dump()
    if seeds:
        run["seeds"] = list(seeds)
    if budget is not None:
        run["budget"] = budget
    if out_dir is not None:
        run["out_dir"] = out_dir
    if jobs is not None:
        run["jobs"] = jobs
    return io.parse_config({**cfg.model_dump(), "run": run}, "command line")


def environment_for(name: str, design: Design):
    """
    `name` is either an experiment config (its [environment] is used) or one of
    gol / bend / splitter with defaults sized to the design.
    """
    path = io.resolve_config_path(name)
    if path.is_file():
        return analyzer.build_environment(io.load_config(path).environment)
    s = design.shape
    if name == "gol":
        return analyzer.build_environment(GolEnvConfig(width=s.nx, height=s.ny))
    if name == "bend":
        return analyzer.build_environment(BendEnvConfig(design_nx=s.nx, design_ny=s.ny))
    if name == "splitter":
        return analyzer.build_environment(SplitterEnvConfig(design_nx=s.nx, design_ny=s.ny))
    raise ConfigError(f"Unknown environment {name!r}; pass a config file or gol/bend/splitter")


def print_summary(report: analyzer.ExperimentReport) -> None:
    table = Table(title="Best payoff per seed", box=box.SIMPLE)
    table.add_column("Seed", style="cyan", justify="right")
    table.add_column("Best", justify="right")
    for seed, best in report.best_by_seed.items():
        table.add_row(str(seed), f"{100.0 * best:.1f}%")
    agg = report.summary.iloc[-1]
    table.add_row("mean", f"{100.0 * agg['best']:.1f} ± {100.0 * agg['std']:.1f}%")
    console.print(table)
    console.print(f"Outputs written to [bold]{report.out_dir}[/bold]")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = apply_overrides(io.load_config(args.config), args.seed_override, args.budget,
                          args.out_dir, args.jobs)
    report = analyzer.run_experiment(cfg)
    print_summary(report)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    design = io.read_design_pbd(args.design)
    env = environment_for(args.env, design)
    if args.snapshot:
        if not isinstance(env, PhotonicEnv):
            raise ConfigError("--snapshot needs a photonic environment (bend or splitter)")
        result = env.simulate(design, keep_field=True)
        io.write_field_snapshot(args.snapshot, result.ez, env.cfg.dx)
        console.print(f"Field snapshot written to {args.snapshot}")
    payoff = env.evaluate(design)
    console.print(f"payoff {payoff:.6f} ({100.0 * payoff:.1f}%)")
    return 0


def cmd_robustness(args: argparse.Namespace) -> int:
    cfg = apply_overrides(io.load_config(args.config), args.seed_override, None,
                          args.out_dir, None)
    design = io.read_design_pbd(args.design)
    env = analyzer.build_environment(cfg.environment)
    seed = cfg.run.seeds[0]
    curve = analyzer.robustness_curve(design, env, cfg.analysis.robustness_probs,
                                      cfg.analysis.samples_per_prob, seed)

    table = Table(title="Robustness", box=box.SIMPLE)
    table.add_column("Error prob.", justify="right", style="cyan")
    table.add_column("Mean payoff", justify="right")
    for prob, mean in curve:
        table.add_row(f"{100.0 * prob:.1f}%", f"{100.0 * mean:.1f}%")
    console.print(table)

    out = Path(cfg.run.out_dir)
    io.write_frame_csv(pd.DataFrame(curve, columns=["prob", "mean_payoff"]),
                       out / "robustness.csv")
    if cfg.run.plot:
        visualize.plot_robustness({seed: curve}, out / "robustness.svg")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    if io.sniff_kind(args.source) == "design":
        visualize.render_design(io.read_design_pbd(args.source), args.output)
    else:
        ez, dx = io.read_field_snapshot(args.source)
        visualize.render_field(ez, args.output, dx=dx)
    console.print(f"Rendered {args.source} to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Voxel bandit topology optimization CLI",
    )
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a seeded, budgeted experiment")
    run.add_argument("config", help="Path to the experiment TOML file")
    run.add_argument("--seed-override", type=int, nargs="+",
                     help="Replace the configured seeds")
    run.add_argument("--budget", type=int, help="Evaluations per run")
    run.add_argument("--out-dir", help="Output directory")
    run.add_argument("--jobs", type=int, help="Parallel worker processes")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="Evaluate one design")
    ev.add_argument("env", help="Experiment TOML file, or gol / bend / splitter")
    ev.add_argument("design", help="Design in PBD format")
    ev.add_argument("--snapshot", help="Write the final Ez field here (photonic tasks)")
    ev.set_defaults(func=cmd_eval)

    rob = sub.add_parser("robustness", help="Payoff of a design under random voxel errors")
    rob.add_argument("config", help="Experiment TOML file ([environment] and [analysis])")
    rob.add_argument("design", help="Design in PBD format")
    rob.add_argument("--seed-override", type=int, nargs="+",
                     help="Seed for the perturbation stream (first one is used)")
    rob.add_argument("--out-dir", help="Output directory")
    rob.set_defaults(func=cmd_robustness)

    ren = sub.add_parser("render", help="Render a PBD design or field snapshot to SVG")
    ren.add_argument("source", help="PBD design or field snapshot")
    ren.add_argument("-o", "--output", required=True, help="Output SVG path")
    ren.set_defaults(func=cmd_render)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
    )
    try:
        return args.func(args)
    except VoxelBanditError as exc:
        console.print(f"[red]error:[/red] {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
