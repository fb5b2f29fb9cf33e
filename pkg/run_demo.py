#!/usr/bin/env python
"""
Small demo of the bandit formulation.

- Runs critic-free PPO on a 16x16 Game-of-Life grid for a few hundred evaluations
- Prints the best payoff and a random-search reference at the same budget
- Saves the best design to demo_best.svg
"""

import sys
from pathlib import Path

ROOT_DIR = Path(__file__).resolve().parent
SRC_DIR = ROOT_DIR / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from voxelbandit.baselines import RandomSearch  # noqa: E402
from voxelbandit.core import Budget, run_optimization  # noqa: E402
from voxelbandit.gol import GolEnv  # noqa: E402
from voxelbandit.marl import BanditPPO  # noqa: E402
from voxelbandit.models import BppoConfig  # noqa: E402
from voxelbandit.visualize import render_design  # noqa: E402


def main() -> None:
    env = GolEnv(16, 16)
    budget = Budget(320)
    cfg = BppoConfig(hidden=[64, 64], lr=1e-3)

    print(f"[run_demo] Game-of-Life {env.width}x{env.height}, T={budget.total_evaluations}")
    ppo = run_optimization(env, BanditPPO(cfg), budget, seed=0, wall_clock=False)
    ref = run_optimization(env, RandomSearch(), budget, seed=0, wall_clock=False)

    print(f"  bppo   best = {100.0 * ppo.best_payoff:.1f}%")
    print(f"  random best = {100.0 * ref.best_payoff:.1f}%")

    render_design(ppo.best, "demo_best.svg", title="BPPO best design")
    print("[run_demo] Best design saved. Open demo_best.svg to view.")


if __name__ == "__main__":
    main()
