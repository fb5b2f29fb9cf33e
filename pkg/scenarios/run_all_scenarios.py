import subprocess
import sys
from pathlib import Path

import pandas as pd

DATA_DIR = Path("data")
OUTPUT_DIR = Path("outputs")
SUMMARY_FILE = OUTPUT_DIR / "all_scenarios.csv"


def run_scenario(config_file: Path, budget: int | None = None) -> dict:
    """Run one experiment config through the CLI and read back its aggregate row."""
    output_dir = OUTPUT_DIR / config_file.stem
    command = [
        sys.executable, "src/cli.py", "run", str(config_file),
        "--out-dir", str(output_dir),
    ]
    if budget is not None:
        command += ["--budget", str(budget)]

    subprocess.run(command, check=True)

    summary = pd.read_csv(output_dir / "summary.csv")
    aggregate = summary.iloc[-1]
    return {
        "scenario": config_file.stem,
        "seeds": len(summary) - 1,
        "mean_best": aggregate["best"],
        "std_best": aggregate["std"],
        "curves_exist": (output_dir / "curves.svg").exists(),
    }


def run_all_scenarios(budget: int | None = None) -> pd.DataFrame:
    rows = [run_scenario(cfg, budget) for cfg in sorted(DATA_DIR.glob("*.toml"))]
    df = pd.DataFrame(rows)
    OUTPUT_DIR.mkdir(parents=True, exist_ok=True)
    df.to_csv(SUMMARY_FILE, index=False)
    return df


if __name__ == "__main__":
    # optional first argument caps every run's budget, e.g. `... 200` for a smoke pass
    cap = int(sys.argv[1]) if len(sys.argv) > 1 else None
    print(run_all_scenarios(cap).to_string(index=False))
