"""Plot running similarity averages and confidence decay from an evaluation run.

    python scripts/plot_figures.py runs/default

Needs matplotlib (pip install formcast[plots]).
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def plot(run_dir: Path):
    rows = read(run_dir / "running_avg.csv")
    trials = [int(r["trial"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(trials, [float(r["count_avg"]) for r in rows], label="count")
    ax.plot(trials, [float(r["distance_avg"]) for r in rows], label="distance")
    ax.set_xlabel("test")
    ax.set_ylabel("running average per play")
    ax.legend()
    fig.tight_layout()
    fig.savefig(run_dir / "running_avg.png", dpi=120)

    conf = read(run_dir / "confidence.csv")
    means = [sum(float(r[k]) for r in conf) / len(conf) for k in ("conf_step1", "conf_step2")]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([0, 1, 2], [1.0, *means], marker="o")
    ax.set_xticks([0, 1, 2], ["observed", "prediction 1", "prediction 2"])
    ax.set_ylabel("average confidence")
    fig.tight_layout()
    fig.savefig(run_dir / "confidence.png", dpi=120)
    print(f"wrote {run_dir / 'running_avg.png'} and {run_dir / 'confidence.png'}")


if __name__ == "__main__":
    plot(Path(sys.argv[1] if len(sys.argv) > 1 else "runs/default"))
