"""Desk-scale run of the full pipeline: simulate, train, evaluate.

    python scripts/reproduce.py --out runs/default

Writes sim.vpl, model.ftab, summary.txt and the two CSVs into --out.
"""

import argparse
import contextlib
import io
import time
from pathlib import Path

from formcast.cli import main


def step(argv, label):
    start = time.perf_counter()
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    if code:
        raise SystemExit(f"{label} failed with exit code {code}")
    print(f"[{label}] {time.perf_counter() - start:.1f}s")
    return buf.getvalue()


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/default")
    ap.add_argument("--seed", type=int, default=2015)
    ap.add_argument("--eval-seed", type=int, default=5000)
    ap.add_argument("--packages", type=int, default=15000)
    ap.add_argument("--tests", type=int, default=5000)
    ap.add_argument("--episodic", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log, table = out / "sim.vpl", out / "model.ftab"
    # a draw yields 2.5 packages on average; over-generate and let train stop at --packages
    draws = args.packages
    step(["simulate", "--seed", str(args.seed), "--draws", str(draws), "--interval", "0", "--out", str(log)], "simulate")
    train = ["train", "--in", str(log), "--table", str(table), "--packages", str(args.packages)]
    if args.episodic:
        train.append("--episodic")
    print(step(train, "train").strip())
    summary = step(
        ["evaluate", "--table", str(table), "--tests", str(args.tests), "--seed", str(args.eval_seed), "--csv-dir", str(out)],
        "evaluate",
    )
    (out / "summary.txt").write_text(summary)
    print(summary)


if __name__ == "__main__":
    run()
