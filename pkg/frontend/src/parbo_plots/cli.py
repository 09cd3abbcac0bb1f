"""Render regret curves from a benchmark summary CSV.

The input schema is the harness summary file: columns batch, method, mean,
stderr, n_trials.  Each method becomes one line with a shaded band of one
standard error around the mean.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

REQUIRED_COLUMNS = ("batch", "method", "mean", "stderr", "n_trials")


def _read_summary(path: Path) -> dict[str, list[tuple[int, float, float]]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise ValueError(f"missing column: {column}")
        rows = list(reader)
    if not rows:
        raise ValueError("no data rows")
    by_method: dict[str, list[tuple[int, float, float]]] = {}
    for i, row in enumerate(rows, start=2):
        try:
            batch = int(row["batch"])
            mean = float(row["mean"])
            stderr = float(row["stderr"])
        except ValueError:
            raise ValueError(f"non-numeric value at row {i}")
        by_method.setdefault(row["method"], []).append((batch, mean, stderr))
    batch_sets = {m: tuple(sorted(b for b, _, _ in pts)) for m, pts in by_method.items()}
    reference = next(iter(batch_sets.values()))
    for method, batches in batch_sets.items():
        if batches != reference:
            raise ValueError(
                f"methods cover different batch ranges ({method} vs others)"
            )
    return by_method


def plot_summary(
    summary_csv,
    out_image,
    y_label: str = "simple regret",
    log_y: bool = False,
    force: bool = False,
) -> int:
    """Write the figure; returns a process exit status rather than raising."""
    summary_csv = Path(summary_csv)
    out_image = Path(out_image)
    try:
        by_method = _read_summary(summary_csv)
    except OSError as exc:
        print(f"error: cannot read {summary_csv}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {summary_csv}: {exc}", file=sys.stderr)
        return 1
    if out_image.exists() and not force:
        print(f"error: {out_image} exists; pass --force to overwrite", file=sys.stderr)
        return 1

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method in sorted(by_method):
        pts = sorted(by_method[method])
        batches = [b for b, _, _ in pts]
        means = [m for _, m, _ in pts]
        los = [m - s for _, m, s in pts]
        his = [m + s for _, m, s in pts]
        (line,) = ax.plot(batches, means, marker="o", markersize=3, label=method)
        ax.fill_between(batches, los, his, alpha=0.2, color=line.get_color())
    ax.set_xlabel("batch")
    ax.set_ylabel(y_label)
    if log_y:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_image)
    plt.close(fig)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-summary",
        description="Plot per-method mean and standard-error regret curves.",
    )
    parser.add_argument("summary_csv", help="summary CSV (batch, method, mean, stderr, n_trials)")
    parser.add_argument("out_image", help="output image path (png, pdf, svg, ...)")
    parser.add_argument("--log-y", action="store_true", help="log-scale y axis")
    parser.add_argument("--ylabel", default="simple regret", help="y-axis label")
    parser.add_argument("--force", action="store_true", help="overwrite an existing output file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return plot_summary(
        args.summary_csv, args.out_image, y_label=args.ylabel, log_y=args.log_y, force=args.force
    )


if __name__ == "__main__":
    sys.exit(main())
