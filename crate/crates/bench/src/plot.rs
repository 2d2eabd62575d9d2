//! Plot scripts for sweep CSVs.

use std::path::{Path, PathBuf};

use crate::report::read_rows;
use crate::BenchError;

const TEMPLATE: &str = r##"#!/usr/bin/env python3
# Draws time and LOBPCG iterations against the swept parameter from the
# summary rows of CSV_NAME. Needs matplotlib.
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CSV = os.path.join(HERE, "CSV_NAME")
XCOL = "X_COLUMN"
XLABEL = "X_LABEL"
COLORS = {"lobpcg-precond": "tab:blue", "lobpcg-plain": "tab:orange", "lanczos-shifted": "tab:green"}


def rows():
    with open(CSV, newline="") as f:
        lines = (line for line in f if not line.startswith("#"))
        for row in csv.DictReader(lines):
            if row["row"] == "summary" and row["n_ok"] not in ("", "0"):
                yield row


def series(key, ci):
    out = {}
    for row in rows():
        if row[key] == "":
            continue
        pts = out.setdefault(row["method"], [])
        pts.append((float(row[XCOL]), float(row[key]), float(row[ci] or 0.0)))
    return {m: sorted(p) for m, p in out.items()}


def panel(ax, key, ci, ylabel, methods=None, logy=True):
    for method, pts in sorted(series(key, ci).items()):
        if methods and method not in methods:
            continue
        x = [p[0] for p in pts]
        y = [p[1] for p in pts]
        lo = [p[1] - p[2] for p in pts]
        hi = [p[1] + p[2] for p in pts]
        if logy:
            lo = [max(v, 0.5 * p[1]) for v, p in zip(lo, pts)]
        color = COLORS.get(method)
        ax.plot(x, y, marker="o", color=color, label=method)
        ax.fill_between(x, lo, hi, color=color, alpha=0.25)
    ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    else:
        ax.set_ylim(bottom=0)
    ax.set_xlabel(XLABEL)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def main():
    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4))
    panel(left, "time_mean_s", "time_ci95_s", "time [s]")
    panel(right, "iterations_mean", "iterations_ci95", "LOBPCG iterations", {"lobpcg-precond", "lobpcg-plain"}, logy=False)
    if XCOL == "gamma":
        left.invert_xaxis()
        right.invert_xaxis()
    fig.tight_layout()
    out = os.path.join(HERE, "PNG_NAME")
    fig.savefig(out, dpi=120)
    print(out)


if __name__ == "__main__":
    sys.exit(main())
"##;

/// Write `<stem>_plot.py` next to `csv_path`; the script reads only that CSV
/// and saves `<stem>.png` beside it.
pub fn emit_plot_script(csv_path: impl AsRef<Path>) -> Result<PathBuf, BenchError> {
    let csv_path = csv_path.as_ref();
    let (header, rows) = read_rows(csv_path)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(row_col), Some(kind_col)) = (col("row"), col("kind")) else {
        return Err(BenchError::Plot("CSV lacks the row/kind columns".into()));
    };
    let summaries: Vec<&Vec<String>> = rows.iter().filter(|r| r[row_col] == "summary").collect();
    let Some(first) = summaries.first() else {
        return Err(BenchError::Plot(format!("{} has no summary rows", csv_path.display())));
    };
    let (xcol, xlabel) = match first[kind_col].as_str() {
        "gap" => ("gamma", "eigenvalue gap gamma"),
        "size" => ("n_vertices", "vertices N"),
        other => return Err(BenchError::Plot(format!("cannot plot a '{other}' sweep"))),
    };
    let name = csv_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| BenchError::Plot("CSV path has no UTF-8 file name".into()))?;
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let script = TEMPLATE
        .replace("CSV_NAME", name)
        .replace("X_COLUMN", xcol)
        .replace("X_LABEL", xlabel)
        .replace("PNG_NAME", &format!("{stem}.png"));
    let out = csv_path.with_file_name(format!("{stem}_plot.py"));
    std::fs::write(&out, script)?;
    Ok(out)
}
