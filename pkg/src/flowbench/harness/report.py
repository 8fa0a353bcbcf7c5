"""Results persistence: the results table, the run summary, and corner-plot
bin tables.

All CSV outputs start with a single ``#`` comment line embedding the tool
version and the master seed; :func:`read_csv_rows` skips it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..metrics import METRIC_TAGS
from .select import GridPointResult, ReplicaResult, Selection

# Deterministic columns only: wall-clock timings live in the separate
# timings table so the results table is bit-identical across repeated runs
# with the same master seed.
RESULTS_COLUMNS = [
    "dim", "selection", "algorithm", "hidden_layers", "n_bijectors",
    "spline_knots", "ks_mean", "ks_std", "ks_p_value", "swd_mean", "swd_std",
    "fn_mean", "fn_std", "epochs", "failed_replicas", "note",
]

TIMING_COLUMNS = [
    "dim", "selection", "algorithm", "hidden_layers", "n_bijectors",
    "spline_knots", "epochs", "train_seconds", "prediction_seconds",
]

# Full-scale 4-D A-RQS average-best row from the source study, written into
# every results table as documented context, never asserted against.
REFERENCE_ROW = {
    "dim": 4, "selection": "reference-full-scale", "algorithm": "arqs",
    "hidden_layers": "3x128", "n_bijectors": 2, "spline_knots": 8,
    "ks_mean": 1.2, "ks_std": 0.1, "ks_p_value": "",
    "swd_mean": 2.6, "swd_std": 0.4, "fn_mean": 0.7, "fn_std": 0.2,
    "epochs": 670, "train_seconds": 7606, "prediction_seconds": 54,
    "failed_replicas": "",
    "note": "context only: 1e5 train points, 670 epochs, GPU",
}


def _meta_line(master_seed: int) -> str:
    return f"# flowbench {__version__} master_seed={master_seed}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: list[str], rows: list[dict], master_seed: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_meta_line(master_seed) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader)


def _metric_cells_average(point: GridPointResult) -> dict:
    # average-best: mean over replicas, std across training replicas
    cells = {}
    good = point.successful()
    for tag, prefix in zip(METRIC_TAGS, ("ks", "swd", "fn")):
        means = [r.outcomes[tag].mean for r in good]
        cells[f"{prefix}_mean"] = float(np.mean(means))
        cells[f"{prefix}_std"] = float(np.std(means, ddof=1)) if len(means) > 1 else 0.0
    ks_ps = [r.outcomes["KS"].p_value for r in good
             if r.outcomes["KS"].p_value is not None]
    cells["ks_p_value"] = float(np.mean(ks_ps)) if ks_ps else ""
    cells["epochs"] = float(np.mean([r.epochs for r in good]))
    cells["train_seconds"] = float(np.mean([r.train_seconds for r in good]))
    cells["prediction_seconds"] = float(np.mean([r.prediction_seconds for r in good]))
    return cells


def _metric_cells_absolute(replica: ReplicaResult) -> dict:
    # absolute-best: single replica, std across evaluation repeats
    cells = {}
    for tag, prefix in zip(METRIC_TAGS, ("ks", "swd", "fn")):
        out = replica.outcomes[tag]
        cells[f"{prefix}_mean"] = out.mean
        cells[f"{prefix}_std"] = out.std
    ks_p = replica.outcomes["KS"].p_value
    cells["ks_p_value"] = ks_p if ks_p is not None else ""
    cells["epochs"] = replica.epochs
    cells["train_seconds"] = replica.train_seconds
    cells["prediction_seconds"] = replica.prediction_seconds
    return cells


def results_rows(dim: int, selection: Selection) -> list[dict]:
    point = selection.average_best
    base = {
        "dim": dim,
        "algorithm": point.arch,
        "hidden_layers": "x".join(str(w) for w in point.hyper.hidden),
        "n_bijectors": point.hyper.n_bijectors,
        "spline_knots": point.hyper.knots if point.hyper.knots is not None else "",
        "failed_replicas": selection.excluded_failures,
        "note": "",
    }
    avg = {**base, "selection": "average-best", **_metric_cells_average(point)}
    best = {**base, "selection": "absolute-best",
            **_metric_cells_absolute(selection.absolute_best)}
    return [avg, best]


def write_results_table(path, rows: list[dict], master_seed: int,
                        include_reference: bool = True) -> None:
    all_rows = list(rows)
    if include_reference:
        all_rows.append(REFERENCE_ROW)
    write_csv(path, RESULTS_COLUMNS, all_rows, master_seed)


def write_timings_table(path, rows: list[dict], master_seed: int,
                        include_reference: bool = True) -> None:
    all_rows = list(rows)
    if include_reference:
        all_rows.append(REFERENCE_ROW)
    write_csv(path, TIMING_COLUMNS, all_rows, master_seed)


def write_summary(path, dim: int, selections: dict[str, Selection],
                  master_seed: int, extra: dict | None = None) -> None:
    """Structured run summary with p-values and sigma classifications."""
    doc = {
        "tool_version": __version__,
        "master_seed": master_seed,
        "dim": dim,
        "architectures": {},
    }
    if extra:
        doc.update(extra)
    for arch, sel in selections.items():
        point = sel.average_best
        doc["architectures"][arch] = {
            "hyperparameters": point.hyper.to_dict(),
            "excluded_failures": sel.excluded_failures,
            "average_best": {
                tag: {
                    "mean_over_replicas": float(np.mean(
                        [r.outcomes[tag].mean for r in point.successful()])),
                }
                for tag in METRIC_TAGS
            },
            "absolute_best": {
                tag: sel.absolute_best.outcomes[tag].to_dict()
                for tag in METRIC_TAGS
            },
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------------------
# corner-plot data


@dataclass
class CornerFiles:
    hist_1d: list[Path]
    hist_2d: list[Path]


def write_corner_data(out_dir, test_data: np.ndarray, flow_data: np.ndarray,
                      master_seed: int, bins: int = 40,
                      max_pair_dims: int = 5) -> CornerFiles:
    """Per-dimension 1-D histograms and pairwise 2-D histograms for the
    first ``max_pair_dims`` dimensions, as CSV bin tables with shared edges."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dim = test_data.shape[1]
    edges = []
    for i in range(dim):
        lo = min(test_data[:, i].min(), flow_data[:, i].min())
        hi = max(test_data[:, i].max(), flow_data[:, i].max())
        edges.append(np.linspace(lo, hi, bins + 1))

    files_1d = []
    for i in range(dim):
        ct, _ = np.histogram(test_data[:, i], bins=edges[i])
        cf, _ = np.histogram(flow_data[:, i], bins=edges[i])
        rows = [
            {"bin_lo": float(edges[i][b]), "bin_hi": float(edges[i][b + 1]),
             "count_test": int(ct[b]), "count_flow": int(cf[b])}
            for b in range(bins)
        ]
        path = out_dir / f"corner_1d_dim{i}.csv"
        write_csv(path, ["bin_lo", "bin_hi", "count_test", "count_flow"],
                  rows, master_seed)
        files_1d.append(path)

    files_2d = []
    k = min(dim, max_pair_dims)
    for i in range(k):
        for j in range(i + 1, k):
            ct, _, _ = np.histogram2d(test_data[:, i], test_data[:, j],
                                      bins=[edges[i], edges[j]])
            cf, _, _ = np.histogram2d(flow_data[:, i], flow_data[:, j],
                                      bins=[edges[i], edges[j]])
            rows = []
            for bi in range(bins):
                for bj in range(bins):
                    rows.append({
                        "xbin_lo": float(edges[i][bi]), "xbin_hi": float(edges[i][bi + 1]),
                        "ybin_lo": float(edges[j][bj]), "ybin_hi": float(edges[j][bj + 1]),
                        "count_test": int(ct[bi, bj]), "count_flow": int(cf[bi, bj]),
                    })
            path = out_dir / f"corner_2d_dim{i}_dim{j}.csv"
            write_csv(path, ["xbin_lo", "xbin_hi", "ybin_lo", "ybin_hi",
                             "count_test", "count_flow"], rows, master_seed)
            files_2d.append(path)
    return CornerFiles(hist_1d=files_1d, hist_2d=files_2d)
