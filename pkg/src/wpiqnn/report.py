"""
Run reports, multi-seed aggregation, and file outputs.

Numbers in CSV files carry 17 significant digits so they round-trip exactly;
missing values are empty cells. Every file is written to a temporary name
and renamed into place.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import AggregationError
from .training import HISTORY_COLUMNS, LossBundle, SeedResult

METRICS = ("rel_l2", "rel_linf")


def fmt(x) -> str:
    """17-significant-digit text for a number; '' for NaN or None."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else f"{x:.17g}"


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[fmt(v) if not isinstance(v, str) else v for v in row] for row in rows])
    return buf.getvalue()


def write_csv(path, header, rows):
    _atomic_write(path, csv_text(header, rows))


def write_history_csv(path, history):
    write_csv(path, HISTORY_COLUMNS, [[row[c] for c in HISTORY_COLUMNS] for row in history])


def read_history_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k == "epoch" else float(v) if v else float("nan")) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def write_matrix_csv(path, matrix):
    matrix = np.atleast_2d(matrix)
    text = "\n".join(",".join(fmt(v) for v in row) for row in matrix) + "\n"
    _atomic_write(path, text)


# --------------------------------------------------------------------------- aggregation


def seed_entry(result: SeedResult, history_file=None, checkpoint_file=None) -> dict:
    return {
        "seed": result.seed,
        "failed": result.failed,
        "message": result.message,
        "epochs_completed": result.epochs_completed,
        "wall_time": result.wall_time,
        "errors": result.errors,
        "history_file": history_file,
        "checkpoint_file": checkpoint_file,
    }


def mean_std_text(mean: float, std: float) -> str:
    """'1.63 ± 0.43 × 10^-5' style: both numbers share the mean's exponent."""
    if mean == 0 or not np.isfinite(mean):
        return f"{mean:.2f} ± {std:.2f}"
    exp = math.floor(math.log10(abs(mean)))
    scale = 10.0**exp
    return f"{mean / scale:.2f} ± {std / scale:.2f} × 10^{exp}"


def aggregate(seeds: list[dict]) -> dict:
    """Mean and sample standard deviation of every per-field metric.

    Failed seeds are excluded and counted. With one usable seed the standard
    deviation is 0 and ``single_seed`` is set.
    """
    if not seeds:
        raise AggregationError("no seed reports to aggregate")
    ok = sorted((s for s in seeds if not s["failed"]), key=lambda s: s["seed"])
    if not ok:
        raise AggregationError(f"all {len(seeds)} seeds failed")
    metrics = {}
    for name in ok[0]["errors"]:
        metrics[name] = {}
        for metric in METRICS:
            vals = np.array([s["errors"][name][metric] for s in ok])
            mean = float(np.mean(vals))
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            metrics[name][metric] = {"mean": mean, "std": std, "text": mean_std_text(mean, std)}
    return {
        "n_seeds": len(seeds),
        "n_used": len(ok),
        "n_failed": len(seeds) - len(ok),
        "failed_seeds": sorted(s["seed"] for s in seeds if s["failed"]),
        "single_seed": len(ok) == 1,
        "metrics": metrics,
    }


@dataclass
class RunReport:
    config: dict
    seeds: list
    aggregate: dict
    n_parameters: int
    non_default_weights: dict = field(default_factory=dict)

    @classmethod
    def build(cls, config, seed_entries, n_parameters) -> "RunReport":
        cfg = config.to_dict()
        weights = cfg["training"]["loss_weights"]
        odd = {k: v for k, v in weights.items() if v != 1.0}
        return cls(cfg, sorted(seed_entries, key=lambda s: s["seed"]), aggregate(seed_entries), n_parameters, odd)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))

    def write(self, path):
        _atomic_write(path, self.to_json())


# --------------------------------------------------------------------------- plots and fields


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_history(path, histories: dict):
    """Loss curves (log scale) for {seed: history}."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for seed, hist in sorted(histories.items()):
        if hist:
            ax.semilogy([h["epoch"] for h in hist], [h["loss_total"] for h in hist], label=f"seed {seed}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("total loss")
    if len(histories) <= 10:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _heatmaps(path, grid_x, grid_y, panels, coords):
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.6))
    extent = [grid_y[0], grid_y[-1], grid_x[0], grid_x[-1]]
    for ax, (title, data) in zip(np.atleast_1d(axes), panels):
        im = ax.imshow(data, origin="lower", aspect="auto", extent=extent, cmap="viridis")
        ax.set_title(title)
        ax.set_xlabel(coords[1])
        ax.set_ylabel(coords[0])
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def default_sections(problem) -> list[float]:
    lo, hi = problem.domain
    return [float(lo[0] + (hi[0] - lo[0]) * s) for s in (0.125, 0.5, 0.75)]


def emit_fields(bundle: LossBundle, params_list, out_dir, grid=(64, 64), sections=None) -> list[Path]:
    """Exact, predicted and |error| fields on a grid plus cross-sections at fixed x.

    Matrices are written with x along rows and the second coordinate along
    columns.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = bundle.problem
    lo, hi = problem.domain
    xs = np.linspace(lo[0], hi[0], grid[0])
    ys = np.linspace(lo[1], hi[1], grid[1])
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    sections = default_sections(problem) if sections is None else list(sections)
    written = []
    for f, name in enumerate(problem.fields):
        exact = problem.exact(f, pts).reshape(grid)
        pred = bundle.predict(params_list, pts, f).reshape(grid)
        err = np.abs(pred - exact)
        for kind, mat in (("exact", exact), ("pred", pred), ("error", err)):
            path = out_dir / f"{kind}_{name}.csv"
            write_matrix_csv(path, mat)
            written.append(path)
        svg = out_dir / f"fields_{name}.svg"
        _heatmaps(svg, xs, ys, [(f"exact {name}", exact), (f"predicted {name}", pred), (f"|error| {name}", err)],
                  problem.coords)
        written.append(svg)
        if sections:
            rows, plt = [], _pyplot()
            fig, ax = plt.subplots(figsize=(6, 4))
            for x0 in sections:
                cut = np.column_stack([np.full_like(ys, x0), ys])
                ex, pr = problem.exact(f, cut), bundle.predict(params_list, cut, f)
                rows.extend([x0, y, e, p] for y, e, p in zip(ys, ex, pr))
                line = ax.plot(ys, ex, label=f"exact, {problem.coords[0]}={x0:g}")
                ax.plot(ys, pr, "--", color=line[0].get_color(), label=f"predicted, {problem.coords[0]}={x0:g}")
            ax.set_xlabel(problem.coords[1])
            ax.set_ylabel(name)
            ax.legend(fontsize="small")
            fig.tight_layout()
            path = out_dir / f"sections_{name}.svg"
            fig.savefig(path, format="svg")
            plt.close(fig)
            csv_path = out_dir / f"sections_{name}.csv"
            write_csv(csv_path, [problem.coords[0], problem.coords[1], "exact", "pred"], rows)
            written += [path, csv_path]
    return written


def output_root(cli_value=None) -> Path:
    """--out-dir, else $WPIQNN_OUT_DIR, else ./runs."""
    return Path(cli_value or os.environ.get("WPIQNN_OUT_DIR") or "runs")
