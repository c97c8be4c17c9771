"""CSV / JSON / SVG output for runs and sweeps."""

from __future__ import annotations

import csv
import json
import math
from typing import Sequence

import numpy as np

from .harness import GapRow, SweepResult, SweepRow
from .optimizer import Estimate

SWEEP_HEADER = ["n", "rep", "theta_err", "xi_err", "m_sup_err", "u_sup_err", "mn_value", "wall_ms", "failed"]
GAP_HEADER = ["n", "rep", "max_gap", "evaluated"]


def _open(path, mode="w"):
    try:
        return open(path, mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _num(v) -> str:
    # shortest round-trip text; numpy scalars repr as "np.float64(...)"
    return repr(float(v))


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for r in rows:
            writer.writerow([int(r.n), int(r.rep), _num(r.theta_err), _num(r.xi_err), _num(r.m_sup_err),
                             _num(r.u_sup_err), _num(r.mn_value), _num(r.wall_ms), int(r.failed)])


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [SweepRow(int(row["n"]), int(row["rep"]), float(row["theta_err"]), float(row["xi_err"]),
                         float(row["m_sup_err"]), float(row["u_sup_err"]), float(row["mn_value"]),
                         float(row["wall_ms"]), int(row["failed"])) for row in reader]


def write_gap_csv(rows: Sequence[GapRow], path) -> None:
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GAP_HEADER)
        for r in rows:
            writer.writerow([int(r.n), int(r.rep), _num(r.max_gap), int(r.evaluated)])


def estimate_to_dict(est: Estimate) -> dict:
    return {
        "theta_hat": [float(v) for v in est.theta],
        "xi_hat": [float(v) for v in est.xi],
        "u_coeffs": [float(v) for v in est.u_coeffs],
        "mn_value": float(est.mn_value),
        "converged": bool(est.converged),
        "evals": int(est.evals),
        "seed": int(est.seed),
    }


def write_estimate_json(est: Estimate, path) -> None:
    # json writes floats with repr, which round-trips exactly
    with _open(path) as fh:
        json.dump(estimate_to_dict(est), fh, indent=2)
        fh.write("\n")


def read_estimate_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_sweep_svg(result: SweepResult, path, column: str = "theta_err") -> None:
    """Log-log line plot of the per-n median of ``column``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed salt keeps the generated element ids, and so the file, reproducible
    med = {n: v for n, v in result.medians(column).items() if v > 0 and math.isfinite(v)}
    fig, ax = plt.subplots(figsize=(5, 4))
    if med:
        ns = np.array(sorted(med))
        ax.loglog(ns, [med[n] for n in ns], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel(f"median {column}")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    try:
        with plt.rc_context({"svg.hashsalt": "sieveode"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
