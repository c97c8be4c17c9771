import json

import numpy as np
import pytest

from sieveode import report as R
from sieveode.harness import GapRow, SweepResult, SweepRow
from sieveode.optimizer import Estimate


def _row(n=100, rep=0, err=0.1):
    return SweepRow(n, rep, err, 0.2, 0.3, 0.4, 1e-3, 12.5)


def test_sweep_csv_header_only(tmp_path):
    path = tmp_path / "s.csv"
    R.write_sweep_csv([], path)
    assert path.read_text() == "n,rep,theta_err,xi_err,m_sup_err,u_sup_err,mn_value,wall_ms,failed\n"


def test_sweep_csv_single_row(tmp_path):
    path = tmp_path / "s.csv"
    R.write_sweep_csv([_row()], path)
    assert len(path.read_text().splitlines()) == 2


def test_sweep_csv_round_trip(tmp_path):
    rows = [_row(100, 0, 1 / 3), SweepRow.failure(400, 1), _row(1600, 2, np.nextafter(0.5, 1))]
    path = tmp_path / "s.csv"
    R.write_sweep_csv(rows, path)
    assert R.read_sweep_csv(path) == rows


def test_gap_csv(tmp_path):
    path = tmp_path / "g.csv"
    R.write_gap_csv([GapRow(100, 0, 0.125, 50)], path)
    assert path.read_text().splitlines() == ["n,rep,max_gap,evaluated", "100,0,0.125,50"]


def test_estimate_json_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    est = Estimate(rng.normal(size=4), rng.normal(size=2), rng.normal(size=7), 1 / 7, True, 123, 5)
    path = tmp_path / "e.json"
    R.write_estimate_json(est, path)
    back = R.read_estimate_json(path)
    assert set(back) == {"theta_hat", "xi_hat", "u_coeffs", "mn_value", "converged", "evals", "seed"}
    assert np.array(back["theta_hat"]).tobytes() == est.theta.tobytes()
    assert np.array(back["xi_hat"]).tobytes() == est.xi.tobytes()
    assert np.array(back["u_coeffs"]).tobytes() == est.u_coeffs.tobytes()
    assert back["mn_value"] == est.mn_value
    assert back["converged"] is True and back["evals"] == 123 and back["seed"] == 5
    json.loads(path.read_text())


def test_unwritable_path_names_it(tmp_path):
    target = tmp_path / "missing" / "s.csv"
    with pytest.raises(OSError, match="missing"):
        R.write_sweep_csv([], target)


def test_sweep_svg(tmp_path):
    pytest.importorskip("matplotlib")
    result = SweepResult([_row(100, k, 0.4) for k in range(3)] + [_row(400, k, 0.2) for k in range(3)])
    path = tmp_path / "s.svg"
    R.write_sweep_svg(result, path)
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    other = tmp_path / "t.svg"
    R.write_sweep_svg(result, other)
    assert other.read_bytes() == path.read_bytes()
