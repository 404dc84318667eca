import csv
import json

import pytest

from ftlab import plotting
from ftlab.errors import ConfigurationError
from ftlab.threshold import CSV_COLUMNS, ExperimentResult


def write_rows(path, ps, C=150.0, shots=10**6, columns=CSV_COLUMNS):
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for p in ps:
            w.writerow({**ExperimentResult(shots, round(C * p * p * shots), p=p, seed=0).row()})
    return path


def data_blocks(dat):
    blocks, cur = [], []
    for line in dat.read_text().splitlines():
        if not line.strip():
            if cur:
                blocks.append(cur)
            cur = []
        elif not line.startswith("#"):
            cur.append([float(v) for v in line.split()])
    if cur:
        blocks.append(cur)
    return blocks


def test_four_rows_plus_reference(tmp_path):
    csv_path = write_rows(tmp_path / "r.csv", [3e-4, 1e-3, 2e-3, 3e-3])
    rows = plotting.read_results_csv(csv_path)
    paths = plotting.write_plotdata(rows, tmp_path, "r_plot", png=False)
    assert [p.suffix for p in paths] == [".dat", ".gp"]
    data, ref = data_blocks(paths[0])
    assert len(data) == 4 and len(data[0]) == 6
    assert len(ref) == 2


def test_reference_passes_through_crossing(tmp_path):
    rows = plotting.read_results_csv(write_rows(tmp_path / "r.csv", [3e-4, 1e-3, 3e-3]))
    fit = {"C": 200.0}
    (x0, y0), (x1, y1) = plotting.reference_line(rows, fit["C"])
    # the line is C p^2, so at p = 1/C it equals p
    assert x1 == pytest.approx(1 / 200.0)
    assert y1 == pytest.approx(x1, rel=1e-12)
    assert y0 == pytest.approx(200.0 * x0 * x0)


def test_fit_json_is_used(tmp_path):
    csv_path = write_rows(tmp_path / "r.csv", [3e-4, 1e-3, 3e-3])
    (tmp_path / "r.json").write_text(json.dumps({"fit": {"C": 321.0}}))
    fit = plotting.load_fit(tmp_path / "r.json")
    assert plotting.anchor_C(plotting.read_results_csv(csv_path), fit) == (321.0, "fit")
    assert plotting.load_fit(tmp_path / "none.json") is None


def test_empty_csv_is_an_error_and_writes_nothing(tmp_path):
    csv_path = write_rows(tmp_path / "e.csv", [])
    with pytest.raises(ConfigurationError):
        plotting.read_results_csv(csv_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["e.csv"]


def test_missing_column_is_named(tmp_path):
    cols = [c for c in CSV_COLUMNS if c != "ci_high"]
    csv_path = write_rows(tmp_path / "m.csv", [1e-3], columns=cols)
    with pytest.raises(ConfigurationError, match="ci_high"):
        plotting.read_results_csv(csv_path)


def test_png_is_rendered(tmp_path):
    rows = plotting.read_results_csv(write_rows(tmp_path / "r.csv", [3e-4, 1e-3, 3e-3]))
    png = plotting.plot_rates(rows, tmp_path / "r.png", C=150.0)
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_coherent_png(tmp_path):
    rows = [{"theta": t, "rate": 0.1, "shots": 100} for t in (0.2, 0.6)]
    assert plotting.plot_coherent(rows, tmp_path / "c.png").stat().st_size > 0
