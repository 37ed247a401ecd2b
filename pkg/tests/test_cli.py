import csv
import io
import json

import pytest

from hedonic_esg.cli import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, main, read_residual_csv
from hedonic_esg.panel import builtin_csv_path, builtin_residuals


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _csv_rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_ingest_builtin(capsys):
    code, out, _ = run(capsys, "ingest")
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("year,av_price")
    assert len(out.splitlines()) == 24


def test_ingest_json_summary(capsys):
    code, out, _ = run(capsys, "ingest", "--format", "json")
    assert json.loads(out) == [{"city": "ATL", "rows": 23, "first_year": 2000,
                                "last_year": 2022}]


def test_ingest_writes_files(capsys, tmp_path):
    code, out, _ = run(capsys, "ingest", str(builtin_csv_path("ATL")), "--out", str(tmp_path))
    assert code == EXIT_OK
    assert (tmp_path / "ATL.csv").read_text() == builtin_csv_path("ATL").read_text()


def test_transform(capsys):
    code, out, _ = run(capsys, "transform")
    assert code == EXIT_OK
    assert "rtn" in out and "fd" in out


def test_adf_flags(capsys):
    code, out, _ = run(capsys, "adf", "--lag", "2", "--significance", "0.05")
    assert code == EXIT_OK
    rows = {r[0]: r[1:] for r in _csv_rows(out) if r}
    assert "av_price (raw)" in rows


def test_innovate(capsys):
    code, out, _ = run(capsys, "innovate", "--format", "json")
    assert code == EXIT_OK
    assert "ATL" in out


@pytest.mark.parametrize("model", ["glm", "gam", "both"])
def test_fit(capsys, model):
    code, out, _ = run(capsys, "fit", "--model", model)
    assert code == EXIT_OK
    models = {r[1] for r in _csv_rows(out)[1:] if r}
    assert models == ({"GLM", "GAM"} if model == "both" else {model.upper()})


def test_fit_partial_failure(capsys, city_dir):
    code, out, err = run(capsys, "fit", "--data-dir", str(city_dir), "--cities", "ATL,XYZ")
    assert code == EXIT_PARTIAL
    assert "XYZ" in err


def test_pca_builtin(capsys):
    code, out, _ = run(capsys, "pca", "--residuals", "glm")
    assert code == EXIT_OK
    rows = _csv_rows(out)
    assert rows[0][:3] == ["model", "pc1", "pc2"]
    assert float(rows[1][1]) == pytest.approx(0.453, abs=0.01)


def test_pca_from_csv_file(capsys, tmp_path):
    mat = builtin_residuals("gam")
    path = tmp_path / "resid.csv"
    lines = ["year," + ",".join(mat.city_labels)]
    lines += [f"{y}," + ",".join(repr(float(v)) for v in row)
              for y, row in zip(mat.year_labels, mat.values)]
    path.write_text("\n".join(lines) + "\n")
    assert (read_residual_csv(path).values == mat.values).all()
    code, out, _ = run(capsys, "pca", "--residuals", str(path), "--format", "json")
    assert code == EXIT_OK
    records = json.loads(out)["explained"]
    assert float(records[0]["pc1"]) == pytest.approx(0.319, abs=0.01)


def test_decay(capsys):
    code, out, _ = run(capsys, "decay")
    assert code == EXIT_OK
    verdicts = {r[0]: r[-1] for r in _csv_rows(out)[1:] if r}
    assert set(verdicts.values()) == {"exponential"}
    code, out, _ = run(capsys, "decay", "--proportions", "0.5,0.25,0.125,0.0625,0.03125")
    assert code == EXIT_OK and "exponential" in out


def test_quadrant(capsys):
    code, out, _ = run(capsys, "quadrant", "--factor", "waterfront")
    assert code == EXIT_OK
    quadrants = {r[0]: r[3] for r in _csv_rows(out)[1:] if r}
    assert quadrants["SEA"] == "HH" and quadrants["ATL"] == "LH"


def test_plot_data(capsys, tmp_path):
    code, out, _ = run(capsys, "plot-data", "--out", str(tmp_path))
    assert code == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert "plot_quadrant_waterfront.csv" in names
    assert len(names) >= 4


def test_run_with_config_and_env(capsys, tmp_path, city_dir, monkeypatch):
    monkeypatch.setenv("HEDONIC_ESG_DATA_DIR", str(city_dir))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"cities": ["ATL", "SEA"], "tally_threshold": 0.2}))
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "run", "--config", str(cfg), "--out", str(out_dir),
                       "--format", "json")
    assert code == EXIT_OK
    report = json.loads((out_dir / "report.json").read_text())
    assert report["completed"] == ["ATL", "SEA"]
    assert report["significance"]["threshold"] == 0.2
    assert (out_dir / "explained.json").exists()


def test_run_to_stdout_is_json(capsys):
    code, out, err = run(capsys, "run")
    assert code == EXIT_OK
    assert json.loads(out)["completed"] == ["ATL"]
    assert "PCA skipped" in err


def test_run_partial(capsys, city_dir):
    code, _, err = run(capsys, "run", "--data-dir", str(city_dir), "--cities", "ATL,XYZ")
    assert code == EXIT_PARTIAL
    assert "XYZ" in err


def test_errors_exit_two(capsys, tmp_path):
    code, _, err = run(capsys, "ingest", str(tmp_path / "missing.csv"))
    assert code == EXIT_ERROR and err.startswith("error:")
    code, _, err = run(capsys, "run", "--lambda-policy", "ridge")
    assert code == EXIT_ERROR
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    code, _, err = run(capsys, "run", "--config", str(bad))
    assert code == EXIT_ERROR and "colour" in err


def test_global_flags_work_after_the_subcommand(capsys):
    code, out, _ = run(capsys, "--format", "json", "pca")
    assert code == EXIT_OK and json.loads(out)
    code, out2, _ = run(capsys, "pca", "--format", "json")
    assert out2 == out


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--model", "ols"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main([])
