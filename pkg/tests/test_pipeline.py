import json

import numpy as np
import pytest

from hedonic_esg.errors import ValidationError
from hedonic_esg.pipeline import (DATA_DIR_ENV, MODELS, PipelineConfig, emit_tables,
                                  report_dict, report_tables, run_city, run_pipeline)


@pytest.fixture(scope="module")
def atl_report():
    return run_pipeline(PipelineConfig(cities=("ATL",)))


@pytest.fixture(scope="module")
def multi_config(city_dir):
    return PipelineConfig(cities=("ATL", "AUS", "COL", "SEA"), data_dir=str(city_dir))


@pytest.fixture(scope="module")
def multi_report(multi_config):
    return run_pipeline(multi_config)


def _tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_atl_only_run(atl_report):
    assert atl_report.completed == ("ATL",)
    res = atl_report.cities["ATL"]
    assert len(res.selection.series) == 22
    assert res.innovation_years[0] == 2001
    assert not atl_report.pca
    assert any("PCA skipped" in w for w in atl_report.warnings)
    assert atl_report.significance.cities == ("ATL",)
    assert set(atl_report.quadrants) == {"waterfront", "accessible"}
    assert res.gam.adjusted_r2 >= res.glm.adjusted_r2 - 0.02


def test_atl_adf_rows(atl_report):
    adf = atl_report.cities["ATL"].adf
    labels = adf.rows
    assert "av_price (raw)" in labels and "av_price (innov)" in labels
    assert "waterfront (fd)" in labels and "green (rtn)" in labels
    assert len(labels) == 6 + 5 + 2


def test_multi_city_run(multi_report):
    assert multi_report.completed == ("ATL", "AUS", "COL", "SEA")
    for model in MODELS:
        mat = multi_report.residuals[model]
        assert mat.shape == (22, 4)
        assert multi_report.pca[model].explained.sum() == pytest.approx(1.0)
        assert multi_report.decay[model].verdict in ("exponential", "power")
    assert multi_report.significance.cities == ("ATL", "AUS", "COL", "SEA")
    assert set(multi_report.quadrants["waterfront"].as_dict()) == {"ATL", "AUS", "COL", "SEA"}


def test_cities_are_independent(multi_config, multi_report):
    alone = run_pipeline(multi_config.with_overrides(cities=("COL",)))
    a, b = alone.cities["COL"], multi_report.cities["COL"]
    assert np.array_equal(a.selection.series.values, b.selection.series.values)
    assert a.glm.p_values == b.glm.p_values
    assert a.gam.p_values == b.gam.p_values


def test_threads_do_not_change_results(multi_config, multi_report):
    threaded = run_pipeline(multi_config.with_overrides(workers=3))
    assert report_dict(threaded) == report_dict(multi_report)


def test_reruns_are_byte_identical(multi_config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    emit_tables(run_pipeline(multi_config), a, ("csv", "json"))
    emit_tables(run_pipeline(multi_config), b, ("csv", "json"))
    ta, tb = _tree(a), _tree(b)
    assert ta == tb
    assert "report.json" in ta and "explained.csv" in tb


def test_report_json_is_strict(multi_report, tmp_path):
    emit_tables(multi_report, tmp_path)
    data = json.loads((tmp_path / "report.json").read_text(),
                      parse_constant=lambda c: pytest.fail(f"non-standard constant {c}"))
    assert data["provenance"]["config_sha256"] == multi_report.config.digest()
    assert data["provenance"]["kernels"] in ("numba", "numpy")
    assert data["completed"] == ["ATL", "AUS", "COL", "SEA"]
    assert len(data["cities"]["ATL"]["ar_arch"]["innovations"]) == 22


def test_report_tables_have_distinct_names(multi_report):
    names = [t.name for t in report_tables(multi_report)]
    assert len(names) == len(set(names))


def test_missing_city_file_is_recorded(city_dir):
    report = run_pipeline(PipelineConfig(cities=("ATL", "XYZ"), data_dir=str(city_dir)))
    assert report.completed == ("ATL",)
    assert report.failed == ("XYZ",)
    assert report.cities["XYZ"].failed_stage == "ingest"
    assert any("XYZ" in w for w in report.warnings)
    assert report.significance.cities == ("ATL",)


def test_run_city_reports_without_raising(tmp_path):
    (tmp_path / "BAD.csv").write_text("year,av_price\n2000,1\n")
    res = run_city(PipelineConfig(cities=("BAD",), data_dir=str(tmp_path)), "BAD")
    assert not res.completed
    assert res.error.startswith("SchemaError")


def test_config_validation():
    with pytest.raises(ValidationError):
        PipelineConfig(cities=())
    with pytest.raises(ValidationError):
        PipelineConfig(cities=("ATL", "atl"))
    with pytest.raises(ValidationError):
        PipelineConfig(adf_significance=1.5)
    with pytest.raises(ValidationError):
        PipelineConfig(lambda_policy="ridge")
    with pytest.raises(ValidationError):
        PipelineConfig(formats=("xml",))
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict({"city": ["ATL"]})
    assert PipelineConfig(cities="sea, atl").cities == ("ATL", "SEA")


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"cities": ["SEA", "ATL"], "lambda_policy": "df:3",
                                "tally_threshold": 0.05}))
    cfg = PipelineConfig.from_file(path, tally_threshold=0.2, lambda_policy=None)
    assert cfg.cities == ("ATL", "SEA")
    assert cfg.lambda_policy == "df:3"
    assert cfg.tally_threshold == 0.2
    path.write_text("[1, 2]")
    with pytest.raises(ValidationError):
        PipelineConfig.from_file(path)


def test_digest_ignores_output_settings():
    a = PipelineConfig(output_dir="x", formats=("json",), workers=4)
    b = PipelineConfig()
    assert a.digest() == b.digest()
    assert PipelineConfig(tally_threshold=0.05).digest() != b.digest()


def test_env_var_supplies_data_dir(monkeypatch, city_dir):
    monkeypatch.setenv(DATA_DIR_ENV, str(city_dir))
    cfg = PipelineConfig(cities=("SEA",))
    assert cfg.resolved_data_dir() == str(city_dir)
    assert run_pipeline(cfg).completed == ("SEA",)
    monkeypatch.delenv(DATA_DIR_ENV)
    assert PipelineConfig(cities=("SEA",)).resolved_data_dir() is None
