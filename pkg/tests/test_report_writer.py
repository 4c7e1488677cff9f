import json

import pandas as pd
import pytest

from modules.errors import DataError
from modules.evaluation.sga_validation import SituationResult, aggregate, build_grid, compare_reports
from modules.output import report_writer


def make_report(offset=0.0, failed_index=None):
    results = []
    for k, angles in enumerate(build_grid().situations()):
        if k == failed_index:
            results.append(SituationResult(index=k, angles=angles, failed=True, error="boom"))
            continue
        results.append(SituationResult(index=k, angles=angles, miou=0.5 + 0.01 * k + offset,
                                       pixel_accuracy=0.8 + offset, per_class_iou=[0.5, None],
                                       evaluated_pixels=100))
    return aggregate(results, ["wall", "floor"])


def test_write_report_produces_json_and_tables(tmp_path):
    report = make_report(failed_index=2)
    paths = report_writer.write_report(report, tmp_path / "out" / "sga")

    assert paths["json"].name == "sga.json"
    data = json.loads(paths["json"].read_text(encoding="utf-8"))
    assert len(data["situations"]) == 16
    assert data["failed"] == [2]
    assert data["mean"]["pixel_accuracy"] == pytest.approx(0.8)
    assert data["variance"]["pixel_accuracy"] == pytest.approx(0.0, abs=1e-15)
    assert data["class_names"] == ["wall", "floor"]
    assert data["per_class_mean_iou"] == [0.5, None]

    table = pd.read_csv(paths["csv"])
    assert len(table) == 16
    assert table.loc[4, "situation"] == "(0,5,0)"
    assert table.loc[2, "status"] == "failed"

    summary = pd.read_csv(paths["summary"])
    assert summary["statistic"].tolist() == ["Mean", "Variance", "Range"]


def test_load_report_recomputes_aggregates(tmp_path):
    report = make_report(failed_index=5)
    paths = report_writer.write_report(report, tmp_path / "sga.json")
    loaded = report_writer.load_report(paths["json"])
    assert loaded.aggregates == report.aggregates
    assert [s.index for s in loaded.failed_situations] == [5]
    assert loaded.class_names == ["wall", "floor"]


def test_load_report_errors(tmp_path):
    with pytest.raises(DataError):
        report_writer.load_report(tmp_path / "absent.json")
    (tmp_path / "bad.json").write_text('{"mean": 1}', encoding="utf-8")
    with pytest.raises(DataError):
        report_writer.load_report(tmp_path / "bad.json")


def test_comparison_table():
    table = report_writer.comparison_table(compare_reports(make_report(), make_report(offset=0.1)))
    assert table["statistic"].tolist() == ["Mean", "Variance", "Range"]
    assert table.loc[0, "miou_delta"] == pytest.approx(0.1)
    assert table.loc[2, "pixel_accuracy_delta"] == pytest.approx(0.0, abs=1e-12)


def test_write_record(tmp_path):
    path = report_writer.write_record({"miou": 0.5}, tmp_path / "nested" / "r.json")
    assert json.loads(path.read_text(encoding="utf-8")) == {"miou": 0.5}
