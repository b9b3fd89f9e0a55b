"""
Test check records, report emission and summaries
"""

import math

import orjson
import pandas as pd
import pytest
from pydantic import ValidationError

from oldroyd_lab.services.verification import (
    SCHEMA_VERSION,
    CheckRecord,
    VerificationReport,
    emit_report,
    make_check,
    read_report,
    report_payload,
    summarize_reports,
    write_csv,
)
from oldroyd_lab.utils.errors import ReportError


def sample_report(passing: bool = True) -> VerificationReport:
    report = VerificationReport(experiment="decay", environment={"N": 32, "dt": None}, normalizations=["n1"])
    report.add(make_check("energy", "energy inequality", 1.0, 2.0))
    report.add(make_check("decay", "stress decays", 0.5 if passing else 1.5, 1.0))
    return report


@pytest.mark.unit
class TestMakeCheck:
    """Test relation evaluation"""

    @pytest.mark.parametrize(
        "lhs, rhs, relation, tolerance, expected",
        [
            (1.0, 2.0, "le", 0.0, True),
            (2.1, 2.0, "le", 0.0, False),
            (2.1, 2.0, "le", 0.1, True),
            (3.0, 2.0, "ge", 0.0, True),
            (1.9, 2.0, "ge", 0.1, True),
            (1.0, 1.0 + 1e-9, "eq_rel", 1e-6, True),
            (1.0, 1.1, "eq_rel", 1e-6, False),
            (1e-13, 0.0, "eq_abs", 1e-12, True),
            (math.nan, 1.0, "le", 0.0, False),
        ],
    )
    def test_relations(self, lhs, rhs, relation, tolerance, expected):
        assert make_check("c", "anchor", lhs, rhs, relation=relation, tolerance=tolerance).passed is expected

    def test_range(self):
        assert make_check("c", "anchor", 1.0, 2.0, relation="in_range", lower=0.75).passed
        assert not make_check("c", "anchor", 0.5, 2.0, relation="in_range", lower=0.75).passed
        assert make_check("c", "anchor", -5.0, 2.0, relation="in_range").passed

    def test_unknown_relation(self):
        with pytest.raises(ValidationError):
            CheckRecord(name="c", anchor="a", lhs=1.0, rhs=1.0, relation="lt")

    def test_record_fields(self):
        record = make_check("bernstein", "anchor", 1.0, 2.2, C=2.2, note="calibrated")
        assert record.C == 2.2
        assert record.note == "calibrated"
        assert record.relation == "le"


@pytest.mark.unit
class TestReport:
    """Test report aggregation and serialisation"""

    def test_pass_fail(self):
        assert sample_report().passed
        failing = sample_report(passing=False)
        assert not failing.passed
        assert [check.name for check in failing.failures] == ["decay"]

    def test_empty_report_passes(self):
        assert VerificationReport(experiment="toolbox").passed

    def test_payload(self):
        report = sample_report()
        report.add(make_check("lifespan", "unbounded lifespan", math.inf, 1.0, relation="ge"))
        payload = report_payload(report)
        assert payload["schema_version"] == SCHEMA_VERSION
        assert payload["checks"][-1]["lhs"] == "inf"
        assert payload["environment"]["dt"] is None

    def test_missing_anchor(self):
        report = VerificationReport(experiment="decay")
        report.add(make_check("c", " ", 1.0, 2.0))
        with pytest.raises(ReportError):
            report_payload(report)

    def test_emit_is_deterministic(self, tmp_path):
        first = emit_report(sample_report(), tmp_path / "a" / "verification.json")
        second = emit_report(sample_report(), tmp_path / "b" / "verification.json")
        assert first.read_bytes() == second.read_bytes()
        data = orjson.loads(first.read_bytes())
        assert list(data) == sorted(data)
        assert data["experiment"] == "decay"

    def test_read_invalid(self, tmp_path):
        path = tmp_path / "verification.json"
        path.write_text("{not json")
        with pytest.raises(ReportError):
            read_report(path)


@pytest.mark.unit
class TestArtifacts:
    """Test CSV emission and report summaries"""

    def test_csv_round_trip(self, tmp_path):
        frame = pd.DataFrame({"time": [0.0, 0.1], "value": [1.0 / 3.0, 2.0 / 3.0]})
        path = write_csv(frame, tmp_path / "out" / "diagnostics.csv")
        text = path.read_bytes()
        assert b"\r\n" not in text
        assert text.splitlines()[0] == b"time,value"
        pd.testing.assert_frame_equal(pd.read_csv(path), frame)

    def test_summary(self, tmp_path):
        emit_report(sample_report(), tmp_path / "run_a" / "verification.json")
        emit_report(sample_report(passing=False), tmp_path / "run_b" / "sweep_0" / "verification.json")
        summary = summarize_reports(tmp_path)
        assert summary["schema_version"] == SCHEMA_VERSION
        assert not summary["passed"]
        assert [entry["path"] for entry in summary["reports"]] == [
            "run_a/verification.json",
            "run_b/sweep_0/verification.json",
        ]
        assert summary["reports"][1]["failed"] == ["decay"]
        assert summary["reports"][0]["checks"] == 2

    def test_empty_summary(self, tmp_path):
        summary = summarize_reports(tmp_path)
        assert summary["reports"] == []
        assert summary["passed"]
