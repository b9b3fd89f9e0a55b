"""
Verification Reports
Check records, deterministic JSON reports and CSV emission
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import orjson
import pandas as pd
from pydantic import BaseModel, Field

from ..utils.errors import ReportError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS


class CheckRecord(BaseModel):
    name: str = Field(..., description="Short identifier of the check")
    anchor: str = Field(..., description="Statement the check verifies")
    lhs: float = Field(..., description="Measured quantity")
    rhs: float = Field(..., description="Bound or reference value; upper end for in_range")
    C: Optional[float] = Field(None, description="Calibrated constant used in rhs")
    tolerance: float = Field(0.0, ge=0, description="Relative slack, absolute for eq_abs")
    relation: str = Field("le", pattern="^(le|ge|eq_rel|eq_abs|in_range)$")
    lower: Optional[float] = Field(None, description="Lower end for in_range")
    passed: bool = False
    note: str = ""


def _holds(lhs: float, rhs: float, relation: str, tolerance: float, lower: Optional[float]) -> bool:
    if math.isnan(lhs) or math.isnan(rhs):
        return False
    if relation == "le":
        return lhs <= rhs + tolerance * abs(rhs)
    if relation == "ge":
        return lhs >= rhs - tolerance * abs(rhs)
    if relation == "eq_rel":
        return abs(lhs - rhs) <= tolerance * abs(rhs)
    if relation == "eq_abs":
        return abs(lhs - rhs) <= tolerance
    low = -math.inf if lower is None else lower
    return low - tolerance * abs(low) <= lhs <= rhs + tolerance * abs(rhs)


def make_check(
    name: str,
    anchor: str,
    lhs: float,
    rhs: float,
    relation: str = "le",
    tolerance: float = 0.0,
    C: Optional[float] = None,
    lower: Optional[float] = None,
    note: str = "",
) -> CheckRecord:
    """Evaluate the relation and build the record"""
    lhs, rhs = float(lhs), float(rhs)
    passed = _holds(lhs, rhs, relation, tolerance, lower)
    record = CheckRecord(
        name=name,
        anchor=anchor,
        lhs=lhs,
        rhs=rhs,
        C=C,
        tolerance=tolerance,
        relation=relation,
        lower=lower,
        passed=passed,
        note=note,
    )
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, f"Check {name}: lhs={lhs:.6g} {relation} rhs={rhs:.6g} -> {'pass' if passed else 'FAIL'}")
    return record


class VerificationReport(BaseModel):
    experiment: str
    environment: Dict[str, Any] = Field(default_factory=dict)
    normalizations: List[str] = Field(default_factory=list)
    checks: List[CheckRecord] = Field(default_factory=list)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.checks.append(record)
        return record

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckRecord]:
        return [check for check in self.checks if not check.passed]


def _finite_safe(value: Any) -> Any:
    """Non-finite floats become "inf", "-inf" or "nan"; containers are walked"""
    if isinstance(value, dict):
        return {str(k): _finite_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_safe(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    try:
        return _finite_safe(float(value))
    except (TypeError, ValueError):
        return str(value)


def report_payload(report: VerificationReport) -> Dict[str, Any]:
    for check in report.checks:
        if not check.anchor.strip():
            raise ReportError(f"check {check.name!r} has no anchor")
    payload = report.model_dump()
    payload["schema_version"] = SCHEMA_VERSION
    return _finite_safe(payload)


def dumps(payload: Dict[str, Any]) -> bytes:
    return orjson.dumps(_finite_safe(payload), option=JSON_OPTIONS) + b"\n"


def emit_report(report: VerificationReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    data = dumps(report_payload(report))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        logger.error(f"Failed to write report {path}: {e}")
        raise
    logger.info(f"Report written: {path} ({len(report.checks)} checks, {'pass' if report.passed else 'fail'})")
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Round-trippable float text, LF line endings, no index"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        logger.error(f"Failed to write CSV {path}: {e}")
        raise
    return path


def read_report(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        return orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise ReportError(f"{path} is not a valid report: {e}")


def summarize_reports(directory: Union[str, Path]) -> Dict[str, Any]:
    """Collect every verification.json below directory into one summary"""
    directory = Path(directory)
    entries = []
    for path in sorted(directory.rglob("verification.json")):
        report = read_report(path)
        checks = report.get("checks", [])
        failed = sorted(c.get("name", "") for c in checks if not c.get("passed", False))
        entries.append(
            {
                "path": path.relative_to(directory).as_posix(),
                "experiment": report.get("experiment", ""),
                "checks": len(checks),
                "failed": failed,
                "passed": not failed,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "reports": entries,
        "passed": all(entry["passed"] for entry in entries),
    }
