"""
CSV and JSON report writers.

Reports never contain runtime, worker counts or output paths, so reruns
with the same flags write byte-identical files.
"""
import csv
import io
import json
import logging
from typing import Any, Dict, List, Optional, Tuple

import config
from models import ErrorRecord, ExperimentReport, OutputFormat

logger = logging.getLogger(__name__)

ROW_HEADER = ["scheme", "model", "alpha", "beta", "d", "h", "phi", "estimate", "reference", "abs_error",
              "std_error"]
ORDER_HEADER = ["ORDER", "phi", "slope", "residual_rms"]
HIST_HEADER = ["HIST", "scheme", "bin_center", "density"]
CHECK_HEADER = ["CHECK", "id", "samples", "violations", "worst_margin", "pass"]
SCALAR_HEADER = ["SCALAR", "name", "value"]
MIXING_HEADER = ["MIXING", "epsilon", "gamma", "d", "h", "k"]
FAILED_HEADER = ["FAILED", "cell"]
DIVERGED_HEADER = ["DIVERGED", "cell", "count"]

_SECTION_HEADERS = [ORDER_HEADER, HIST_HEADER, CHECK_HEADER, SCALAR_HEADER, MIXING_HEADER, FAILED_HEADER,
                    DIVERGED_HEADER]
_SECTION_TAGS = {header[0] for header in _SECTION_HEADERS}
_EXCLUDED_SPEC_FIELDS = {"workers", "output", "dump"}


def _num(value: Optional[float]) -> str:
    return "" if value is None else format(value, config.CSV_FLOAT_FORMAT)


def report_meta(report: ExperimentReport) -> Dict[str, Any]:
    return {
        "tool": config.APP_NAME,
        "version": report.version,
        "spec": report.spec.model_dump(mode="json", exclude=_EXCLUDED_SPEC_FIELDS),
        "notes": report.notes,
    }


def render_csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    buffer.write(f"# {config.APP_NAME} {report.version} {report.spec.kind.value}\n")
    writer = csv.writer(buffer, lineterminator="\n")

    if report.rows:
        writer.writerow(ROW_HEADER)
        for r in report.rows:
            writer.writerow([r.scheme, r.model, _num(r.alpha), _num(r.beta), r.d, _num(r.h), r.phi,
                             _num(r.estimate), _num(r.reference), _num(r.abs_error), _num(r.std_error)])
    if report.orders:
        writer.writerow(ORDER_HEADER)
        for fit in report.orders:
            writer.writerow(["ORDER", fit.label, _num(fit.slope), _num(fit.residual_rms)])
    if report.histograms:
        writer.writerow(HIST_HEADER)
        for row in report.histograms:
            writer.writerow(["HIST", row.scheme, _num(row.bin_center), _num(row.density)])
    if report.checks:
        writer.writerow(CHECK_HEADER)
        for check in report.checks:
            writer.writerow(["CHECK", check.assumption_id, check.samples, check.violations,
                             _num(check.worst_margin), "PASS" if check.passed else "FAIL"])
    if report.scalars:
        writer.writerow(SCALAR_HEADER)
        for name in sorted(report.scalars):
            writer.writerow(["SCALAR", name, _num(report.scalars[name])])
    if report.mixing_plan is not None:
        plan = report.mixing_plan
        writer.writerow(MIXING_HEADER)
        writer.writerow(["MIXING", _num(plan.epsilon), _num(plan.gamma), plan.d, _num(plan.h), plan.k])
    if report.failed_cells:
        writer.writerow(FAILED_HEADER)
        for cell in report.failed_cells:
            writer.writerow(["FAILED", cell])
    if report.divergence_counts:
        writer.writerow(DIVERGED_HEADER)
        for cell in sorted(report.divergence_counts):
            writer.writerow(["DIVERGED", cell, report.divergence_counts[cell]])
    return buffer.getvalue()


def render_json(report: ExperimentReport) -> str:
    payload = {
        "meta": report_meta(report),
        "rows": [r.model_dump(mode="json") for r in report.rows],
        "orders": [fit.model_dump(mode="json") for fit in report.orders],
        "histograms": [row.model_dump(mode="json") for row in report.histograms],
        "checks": [check.model_dump(mode="json") for check in report.checks],
        "scalars": report.scalars,
        "mixing": report.mixing_plan.model_dump(mode="json") if report.mixing_plan else None,
        "failed_cells": report.failed_cells,
        "divergence_counts": report.divergence_counts,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_report(report: ExperimentReport, path: str, fmt: OutputFormat = OutputFormat.CSV) -> None:
    text = render_json(report) if OutputFormat(fmt) == OutputFormat.JSON else render_csv(report)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(text)
    logger.info(f"Wrote {report.spec.kind.value} report to {path}")


def _optional(text: str) -> Optional[float]:
    return float(text) if text else None


def parse_report_csv(path: str) -> Tuple[List[ErrorRecord], Dict[str, List[List[str]]]]:
    """Error rows plus the remaining sections keyed by their tag"""
    rows: List[ErrorRecord] = []
    sections: Dict[str, List[List[str]]] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for fields in csv.reader(line for line in f if not line.startswith("#")):
            if not fields or fields == ROW_HEADER or fields in _SECTION_HEADERS:
                continue
            tag = fields[0]
            if tag in _SECTION_TAGS:
                sections.setdefault(tag, []).append(fields[1:])
                continue
            rows.append(ErrorRecord(
                scheme=fields[0], model=fields[1], alpha=_optional(fields[2]), beta=_optional(fields[3]),
                d=int(fields[4]), h=float(fields[5]), phi=fields[6], estimate=float(fields[7]),
                reference=float(fields[8]), abs_error=float(fields[9]), std_error=float(fields[10]),
            ))
    return rows, sections
