"""End-to-end evaluation of sample cases and report rendering."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .case import SampleCase, check_case
from .chain import ChainIndex
from .errors import UnknownService
from .filters import FilterCalibration, apply_filters
from .taint import (
    DEFAULT_BACKTRACE,
    DEFAULT_HORIZON,
    DEFAULT_LOOKBACK,
    METHODS,
    TaintResult,
    run_method,
)

TABLE_METHODS = ("m1", "m2", "m3", "m4")


@dataclass(frozen=True)
class MethodOutcome:
    """Counts for one method on one case; ``applicable`` is False for "n/a"."""
    method: str
    applicable: bool
    count: int = 0
    filtered_count: int = 0
    success: bool = False
    filtered_success: bool = False


@dataclass(frozen=True)
class CaseReport:
    case_id: str
    service: str
    n_targets: int
    applied_criteria: tuple[str, ...]
    outcomes: dict[str, MethodOutcome] = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        """No targets: every success flag is vacuously true."""
        return self.n_targets == 0

    @property
    def baseline(self) -> MethodOutcome:
        return self.outcomes["baseline"]

    def percent(self, method: str, filtered: bool = False) -> float | None:
        o = self.outcomes[method]
        if not o.applicable:
            return None
        num = o.filtered_count if filtered else o.count
        den = self.baseline.filtered_count if filtered else self.baseline.count
        return 100.0 * num / den if den else 0.0


def _outcome(case, result: TaintResult, filtered: TaintResult) -> MethodOutcome:
    return MethodOutcome(
        method=result.method,
        applicable=True,
        count=len(result.tainted_outputs),
        filtered_count=len(filtered.tainted_outputs),
        success=result.contains_all(case.targets),
        filtered_success=filtered.contains_all(case.targets),
    )


def evaluate_case(chain: ChainIndex, case: SampleCase,
                  calibrations: dict[str, FilterCalibration], *,
                  lookback: int = DEFAULT_LOOKBACK, horizon: int = DEFAULT_HORIZON,
                  backtrace: int = DEFAULT_BACKTRACE,
                  return_results: bool = False):
    """Run every method on `case`, filter with the service's calibration and
    count. Method 4 is reported as not applicable without a known prior case.

    With `return_results` the raw and filtered TaintResults are returned as
    well, keyed by method.
    """
    check_case(chain, case)
    try:
        cal = calibrations[case.service]
    except KeyError:
        raise UnknownService(f"no calibration for service {case.service!r}") from None

    outcomes = {}
    results = {}
    for method in METHODS:
        if method == "m4" and not case.known_withdrawals:
            outcomes[method] = MethodOutcome(method, applicable=False)
            continue
        result = run_method(chain, case, method, lookback=lookback, horizon=horizon,
                            backtrace=backtrace)
        filtered = apply_filters(chain, result, case, cal)
        outcomes[method] = _outcome(case, result, filtered)
        results[method] = (result, filtered)
    report = CaseReport(case.case_id, case.service, len(case.targets), cal.enabled(), outcomes)
    if return_results:
        return report, results
    return report


# rendering

def _fmt_count(n):
    return f"{n:,}"


def _cell(report: CaseReport, method: str, filtered: bool) -> str:
    o = report.outcomes[method]
    if not o.applicable:
        return "n/a"
    if not (o.filtered_success if filtered else o.success):
        return "---"
    n = o.filtered_count if filtered else o.count
    return f"{_fmt_count(n)} ({report.percent(method, filtered):.1f}%)"


def _table(header, rows):
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    def line(r):
        # first two columns left-aligned, numbers right-aligned
        cells = [c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
        return " | ".join(cells).rstrip()
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep, *(line(r) for r in rows)])


def render_table(reports, filtered: bool = False) -> str:
    """Tables-1/3 style text. Unsuccessful methods show ``---``, methods
    that were not run show ``n/a``; percentages are relative to the
    (filtered) baseline."""
    if filtered:
        header = ["Case", "Service", "Baseline", "Criteria", "M1", "M2", "M3", "M4"]
    else:
        header = ["Case", "Service", "Baseline", "M1", "M2", "M3", "M4"]
    rows = []
    for r in reports:
        case = r.case_id + ("*" if r.degenerate else "")
        row = [case, r.service, _fmt_count(r.baseline.count)]
        if filtered:
            row.append(_fmt_count(r.baseline.filtered_count))
        row.extend(_cell(r, m, filtered) for m in TABLE_METHODS)
        rows.append(row)
    text = _table(header, rows)
    notes = ["--- unsuccessful (some target missing); n/a not run (no known prior case)"]
    if filtered:
        notes.append("Criteria: baseline after filtering; percentages relative to it")
    if any(r.degenerate for r in reports):
        notes.append("* case without targets: success is vacuous")
    return text + "\n" + "\n".join(notes) + "\n"


def report_to_obj(report: CaseReport) -> dict:
    return {
        "case_id": report.case_id,
        "service": report.service,
        "targets": report.n_targets,
        "degenerate": report.degenerate,
        "applied_criteria": list(report.applied_criteria),
        "methods": {
            m: ({"applicable": False} if not o.applicable else {
                "applicable": True,
                "count": o.count,
                "filtered_count": o.filtered_count,
                "success": o.success,
                "filtered_success": o.filtered_success,
                "percent_of_baseline": round(report.percent(m), 4),
                "filtered_percent_of_baseline": round(report.percent(m, True), 4),
            })
            for m, o in report.outcomes.items()
        },
    }


def render_report(reports, fmt: str = "table") -> str:
    """Render case reports: both tables as text, or one JSON object per line."""
    reports = list(reports)
    if fmt == "jsonl":
        return "".join(json.dumps(report_to_obj(r), sort_keys=True, separators=(",", ":")) + "\n"
                       for r in reports)
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    return ("Tainted outputs before filtering\n\n"
            + render_table(reports, filtered=False)
            + "\nTainted outputs after filtering\n\n"
            + render_table(reports, filtered=True))
