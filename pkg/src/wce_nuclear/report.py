"""Report documents and their table / CSV / JSON renderings.

Reports carry no timestamps so that the same analysis renders to the
same bytes.
"""

import csv
import io
import json
import math
from collections.abc import Sequence
from dataclasses import asdict

from .criteria import Verdict
from .operators import AtomStats, Exponents, RankOneFactor

STATS_COLUMNS = ("block_index", "mass", "eu", "ew", "d", "term", "eu_p", "eu_qc")

# Family tables show this many rows from each end
TABLE_EDGE_ROWS = 5


def build_report(
    source: str,
    exps: Exponents,
    stats: Sequence[AtomStats],
    nuclear: Verdict,
    compact: Verdict,
    consistent: bool,
    overrides: dict | None = None,
    factors: Sequence[RankOneFactor] | None = None,
    bound: float | None = None,
    oracle: dict | None = None,
    family: bool = False,
) -> dict:
    return {
        "header": {
            "source": source,
            "kind": "family" if family else "finite",
            "p": exps.p,
            "q": exps.q,
            "regime": exps.regime.value,
            "r": exps.r,
            "terms": len(stats),
            "overrides": dict(sorted((overrides or {}).items())),
        },
        "atoms": [{col: getattr(s, col) for col in STATS_COLUMNS} for s in stats],
        "factors": [asdict(f) for f in factors] if factors is not None else None,
        "nuclear_bound": bound,
        "nuclearity": nuclear.to_dict(),
        "compactness": compact.to_dict(),
        "consistent": consistent,
        "oracle": oracle,
    }


def _sanitize(value):
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


def render_json(report: dict) -> str:
    return json.dumps(_sanitize(report), indent=2, sort_keys=True) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(report: dict) -> str:
    """AtomStats rows only."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(STATS_COLUMNS)
    for row in report["atoms"]:
        writer.writerow([_cell(row[col]) for col in STATS_COLUMNS])
    return buffer.getvalue()


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _verdict_lines(title: str, verdict: dict) -> list[str]:
    lines = [f"{title}: {verdict['status']}"]
    for key in ("partial_sum", "total", "corrected_sum", "last_value", "necessary", "sufficient", "decay_slope"):
        if verdict[key] is not None:
            lines.append(f"  {key:<14} {_fmt(verdict[key])}")
    lines.append(f"  {'terms_used':<14} {verdict['terms_used']}")
    if verdict["notes"]:
        lines.append(f"  {'notes':<14} {', '.join(verdict['notes'])}")
    return lines


def render_table(report: dict) -> str:
    header = report["header"]
    lines = [
        f"source: {header['source']}",
        f"p = {_fmt(header['p'])}, q = {_fmt(header['q'])} ({header['regime']}), r = {_fmt(header['r'])}",
    ]
    if header["overrides"]:
        lines.append("overrides: " + ", ".join(f"{k}={v}" for k, v in header["overrides"].items()))
    lines.append("")

    columns = ("block_index", "mass", "d", "term")
    lines.append("  ".join(f"{c:>16}" for c in columns))
    rows = report["atoms"]
    edge = TABLE_EDGE_ROWS
    if header["kind"] == "family" and len(rows) > 2 * edge:
        shown = rows[:edge] + [None] + rows[-edge:]
    else:
        shown = rows
    for row in shown:
        if row is None:
            lines.append(f"{'...':>16}")
            continue
        lines.append("  ".join(f"{_fmt(row[c]):>16}" for c in columns))
    lines.append("")

    if report["nuclear_bound"] is not None:
        lines.append(f"nuclear bound: {_fmt(report['nuclear_bound'])}")
    lines.extend(_verdict_lines("nuclearity", report["nuclearity"]))
    lines.extend(_verdict_lines("compactness", report["compactness"]))
    lines.append(f"consistent: {_fmt(report['consistent'])}")

    oracle = report.get("oracle")
    if oracle:
        lines.append("oracle:")
        for key, value in oracle.items():
            lines.append(f"  {key:<26} {_fmt(value)}")
    return "\n".join(lines) + "\n"


RENDERERS = {
    "table": render_table,
    "csv": render_csv,
    "json": render_json,
}
