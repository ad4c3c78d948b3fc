"""Report serialization: CSV, aligned tables, and JSON lines.

Every report starts with a `# config:` comment embedding the resolved run
configuration, so no emitted number is ambiguous about the bin count,
threshold, features or seed that produced it. Floats in reports are written
with 6 significant digits; machine-readable ECE output keeps full precision.
"""

from __future__ import annotations

import json
import os

from .matching import f1, precision, recall

__all__ = [
    "fmt6",
    "config_comment",
    "render_rows",
    "write_report",
    "metrics_report_rows",
    "reliability_report_rows",
    "write_config",
]

FORMATS = ("csv", "table", "json-lines")


def fmt6(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, str)):
        return str(value)
    return format(float(value), ".6g")


def config_comment(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True)


def render_rows(header, rows, config, fmt="csv") -> str:
    """Render a header + data rows in the requested format."""
    cells = [[fmt6(v) for v in row] for row in rows]
    if fmt == "csv":
        lines = [config_comment(config), ",".join(header)]
        lines += [",".join(row) for row in cells]
    elif fmt == "table":
        widths = [
            max(len(header[i]), *(len(r[i]) for r in cells)) if cells else len(header[i])
            for i in range(len(header))
        ]
        lines = [config_comment(config)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    elif fmt == "json-lines":
        lines = [config_comment(config)]
        lines += [json.dumps(dict(zip(header, row)), sort_keys=True) for row in cells]
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return "\n".join(lines) + "\n"


def write_report(path, header, rows, config, fmt="csv") -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(render_rows(header, rows, config, fmt))
    os.replace(tmp, path)


METRICS_HEADER = ["scope", "tp", "fp", "fn", "precision", "recall", "f1"]


def metrics_report_rows(scoped_summaries):
    """Rows `scope,tp,fp,fn,precision,recall,f1` from (scope, summary) pairs."""
    return [
        (scope, s.tp, s.fp, s.fn, precision(s), recall(s), f1(s))
        for scope, s in scoped_summaries
    ]


RELIABILITY_HEADER = ["bin_lower", "bin_upper", "count", "mean_confidence", "precision", "gap"]


def reliability_report_rows(bins):
    from .calibration_error import reliability_rows

    return reliability_rows(bins)


def write_config(path, config) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
