"""Report emitters: JSON (full precision), markdown tables, CSV.

Markdown cells follow the ``[lower; upper]% observed% marker`` layout with
percentages at two decimals; ``↑`` marks over-expression, ``↓``
under-expression and ``—`` a value inside the null interval.
"""
from __future__ import annotations

import csv
import io
import json

from . import __version__
from .pairing import Expression

MARKERS = {Expression.OVER: "↑", Expression.UNDER: "↓", Expression.COMPATIBLE: "—"}
_ABBREV = {"White": "W", "Asian": "A", "Black": "B"}


def pct(x):
    return f"{100.0 * x:.2f}"


def marker(label):
    return MARKERS[Expression(label)]


def pair_label(attribute, a, b):
    if attribute == "gender":
        return f"{a}{b}"
    return f"{_ABBREV.get(a, a)}→{_ABBREV.get(b, b)}"


def cell(report, i, j):
    return (f"[{pct(report.lower[i, j])}; {pct(report.upper[i, j])}]% "
            f"{pct(report.observed[i, j])}% {marker(report.labels[i, j])}")


def slice_label(slice_key):
    if slice_key is None:
        return "-"
    city, ptype = slice_key
    return f"{city} ({ptype.capitalize()})"


def tool_info():
    return {"name": "homorewire", "version": __version__}


def to_json(payload):
    """Deterministic JSON text (sorted keys, repr floats, trailing newline)."""
    return json.dumps(payload, indent=1, sort_keys=True, ensure_ascii=False, allow_nan=True) + "\n"


def report_json(report, manifest=None):
    payload = report.to_dict()
    payload["tool"] = tool_info()
    payload["manifest"] = manifest
    return to_json(payload)


def report_markdown(report):
    """One table for one slice and attribute: a row per group pair."""
    attr = report.attribute
    level = report.metadata.get("level", 0.95)
    lines = [f"### {slice_label(report.slice_key)}: {attr} pairings", "",
             f"| Pair | Guest | Host | {round(100 * level):d}% null interval | Observed | |",
             "|---|---|---|---|---|---|"]
    for i, a in enumerate(report.groups):
        for j, b in enumerate(report.groups):
            lines.append(f"| {pair_label(attr, a, b)} | {a} | {b} | "
                         f"[{pct(report.lower[i, j])}; {pct(report.upper[i, j])}]% | "
                         f"{pct(report.observed[i, j])}% | {marker(report.labels[i, j])} |")
    meta = report.metadata
    if meta:
        lines += ["", f"n_configs={meta.get('n_configs')}, seed={meta.get('seed')}, "
                      f"burn_in={meta.get('burn_in')}, mode={meta.get('mode')}, "
                      f"min_conf={meta.get('min_conf')}"]
    return "\n".join(lines) + "\n"


def pairs_table(reports, title=None):
    """Slices as rows and group pairs as columns (one attribute)."""
    if not reports:
        return ""
    attr = reports[0].attribute
    groups = reports[0].groups
    heads = [pair_label(attr, a, b) for a in groups for b in groups]
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines += ["| Slice | " + " | ".join(heads) + " |", "|---" * (len(heads) + 1) + "|"]
    for rep in reports:
        if rep.groups != groups or rep.attribute != attr:
            raise ValueError("pairs_table needs reports of one attribute")
        cells = [cell(rep, i, j) for i in range(len(groups)) for j in range(len(groups))]
        lines.append(f"| {slice_label(rep.slice_key)} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def grid_table(report):
    """Guest groups as rows, host groups as columns."""
    g = report.groups
    lines = [f"| {slice_label(report.slice_key)} | " + " | ".join(g) + " |",
             "|---" * (len(g) + 1) + "|"]
    for i, a in enumerate(g):
        lines.append(f"| {a} | " + " | ".join(cell(report, i, j) for j in range(len(g))) + " |")
    return "\n".join(lines) + "\n"


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["city", "property_type", "attribute", "guest_group", "host_group",
                "observed", "lower", "upper", "label"])
    city, ptype = report.slice_key if report.slice_key else ("", "")
    for i, a in enumerate(report.groups):
        for j, b in enumerate(report.groups):
            w.writerow([city, ptype, report.attribute, a, b, repr(float(report.observed[i, j])),
                        repr(float(report.lower[i, j])), repr(float(report.upper[i, j])),
                        Expression(report.labels[i, j]).value])
    return buf.getvalue()


def format_p(p):
    stars = "***" if p < 0.001 else "**" if p < 0.01 else "*" if p < 0.05 else ""
    if p < 0.001:
        return f"< 0.001{stars}"
    return f"{p:.3g}{stars}"


def matchpair_table(results):
    """Matched-pair summary: one row per slice."""
    lines = ["| City | Property | White/White | non-White/White | Pairs | Stays | p-value |",
             "|---|---|---:|---:|---:|---:|---:|"]
    for res in results:
        city, ptype = res.slice_key if res.slice_key else ("-", "-")
        lines.append(f"| {city} | {ptype.capitalize()} | {pct(res.rate_white_hosts)}% | "
                     f"{pct(res.rate_nonwhite_hosts)}% | {res.n_pairs} | {res.n_stays} | "
                     f"{format_p(res.p_value)} |")
    return "\n".join(lines) + "\n"


def delta_table(rows):
    """Baseline vs variant labels, one row per pair."""
    lines = ["| Slice | Attribute | Pair | Baseline | | Variant | | Changed |",
             "|---|---|---|---:|---|---:|---|---|"]
    for r in rows:
        sl = slice_label(tuple(r["slice"])) if r["slice"] else "-"
        lines.append(
            f"| {sl} | {r['attribute']} | {r['pair']} | {pct(r['baseline_observed'])}% | "
            f"{marker(r['baseline_label'])} | {pct(r['variant_observed'])}% | "
            f"{marker(r['variant_label'])} | {'yes' if r['changed'] else ''} |")
    return "\n".join(lines) + "\n"


def demography_table(summaries):
    """Host/guest shares per slice; ``summaries`` maps slice -> demography_summary."""
    lines = ["| Slice | F Host | F Guest | W Host | A Host | B Host |",
             "|---|---:|---:|---:|---:|---:|"]

    def share(d, g):
        return f"{100 * d[g]:.0f}%" if d else "-"

    for key, s in summaries.items():
        gh, gg, rh = s["gender"]["hosts"], s["gender"]["guests"], s["race"]["hosts"]
        lines.append(f"| {slice_label(key)} | {share(gh, 'F')} | {share(gg, 'F')} | "
                     f"{share(rh, 'White')} | {share(rh, 'Asian')} | {share(rh, 'Black')} |")
    return "\n".join(lines) + "\n"
