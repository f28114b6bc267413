"""Node/edge CSV ingestion, validation and serialization.

File layout (UTF-8, header row mandatory, LF or CRLF line endings)::

    nodes.csv  node_id,side,city,gender,gender_conf,race,race_conf,age_years,age_conf,num_properties,weekly_price
    edges.csv  guest_id,host_id,weight,city,property_type

Empty fields are missing values. A blank edge weight counts as one stay.
Nodes are keyed by ``(side, city, node_id)`` so the same guest may appear in
several cities.
"""
from __future__ import annotations

import csv
import io
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import (
    ConflictingNodeRow,
    EmptyDatasetWarning,
    NonPositiveWeight,
    ParseError,
    ReferentialError,
)
from .network import (
    GUEST,
    HOST,
    SIDES,
    AttributeSet,
    EdgeRecord,
    HostProfile,
    NodeRecord,
    SliceKey,
    build_network,
    canonical_gender,
    canonical_property_type,
    canonical_race,
)

NODE_COLUMNS = ("node_id", "side", "city", "gender", "gender_conf", "race", "race_conf",
                "age_years", "age_conf", "num_properties", "weekly_price")
EDGE_COLUMNS = ("guest_id", "host_id", "weight", "city", "property_type")

# finding kinds
PARSE = "ParseError"
RANGE = "RangeError"
REFERENTIAL = "ReferentialError"
CONFLICT = "ConflictingNodeRow"
EMPTY = "EmptyEdgeFile"

_ERROR_TYPES = {
    PARSE: ParseError,
    REFERENTIAL: ReferentialError,
    CONFLICT: ConflictingNodeRow,
}


@dataclass(frozen=True)
class Finding:
    kind: str
    file: str
    line: int
    column: str
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.kind} {self.file}:{self.line} [{self.column}] {self.message}"

    def to_dict(self):
        return {"kind": self.kind, "file": self.file, "line": self.line,
                "column": self.column, "message": self.message, "severity": self.severity}


@dataclass
class ValidationReport:
    findings: list = field(default_factory=list)
    node_rows: int = 0
    node_rows_accepted: int = 0
    edge_rows: int = 0
    edge_rows_accepted: int = 0

    @property
    def is_clean(self):
        return not self.findings

    @property
    def has_parse_errors(self):
        return any(f.kind == PARSE for f in self.findings)

    @property
    def errors(self):
        return [f for f in self.findings if f.severity == "error"]

    @property
    def node_rows_rejected(self):
        return self.node_rows - self.node_rows_accepted

    @property
    def edge_rows_rejected(self):
        return self.edge_rows - self.edge_rows_accepted

    def to_dict(self):
        return {
            "clean": self.is_clean,
            "node_rows": self.node_rows,
            "node_rows_accepted": self.node_rows_accepted,
            "edge_rows": self.edge_rows,
            "edge_rows_accepted": self.edge_rows_accepted,
            "findings": [f.to_dict() for f in self.findings],
        }


class _RowError(Exception):
    def __init__(self, kind, column, message):
        super().__init__(message)
        self.kind, self.column, self.message = kind, column, message


def _open_text(source):
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, io.TextIOBase):
        return source
    raise TypeError(f"expected a path or text stream, got {type(source).__name__}")


def _read_rows(source, required, name, findings):
    """Yield ``(line, dict)`` for well-formed rows; malformed ones become findings."""
    with _open_text(source) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, None, "missing header row", name) from None
        except csv.Error as exc:
            raise ParseError(1, None, str(exc), name) from None
        header = [h.strip().lstrip("﻿") for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(1, missing[0], f"header lacks columns {missing}", name)
        while True:
            try:
                row = next(reader)
            except StopIteration:
                return
            except csv.Error as exc:
                findings.append(Finding(PARSE, name, reader.line_num, "", str(exc)))
                yield reader.line_num, None
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                findings.append(Finding(PARSE, name, reader.line_num, "",
                                        f"expected {len(header)} fields, got {len(row)}"))
                yield reader.line_num, None
                continue
            yield reader.line_num, dict(zip(header, (v.strip() for v in row)))


def _float(row, col, required=False):
    text = row.get(col, "")
    if text == "":
        if required:
            raise _RowError(PARSE, col, "missing value")
        return None
    try:
        return float(text)
    except ValueError:
        raise _RowError(PARSE, col, f"not a number: {text!r}") from None


def _int(row, col):
    text = row.get(col, "")
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise _RowError(PARSE, col, f"not an integer: {text!r}") from None
    if not value.is_integer():
        raise _RowError(RANGE, col, f"not an integer: {text!r}")
    return int(value)


def _conf(row, col):
    value = _float(row, col)
    if value is None:
        return 1.0
    if not (0.0 <= value <= 1.0):
        raise _RowError(RANGE, col, f"confidence {value} outside [0, 1]")
    return value


def _parse_node(row):
    node_id = row["node_id"]
    if not node_id:
        raise _RowError(PARSE, "node_id", "empty node id")
    side = row["side"].lower()
    if side not in SIDES:
        raise _RowError(RANGE, "side", f"side must be guest or host, got {row['side']!r}")
    try:
        gender = canonical_gender(row.get("gender"))
    except ValueError as exc:
        raise _RowError(RANGE, "gender", str(exc)) from None
    try:
        race = canonical_race(row.get("race"))
    except ValueError as exc:
        raise _RowError(RANGE, "race", str(exc)) from None
    age = _int(row, "age_years")
    if age is not None and age < 0:
        raise _RowError(RANGE, "age_years", f"negative age {age}")
    attrs = AttributeSet(gender, _conf(row, "gender_conf"), race, _conf(row, "race_conf"),
                         age, _conf(row, "age_conf"))
    n_props = _int(row, "num_properties")
    price = _float(row, "weekly_price")
    profile = None
    if n_props is not None or price is not None:
        if side == GUEST:
            col = "num_properties" if n_props is not None else "weekly_price"
            raise _RowError(RANGE, col, "host profile fields on a guest row")
        if n_props is None or price is None:
            col = "num_properties" if n_props is None else "weekly_price"
            raise _RowError(RANGE, col, "host profile needs both num_properties and weekly_price")
        if n_props < 1:
            raise _RowError(RANGE, "num_properties", f"num_properties {n_props} < 1")
        if not price > 0:
            raise _RowError(RANGE, "weekly_price", f"weekly_price {price} <= 0")
        profile = HostProfile(n_props, price)
    return NodeRecord(node_id, side, attrs, profile, row["city"])


def _parse_edge(row):
    if not row["guest_id"]:
        raise _RowError(PARSE, "guest_id", "empty guest id")
    if not row["host_id"]:
        raise _RowError(PARSE, "host_id", "empty host id")
    weight = _int(row, "weight")
    if weight is None:
        weight = 1
    if weight < 1:
        raise _RowError(RANGE, "weight", f"weight {weight} is not positive")
    try:
        ptype = canonical_property_type(row["property_type"])
    except ValueError as exc:
        raise _RowError(RANGE, "property_type", str(exc)) from None
    return EdgeRecord(row["guest_id"], row["host_id"], weight, row["city"], ptype)


def _name(source, default):
    return str(source) if isinstance(source, (str, Path)) else default


def _scan(nodes, edges):
    report = ValidationReport()
    findings = report.findings
    node_name, edge_name = _name(nodes, "nodes.csv"), _name(edges, "edges.csv")

    table = {}
    for line, row in _read_rows(nodes, NODE_COLUMNS, node_name, findings):
        report.node_rows += 1
        if row is None:
            continue
        try:
            rec = _parse_node(row)
        except _RowError as err:
            findings.append(Finding(err.kind, node_name, line, err.column, err.message))
            continue
        key = (rec.side, rec.city, rec.node_id)
        if key in table and table[key] != rec:
            findings.append(Finding(CONFLICT, node_name, line, "node_id",
                                    f"{rec.side} {rec.node_id!r} in {rec.city!r} redeclared "
                                    "with different attributes"))
            continue
        table[key] = rec
        report.node_rows_accepted += 1

    accepted_edges = []
    for line, row in _read_rows(edges, EDGE_COLUMNS, edge_name, findings):
        report.edge_rows += 1
        if row is None:
            continue
        try:
            rec = _parse_edge(row)
        except _RowError as err:
            findings.append(Finding(err.kind, edge_name, line, err.column, err.message))
            continue
        bad = None
        if (GUEST, rec.city, rec.guest_id) not in table:
            bad = ("guest_id", f"guest {rec.guest_id!r} not declared for city {rec.city!r}")
        elif (HOST, rec.city, rec.host_id) not in table:
            bad = ("host_id", f"host {rec.host_id!r} not declared for city {rec.city!r}")
        if bad:
            findings.append(Finding(REFERENTIAL, edge_name, line, bad[0], bad[1]))
            continue
        accepted_edges.append(rec)
        report.edge_rows_accepted += 1

    if report.edge_rows == 0:
        findings.append(Finding(EMPTY, edge_name, 1, "", "edge file has no rows", "warning"))
    return report, table, accepted_edges


def validate_dataset(nodes, edges) -> ValidationReport:
    """Check both files and list every violation with its line number.

    Header problems are unrecoverable and raise :class:`ParseError`; every
    other problem is reported as a :class:`Finding`.
    """
    report, _, _ = _scan(nodes, edges)
    return report


def load_dataset(nodes, edges) -> dict:
    """Load both files into one network per (city, property type) slice.

    Each slice contains the nodes incident to its edges. Raises the error
    type matching the first error finding; warnings are emitted through
    :mod:`warnings`.
    """
    report, table, edge_recs = _scan(nodes, edges)
    for f in report.findings:
        if f.severity != "error":
            continue
        if f.kind == PARSE:
            raise ParseError(f.line, f.column, f.message, f.file)
        if f.kind == RANGE and f.column == "weight":
            raise NonPositiveWeight(str(f))
        exc = _ERROR_TYPES.get(f.kind, ValueError)
        raise exc(str(f))
    for f in report.findings:
        warnings.warn(str(f), EmptyDatasetWarning if f.kind == EMPTY else UserWarning,
                      stacklevel=2)

    by_slice = defaultdict(list)
    for rec in edge_recs:
        by_slice[SliceKey(rec.city, rec.property_type)].append(rec)
    networks = {}
    for key in sorted(by_slice):
        recs = by_slice[key]
        gids = {r.guest_id for r in recs}
        hids = {r.host_id for r in recs}
        nodes_ = [table[(GUEST, key.city, g)] for g in gids] + [table[(HOST, key.city, h)] for h in hids]
        networks[key] = build_network(nodes_, recs, key)
    return networks


def slice_counts(networks):
    """``{slice: (hosts, guests, pairs)}`` in the order of ``networks``."""
    return {k: (n.n_hosts, n.n_guests, n.n_edges) for k, n in networks.items()}


def format_counts_table(networks):
    return counts_table(slice_counts(networks))


def counts_table(counts):
    """Markdown table from ``{slice: (hosts, guests, pairs)}``."""
    lines = ["| City | Property | # Hosts | # Guests | # Host-Guest Pairs |",
             "|---|---|---:|---:|---:|"]
    for key, (h, g, p) in counts.items():
        lines.append(f"| {key.city} | {key.property_type.capitalize()} | {h:,} | {g:,} | {p:,} |")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# writing


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def node_row(rec: NodeRecord):
    a, p = rec.attributes, rec.profile
    return [rec.node_id, rec.side, rec.city or "",
            _fmt(a.gender), _fmt(a.gender_conf), _fmt(a.race), _fmt(a.race_conf),
            _fmt(a.age_years), _fmt(a.age_conf),
            _fmt(p.num_properties if p else None), _fmt(p.weekly_price if p else None)]


def edge_row(rec: EdgeRecord):
    return [rec.guest_id, rec.host_id, str(rec.weight), rec.city or "", rec.property_type or ""]


def write_dataset(networks, nodes_path, edges_path):
    """Serialize networks to the two-file CSV layout read by :func:`load_dataset`."""
    if hasattr(networks, "slice_key"):
        networks = {networks.slice_key: networks}
    nodes = {}
    edges = []
    for key in sorted(networks):
        net = networks[key]
        for rec in net.node_records():
            k = (rec.side, rec.city, rec.node_id)
            if k in nodes and nodes[k] != rec:
                raise ConflictingNodeRow(f"{k} differs between slices")
            nodes[k] = rec
        edges.extend(net.edge_records())
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NODE_COLUMNS)
        for k in sorted(nodes):
            w.writerow(node_row(nodes[k]))
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_COLUMNS)
        for rec in edges:
            w.writerow(edge_row(rec))
