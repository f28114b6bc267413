"""Command-line interface.

Exit codes: 0 success, 1 domain error (a report is still written), 2 usage
or parse error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import report as fmt
from .exceptions import HomorewireError, ParseError
from .io import counts_table, format_counts_table, load_dataset, validate_dataset
from .network import ATTRIBUTES, PROPERTY_TYPES
from .pairing import ExpressionReport, analyze_network, demography_summary
from .rewiring import XSwapRewirer
from .robustness import (
    HostMatcher,
    PerturbationSpec,
    compare_reports,
    perturbation_plan,
    perturb_labels,
    rerun_with_confidence,
    tercile_filter,
)
from .synth import SynthSpec, write_synthetic

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
FORMATS = ("json", "md", "csv")


@dataclass
class RunManifest:
    nodes: str = ""
    edges: str = ""
    cities: list = field(default_factory=list)
    property_types: list = field(default_factory=list)
    attributes: list = field(default_factory=lambda: ["gender", "race", "age_quintile"])
    min_conf: float = 0.0
    n_configs: int = 1000
    seed: int = 0
    burn_in: object = "auto"
    tau_stop: float = 0.05
    probe_interval: Optional[int] = None
    max_swaps: Optional[int] = None
    sampler: str = "slots"
    mode: str = "stay_weighted"
    level: float = 0.95
    out: str = "out"
    formats: list = field(default_factory=lambda: ["json", "md"])

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown manifest fields {sorted(unknown)}")
        return cls(**d)

    def validate(self):
        for a in self.attributes:
            if a not in ATTRIBUTES:
                raise ValueError(f"unknown attribute {a!r}")
        for p in self.property_types:
            if p not in PROPERTY_TYPES:
                raise ValueError(f"unknown property type {p!r}")
        for f_ in self.formats:
            if f_ not in FORMATS:
                raise ValueError(f"unknown format {f_!r}")
        if not self.nodes or not self.edges:
            raise ValueError("both --nodes and --edges are required")
        if self.burn_in != "auto" and not (isinstance(self.burn_in, int) and self.burn_in >= 0):
            raise ValueError("burn_in must be 'auto' or a non-negative integer")
        return self

    def rewirer(self, jobs=1):
        return XSwapRewirer(self.n_configs, self.burn_in, self.tau_stop, self.probe_interval,
                            self.max_swaps, None, self.sampler, self.seed, jobs)


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _burn_in(text):
    return text if text == "auto" else int(text)


def _add_data_flags(p):
    p.add_argument("--nodes", help="nodes.csv path")
    p.add_argument("--edges", help="edges.csv path")


def _add_run_flags(p):
    _add_data_flags(p)
    p.add_argument("--manifest", help="JSON manifest; its fields override flags")
    p.add_argument("--city", action="append", default=None, help="restrict to city (repeatable)")
    p.add_argument("--property-type", action="append", default=None, choices=PROPERTY_TYPES)
    p.add_argument("--attribute", type=_csv_list, default=None,
                   help="comma-separated subset of gender,race,age_quintile")
    p.add_argument("--min-conf", type=float, default=None)
    p.add_argument("--configs", type=int, default=None, help="null ensemble size (default 1000)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--burn-in", type=_burn_in, default=None, help="'auto' or a swap count")
    p.add_argument("--tau-stop", type=float, default=None)
    p.add_argument("--sampler", choices=("slots", "uniform"), default=None)
    p.add_argument("--mode", choices=("stay_weighted", "distinct_pairs"), default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--format", type=_csv_list, default=None, help="comma list of json,md,csv")
    p.add_argument("--jobs", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="homorewire", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check node/edge files")
    _add_data_flags(p)
    p.add_argument("--out", help="write the validation report as JSON here")

    p = sub.add_parser("analyze", help="rewiring analysis per slice and attribute")
    _add_run_flags(p)

    p = sub.add_parser("robustness", help="robustness procedures against a baseline run")
    _add_run_flags(p)
    p.add_argument("--procedure", required=True,
                   choices=("confidence", "perturb", "tercile", "matchpair"))
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--baseline", type=float, default=0.3)
    p.add_argument("--fraction", type=float, default=0.05)
    p.add_argument("--caliper", type=float, default=0.2)
    p.add_argument("--rate-mode", choices=("stay_weighted", "per_host"), default="stay_weighted")

    p = sub.add_parser("matchpair", help="matched-pair analysis of White-guest rates")
    _add_run_flags(p)
    p.add_argument("--caliper", type=float, default=0.2)
    p.add_argument("--rate-mode", choices=("stay_weighted", "per_host"), default="stay_weighted")

    p = sub.add_parser("synth", help="write a synthetic dataset from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="combine JSON reports into markdown tables")
    p.add_argument("inputs", nargs="+", help="report JSON files or directories")
    p.add_argument("--out", help="markdown output file (default stdout)")
    return parser


def _manifest(args):
    m = RunManifest()
    for flag, name in (("nodes", "nodes"), ("edges", "edges"), ("city", "cities"),
                       ("property_type", "property_types"), ("attribute", "attributes"),
                       ("min_conf", "min_conf"), ("configs", "n_configs"), ("seed", "seed"),
                       ("burn_in", "burn_in"), ("tau_stop", "tau_stop"), ("sampler", "sampler"),
                       ("mode", "mode"), ("out", "out"), ("format", "formats")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(m, name, value)
    if getattr(args, "manifest", None):
        data = json.loads(Path(args.manifest).read_text())
        for k, v in RunManifest.from_dict(data).to_dict().items():
            if k in data:
                setattr(m, k, v)
    return m.validate()


def _select(networks, m):
    return {k: n for k, n in networks.items()
            if (not m.cities or k.city in m.cities)
            and (not m.property_types or k.property_type in m.property_types)}


def _slug(key):
    return f"{key.city.replace(' ', '-').replace('/', '-')}__{key.property_type}"


def _write(path: Path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _emit_reports(reports, m, out: Path, prefix=""):
    """Write each ``(slice, attribute) -> report`` in the requested formats."""
    manifest = m.to_dict()
    written = []
    for (key, attr), rep in sorted(reports.items(), key=lambda kv: (tuple(kv[0][0]), kv[0][1])):
        stem = out / f"{prefix}{_slug(key)}__{attr}"
        if "json" in m.formats:
            _write(stem.with_suffix(".json"), fmt.report_json(rep, manifest))
        if "md" in m.formats:
            _write(stem.with_suffix(".md"), fmt.report_markdown(rep))
        if "csv" in m.formats:
            _write(stem.with_suffix(".csv"), fmt.report_csv(rep))
        written.append(stem)
    if "md" in m.formats and reports:
        by_attr = {}
        for (key, attr), rep in sorted(reports.items(), key=lambda kv: (tuple(kv[0][0]), kv[0][1])):
            by_attr.setdefault(attr, []).append(rep)
        parts = [fmt.pairs_table(reps, f"{attr} pairings") for attr, reps in by_attr.items()]
        _write(out / f"{prefix}summary.md", "\n".join(parts))
    return written


def _analyze_all(networks, m, jobs, attributes=None, min_conf=None):
    """Analyse every slice; domain errors are collected per slice instead of raised."""
    reports, errors = {}, []
    rewirer = m.rewirer(jobs)
    for key, net in networks.items():
        try:
            res = analyze_network(net, attributes or m.attributes,
                                  m.min_conf if min_conf is None else min_conf,
                                  m.mode, rewirer, m.level)
        except HomorewireError as exc:
            errors.append({"slice": list(key), "error": type(exc).__name__, "message": str(exc)})
            continue
        for attr in attributes or m.attributes:
            if attr in res:
                reports[(key, attr)] = res[attr]
            else:
                errors.append({"slice": list(key), "attribute": attr, "error": "EmptyView",
                               "message": f"{key}: no counted {attr} pairing"})
    return reports, errors


def _finish(out: Path, m, errors, extra=None):
    status = {"tool": fmt.tool_info(), "manifest": m.to_dict(), "errors": errors}
    if extra:
        status.update(extra)
    _write(out / "run.json", fmt.to_json(status))
    for e in errors:
        print(f"error: {e['message']}", file=sys.stderr)
    return EXIT_DOMAIN if errors else EXIT_OK


def cmd_validate(args):
    try:
        rep = validate_dataset(args.nodes, args.edges)
    except (ParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = fmt.to_json({"tool": fmt.tool_info(), **rep.to_dict()})
    if args.out:
        _write(Path(args.out), text)
    for f in rep.findings:
        print(str(f))
    print(f"node rows: {rep.node_rows} ({rep.node_rows_rejected} rejected); "
          f"edge rows: {rep.edge_rows} ({rep.edge_rows_rejected} rejected)")
    if rep.has_parse_errors:
        return EXIT_USAGE
    return EXIT_DOMAIN if rep.errors else EXIT_OK


def _load(m):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _select(load_dataset(m.nodes, m.edges), m)


def cmd_analyze(args):
    m = _manifest(args)
    networks = _load(m)
    out = Path(m.out)
    reports, errors = _analyze_all(networks, m, args.jobs)
    _emit_reports(reports, m, out)
    if "md" in m.formats:
        _write(out / "counts.md", format_counts_table(networks))
        _write(out / "demography.md",
               fmt.demography_table({k: demography_summary(n, m.min_conf)
                                     for k, n in networks.items()}))
    return _finish(out, m, errors)


def _matchpair(networks, m, caliper, rate_mode, out):
    results, errors = [], []
    for key, net in networks.items():
        try:
            res = HostMatcher(caliper, min_conf=m.min_conf, rate_mode=rate_mode).fit(net).result_
        except HomorewireError as exc:
            errors.append({"slice": list(key), "error": type(exc).__name__, "message": str(exc)})
            continue
        results.append(res)
    _write(out / "matchpair.md", fmt.matchpair_table(results))
    _write(out / "matchpair.json", fmt.to_json({"tool": fmt.tool_info(), "manifest": m.to_dict(),
                                                "results": [r.to_dict() for r in results]}))
    return results, errors


def cmd_matchpair(args):
    m = _manifest(args)
    networks = _load(m)
    out = Path(m.out)
    _, errors = _matchpair(networks, m, args.caliper, args.rate_mode, out)
    return _finish(out, m, errors)


def cmd_robustness(args):
    m = _manifest(args)
    networks = _load(m)
    out = Path(m.out)
    proc = args.procedure
    if proc == "matchpair":
        _, errors = _matchpair(networks, m, args.caliper, args.rate_mode, out)
        return _finish(out, m, errors, {"procedure": proc})
    if proc == "confidence":
        bundle = rerun_with_confidence(networks, args.threshold, args.baseline, m.attributes,
                                       m.mode, m.rewirer(args.jobs), m.level)
        _emit_reports(bundle.reports, m, out, prefix=f"conf{args.threshold:g}__")
        _emit_reports(bundle.baseline_reports, m, out, prefix=f"conf{args.baseline:g}__")
        _write(out / "confidence_counts.md",
               counts_table(bundle.counts))
        _write(out / "delta.md", fmt.delta_table(bundle.delta))
        _write(out / "delta.json", fmt.to_json(bundle.delta))
        return _finish(out, m, [], {"procedure": proc, "threshold": args.threshold,
                                    "baseline": args.baseline,
                                    "counts": {_slug(k): v for k, v in bundle.counts.items()}})
    base_reports, errors = _analyze_all(networks, m, args.jobs)
    log = {}
    if proc == "perturb":
        variant = {}
        for key, net in networks.items():
            spec = PerturbationSpec(args.fraction, seed=m.seed)
            try:
                plan = perturbation_plan(net, spec)
            except HomorewireError as exc:
                errors.append({"slice": list(key), "error": type(exc).__name__,
                               "message": str(exc)})
                continue
            variant[key] = perturb_labels(net, spec)
            log[_slug(key)] = {"relabeled": len(plan),
                             "nodes": [{"side": s, "id": i, "race": r} for s, i, r in plan]}
            print(f"{key}: relabeled {len(plan)} White nodes")
    else:
        variant = {}
        for key, net in networks.items():
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    variant[key] = tercile_filter(net)
            except HomorewireError as exc:
                errors.append({"slice": list(key), "error": type(exc).__name__,
                               "message": str(exc)})
                continue
            log[_slug(key)] = {"hosts_retained": variant[key].n_hosts, "hosts": net.n_hosts}
    var_reports, var_errors = _analyze_all(variant, m, args.jobs)
    errors += var_errors
    _emit_reports(base_reports, m, out, prefix="baseline__")
    _emit_reports(var_reports, m, out, prefix=f"{proc}__")
    delta = compare_reports(base_reports, var_reports)
    _write(out / "delta.md", fmt.delta_table(delta))
    _write(out / "delta.json", fmt.to_json(delta))
    _write(out / f"{proc}_log.json", fmt.to_json(log))
    return _finish(out, m, errors, {"procedure": proc})


def cmd_synth(args):
    spec = SynthSpec.from_file(args.spec)
    paths = write_synthetic(spec, args.out)
    for k, v in paths.items():
        print(f"{k}: {v}")
    return EXIT_OK


def _collect_json(inputs):
    files = []
    for item in inputs:
        p = Path(item)
        files.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    reports = []
    for f in files:
        data = json.loads(f.read_text())
        if isinstance(data, dict) and "pairs" in data and "attribute" in data:
            reports.append(ExpressionReport.from_dict(data))
    return reports


def cmd_report(args):
    reports = _collect_json(args.inputs)
    if not reports:
        print("no pairing reports found", file=sys.stderr)
        return EXIT_USAGE
    by_attr = {}
    for rep in reports:
        by_attr.setdefault(rep.attribute, []).append(rep)
    parts = []
    for attr, reps in by_attr.items():
        if len(reps[0].groups) == 2:
            parts.append(fmt.pairs_table(reps, f"{attr} pairings"))
        else:
            parts.append(f"### {attr} pairings\n\n" + "\n".join(fmt.grid_table(r) for r in reps))
    text = "\n".join(parts)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "analyze": cmd_analyze, "robustness": cmd_robustness,
            "matchpair": cmd_matchpair, "synth": cmd_synth, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HomorewireError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
