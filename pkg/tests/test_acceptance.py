"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import itertools
import json
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from conftest import make_network, random_network
from oracles import contingency_tables, kendall_tau_b_pairs, total_variation
from homorewire import report as fmt
from homorewire.cli import main as cli_main
from homorewire.exceptions import HomorewireWarning
from homorewire.pairing import ExpressionReport, HomophilyDetector
from homorewire.rewiring import FixedBurnIn, RewireConfig, generate_ensemble, kendall_tau
from homorewire.robustness import HostMatcher, PerturbationSpec, perturbation_plan, perturb_labels
from homorewire.synth import SynthSpec, generate, write_synthetic

DATA = Path(__file__).parent / "data"


# 1 -------------------------------------------------------------------------


def test_strength_conservation(acceptance):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    n_configs = violations = checked = 0
    for k in range(50):
        n_edges = int(rng.integers(20, 5001))
        n_guests = int(rng.integers(max(2, n_edges // 4), n_edges + 1))
        n_hosts = int(rng.integers(2, max(3, n_edges // 3)))
        net = random_network(rng, n_guests, n_hosts, min(n_edges, n_guests * n_hosts))
        out_s, in_s = net.out_strengths(), net.in_strengths()
        G, H = net.n_guests, net.n_hosts

        def check(block):
            nonlocal violations, checked
            B = len(block)
            rows = np.arange(B)[:, None]
            ins = np.bincount((rows * H + block.host_units).ravel(), minlength=B * H)
            outs = np.bincount((rows * G + block.guest_units[None, :]).ravel(), minlength=B * G)
            violations += int((ins.reshape(B, H) != in_s).any(axis=1).sum())
            violations += int((outs.reshape(B, G) != out_s).any(axis=1).sum())
            checked += B

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HomorewireWarning)
            generate_ensemble(net, RewireConfig(1000, master_seed=k), check)
        n_configs += 1000
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and checked == n_configs == 50_000 and elapsed < 60
    acceptance(1, "strength conservation", ok,
               f"{checked} configurations, {violations} violations, {elapsed:.1f} s (< 60 s)")
    assert ok


# 2 -------------------------------------------------------------------------


def enumeration_tv(net, sampler, n=10_000, seed=0):
    tables = contingency_tables(net.out_strengths(), net.in_strengths())
    gu, _ = net.units()
    counts = {t: 0 for t in tables}

    def tally(block):
        for h in block.host_units:
            M = np.zeros((net.n_guests, net.n_hosts), dtype=int)
            np.add.at(M, (gu, h), 1)
            counts[tuple(map(tuple, M))] += 1

    generate_ensemble(net, RewireConfig(n, FixedBurnIn(50), seed, sampler=sampler), tally)
    emp = {t: c / n for t, c in counts.items()}
    return total_variation(emp, {t: 1 / len(tables) for t in tables}), len(tables)


def test_sampler_matches_enumeration(acceptance):
    g = {"g1": {}, "g2": {}}
    h = {"h1": {}, "h2": {}, "h3": {}}
    unit = make_network(g, h, [("g1", "h1", 1), ("g1", "h2", 1), ("g2", "h2", 1), ("g2", "h3", 1)])
    weighted = make_network(g, h, [("g1", "h1", 2), ("g1", "h2", 1), ("g2", "h2", 1),
                                   ("g2", "h3", 2)])
    tv_unit, n_unit = enumeration_tv(unit, "uniform")
    tv_w, n_w = enumeration_tv(weighted, "uniform")
    slots_unit, _ = enumeration_tv(unit, "slots")
    slots_w, _ = enumeration_tv(weighted, "slots")
    ok = tv_unit <= 0.05 and tv_w <= 0.05
    acceptance(2, "sampler vs enumeration", ok,
               f"uniform sampler TV {tv_unit:.4f} ({n_unit} matrices, unit weights), "
               f"{tv_w:.4f} ({n_w} matrices, weighted); slots sampler TV "
               f"{slots_unit:.4f} / {slots_w:.4f} for reference")
    assert ok


# 3, 4 ------------------------------------------------------------------------


def synth_labels(bias, seed):
    spec = SynthSpec(n_guests=1000, n_hosts=100, group_shares={"gender": {"F": 0.6, "M": 0.4}},
                     bias=bias, seed=seed)
    net, _ = generate(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HomorewireWarning)
        return HomophilyDetector("gender", n_configs=1000, random_state=seed).fit(net).labels_


def test_null_calibration(acceptance):
    flagged = total = 0
    for seed in range(100):
        labels = synth_labels(0.0, seed)
        flagged += int((labels != "Compatible").sum())
        total += labels.size
    frac = flagged / total
    ok = 0.02 <= frac <= 0.09
    acceptance(3, "null calibration", ok,
               f"{flagged}/{total} pairs flagged = {frac:.4f} (target [0.02, 0.09])")
    assert ok


def test_detection_power(acceptance):
    same_over = {"FF": 0, "MM": 0}
    cross_under = {"FM": 0, "MF": 0}
    for seed in range(100):
        labels = synth_labels(1.0, 1000 + seed)
        same_over["FF"] += labels[0, 0] == "Over"
        same_over["MM"] += labels[1, 1] == "Over"
        cross_under["FM"] += labels[0, 1] == "Under"
        cross_under["MF"] += labels[1, 0] == "Under"
    ok = min(same_over.values()) >= 95 and min(cross_under.values()) >= 90
    acceptance(4, "detection power", ok,
               f"Over per same-group pair {same_over} (need >= 95), "
               f"Under per cross-group pair {cross_under} (need >= 90)")
    assert ok


# 5 -------------------------------------------------------------------------

_ARROWS = {"up": "↑", "down": "↓", "none": "—"}
_CITY = {"AMS": "Amsterdam", "CHI": "Chicago", "DUB": "Dublin", "HK": "Hong Kong",
         "NAS": "Nashville"}


def test_published_classification(acceptance):
    import csv

    with open(DATA / "gender_pairings_published.csv") as fh:
        rows = list(csv.DictReader(fh))
    reports, expected = [], {}
    for (city, ptype), grp in itertools.groupby(rows, key=lambda r: (r["city"], r["property_type"])):
        grp = {r["pair"]: r for r in grp}
        get = lambda key: [[float(grp[a + b][key]) / 100 for b in "FM"] for a in "FM"]
        reports.append(ExpressionReport.from_values(
            "gender", ("F", "M"), get("observed"), get("lower"), get("upper"),
            slice_key=(_CITY[city], ptype)))
        for pair, r in grp.items():
            expected[(fmt.slice_label((_CITY[city], ptype)), pair)] = _ARROWS[r["arrow"]]
    table = {}
    for rep in reports:
        md = fmt.pairs_table([rep]).splitlines()
        heads = [c.strip() for c in md[0].strip("|").split("|")][1:]
        cells = [c.strip() for c in md[2].strip("|").split("|")]
        for pair, cell in zip(heads, cells[1:]):
            table[(cells[0], pair)] = cell.split()[-1]
    gender_ok = sum(table[k] == v for k, v in expected.items())

    hk = np.full((3, 3), 0.5)
    lo, hi = hk.copy(), hk.copy()
    hk[0, 0], lo[0, 0], hi[0, 0] = 0.3741, 0.3572, 0.3582
    hk_rep = ExpressionReport.from_values("race", ("White", "Asian", "Black"), hk, lo, hi,
                                          slice_key=("Hong Kong", "full"))
    hk_cell = fmt.grid_table(hk_rep).splitlines()[2].split("|")[2].strip()
    hk_ok = hk_cell == "[35.72; 35.82]% 37.41% ↑"
    ok = gender_ok == len(expected) == 40 and hk_ok
    acceptance(5, "published classification", ok,
               f"{gender_ok}/40 gender cells match; HK full W→W cell '{hk_cell}'")
    assert ok


# 6 -------------------------------------------------------------------------

CONFOUNDER = {
    "n_guests": 1000, "n_hosts": 100,
    "group_shares": {"race": {"White": 0.6, "Asian": 0.4}},
    "bias": 0.0,
    "price_model": {"attribute": "race",
                    "host_log_price": {"White": [6.6, 0.4], "Asian": [6.0, 0.4]},
                    "guest_log_budget": {"White": 6.6, "Asian": 6.0},
                    "width": 0.3},
}


def test_matched_pairs_remove_price_confounding(acceptance):
    over = insignificant = 0
    pairs = []
    for seed in range(100):
        net, _ = generate(SynthSpec(**CONFOUNDER, seed=seed))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HomorewireWarning)
            det = HomophilyDetector("race", n_configs=1000, random_state=seed).fit(net)
            res = HostMatcher(caliper=0.2).fit(net).result_
        over += det.report_.label("White", "White") == "Over"
        insignificant += res.p_value > 0.05
        pairs.append(res.n_pairs)
    ok = over >= 80 and insignificant >= 90
    acceptance(6, "matched-pair confounder control", ok,
               f"raw W→W Over in {over}/100 (need >= 80); matched p > 0.05 in "
               f"{insignificant}/100 (need >= 90); median pairs {int(np.median(pairs))}")
    assert ok


# 7 -------------------------------------------------------------------------


def test_perturbation_mechanics(acceptance):
    rng = np.random.default_rng(77)
    races = rng.choice(["White", "Asian", "Black"], p=[0.7, 0.2, 0.1], size=10_000)
    guests = {f"g{i:04d}": {"race": races[i]} for i in range(8000)}
    hosts = {f"h{j:04d}": {"race": races[8000 + j]} for j in range(2000)}
    pairs = {(f"g{i:04d}", f"h{i % 2000:04d}") for i in range(8000)}
    pairs |= {(f"g{rng.integers(8000):04d}", f"h{rng.integers(2000):04d}") for _ in range(4000)}
    net = make_network(guests, hosts, [(g, h, int(rng.integers(1, 4))) for g, h in sorted(pairs)])
    assert net.n_guests + net.n_hosts == 10_000
    n_white = int((races == "White").sum())
    spec = PerturbationSpec(0.05, seed=9)
    plan = perturbation_plan(net, spec)
    out = perturb_labels(net, spec)
    k = math.floor(0.05 * n_white + 0.5)
    n_black = sum(r == "Black" for *_, r in plan)
    sd = math.sqrt(k * 0.25)
    changed = sum(a.race != b.race for a, b in zip(net.guest_attrs + net.host_attrs,
                                                   out.guest_attrs + out.host_attrs))
    same_edges = all(getattr(net, f).tobytes() == getattr(out, f).tobytes()
                     for f in ("edge_guest", "edge_host", "edge_weight"))
    ok = (len(plan) == changed == k and abs(n_black - k / 2) <= 3 * sd and same_edges)
    acceptance(7, "perturbation mechanics", ok,
               f"{changed} relabeled (expected round(0.05*{n_white}) = {k}); {n_black} Black / "
               f"{k - n_black} Asian (|dev| {abs(n_black - k / 2):.1f} <= {3 * sd:.1f}); "
               f"edges identical: {same_edges}")
    assert ok


# 8 -------------------------------------------------------------------------


def test_determinism_across_jobs(acceptance, tmp_path):
    spec = SynthSpec(n_guests=400, n_hosts=50, seed=8, age={"mean": 35, "sd": 8},
                     group_shares={"gender": {"F": 0.55, "M": 0.45},
                                   "race": {"White": 0.6, "Asian": 0.3, "Black": 0.1}})
    paths = write_synthetic(spec, tmp_path / "data")
    outputs = []
    for i, jobs in enumerate((1, 2, 4, 1)):
        manifest = {"nodes": str(paths["nodes"]), "edges": str(paths["edges"]), "seed": 31,
                    "n_configs": 300, "formats": ["json"], "out": str(tmp_path / "out")}
        (tmp_path / "m.json").write_text(json.dumps(manifest))
        assert cli_main(["analyze", "--manifest", str(tmp_path / "m.json"), "--jobs", str(jobs)]) == 0
        out = tmp_path / "out"
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        out.rename(tmp_path / f"run{i}")
    ok = all(o == outputs[0] for o in outputs) and len(outputs[0]) == 4
    acceptance(8, "determinism", ok,
               f"{len(outputs[0])} JSON files byte-identical across --jobs 1, 2, 4 and a rerun: {ok}")
    assert ok


# 9 -------------------------------------------------------------------------


def test_kendall_oracle(acceptance):
    rng = np.random.default_rng(9)
    worst, none_mismatch = 0.0, 0
    for i in range(1000):
        n = int(rng.integers(2, 51))
        levels = [2, 3, 5, n][i % 4]  # most cases are tie-heavy
        a = rng.integers(0, levels, n)
        b = rng.integers(0, levels, n) if i % 3 else a + rng.integers(0, 2, n)
        ours, ref = kendall_tau(a, b), kendall_tau_b_pairs(a.tolist(), b.tolist())
        if ours is None or ref is None:
            none_mismatch += (ours is None) != (ref is None)
            continue
        worst = max(worst, abs(ours - ref))
    ok = worst <= 1e-12 and none_mismatch == 0
    acceptance(9, "Kendall tau-b oracle", ok,
               f"1000 vector pairs, max |diff| {worst:.2e} (<= 1e-12), constant-case mismatches "
               f"{none_mismatch}")
    assert ok
