import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_network, random_network
from oracles import tally
from homorewire import pairing as pr
from homorewire import report as fmt
from homorewire.exceptions import EmptyView, InsufficientEnsemble
from homorewire.network import attribute_view
from homorewire.pairing import Expression, IntervalEstimate

DATA = Path(__file__).parent / "data"
CITY = {"AMS": "Amsterdam", "CHI": "Chicago", "DUB": "Dublin", "HK": "Hong Kong",
        "NAS": "Nashville"}
ARROW = {"up": Expression.OVER, "down": Expression.UNDER, "none": Expression.COMPATIBLE}


def published_gender_rows():
    with open(DATA / "gender_pairings_published.csv") as fh:
        return list(csv.DictReader(fh))


def test_all_female_network():
    net = make_network({"g1": {"gender": "F"}, "g2": {"gender": "F"}},
                       {"h1": {"gender": "F"}}, [("g1", "h1", 2), ("g2", "h1", 1)])
    m = pr.pairing_frequencies(net, "gender")
    assert m.entries == {("F", "F"): 1.0, ("F", "M"): 0.0, ("M", "F"): 0.0, ("M", "M"): 0.0}


def test_cross_gender_symmetry():
    net = make_network({"gF": {"gender": "F"}, "gM": {"gender": "M"}},
                       {"hF": {"gender": "F"}, "hM": {"gender": "M"}},
                       [("gF", "hM", 2), ("gM", "hF", 2)])
    m = pr.pairing_frequencies(net, "gender")
    assert m["F", "M"] == 0.5 and m["M", "F"] == 0.5 and m["F", "F"] == 0.0


@pytest.mark.parametrize("mode", ["stay_weighted", "distinct_pairs"])
def test_frequencies_match_tally(mode):
    rng = np.random.default_rng(4)
    races = ("White", "Asian", "Black", None)
    guests = {f"g{i}": {"race": races[rng.integers(4)]} for i in range(7)}
    hosts = {f"h{j}": {"race": races[rng.integers(4)]} for j in range(5)}
    pairs = sorted({(f"g{rng.integers(7)}", f"h{rng.integers(5)}") for _ in range(40)})[:15]
    edges = [(g, h, int(rng.integers(1, 5))) for g, h in pairs]
    net = make_network({g: guests[g] for g in {e[0] for e in edges}},
                       {h: hosts[h] for h in {e[1] for e in edges}}, edges)
    ref = tally(edges, {g: v["race"] for g, v in guests.items()},
                {h: v["race"] for h, v in hosts.items()}, ("White", "Asian", "Black"),
                distinct=mode == "distinct_pairs")
    got = pr.pairing_frequencies(net, "race", mode=mode).entries
    assert got == pytest.approx(ref, abs=1e-15)


def test_pairing_counts_agree_with_observed(toy):
    view = attribute_view(toy, "race")
    gu, h = toy.units()
    for mode in ("stay_weighted", "distinct_pairs"):
        block = pr.pairing_counts(view, gu, np.stack([h, h]), mode, toy.n_hosts)
        assert np.array_equal(block[1], pr.pairing_frequencies(toy, "race", mode=mode).counts)


@given(st.integers(0, 1000), st.integers(1, 5))
@settings(max_examples=30, deadline=None)
def test_frequencies_sum_to_one_and_scale_free(seed, factor):
    net = random_network(np.random.default_rng(seed), 6, 5, 10)
    m = pr.pairing_frequencies(net, "gender")
    assert abs(m.frequencies.sum() - 1.0) < 1e-12
    assert set(m.entries) == {(a, b) for a in "FM" for b in "FM"}
    scaled = net.with_edges(net.edge_guest, net.edge_host, net.edge_weight * factor)
    assert np.allclose(pr.pairing_frequencies(scaled, "gender").frequencies, m.frequencies)


def test_empty_view_raises():
    net = make_network({"g": {}}, {"h": {"gender": "F"}}, [("g", "h", 1)])
    with pytest.warns(UserWarning), pytest.raises(EmptyView):
        pr.pairing_frequencies(net, "gender")


def test_interval_examples():
    lo, hi = pr.interval_array(np.arange(1, 11) / 10.0)
    assert lo == pytest.approx(0.1225, abs=1e-12)
    assert hi == pytest.approx(0.9775, abs=1e-12)
    lo, hi = pr.interval_array(np.full(20, 0.3))
    assert lo == hi == pytest.approx(0.3)
    lo, hi = pr.interval_array(np.zeros(20))
    assert (lo, hi) == (0.0, 0.0)
    with pytest.raises(InsufficientEnsemble):
        pr.interval_array(np.zeros(1))


@given(st.lists(st.floats(0, 1), min_size=2, max_size=60))
@settings(max_examples=100, deadline=None)
def test_interval_is_ordered_and_within_range(values):
    lo, hi = pr.interval_array(np.array(values))
    assert min(values) <= lo <= hi <= max(values)


def test_classify_examples():
    assert pr.classify(0.3023, IntervalEstimate(0.2939, 0.2944)) is Expression.OVER
    assert pr.classify(0.2319, IntervalEstimate(0.2398, 0.2403)) is Expression.UNDER
    assert pr.classify(0.4255, IntervalEstimate(0.4233, 0.4260)) is Expression.COMPATIBLE
    assert pr.classify(0.5, IntervalEstimate(0.5, 0.5)) is Expression.COMPATIBLE


def test_published_gender_cells_classify_as_published():
    for row in published_gender_rows():
        iv = IntervalEstimate(float(row["lower"]) / 100, float(row["upper"]) / 100)
        assert pr.classify(float(row["observed"]) / 100, iv) is ARROW[row["arrow"]], row


def make_report(city, ptype, pair_rows):
    rows = {r["pair"]: r for r in pair_rows}
    get = lambda key: [[float(rows[a + b][key]) / 100 for b in "FM"] for a in "FM"]
    return pr.ExpressionReport.from_values("gender", ("F", "M"), get("observed"), get("lower"),
                                           get("upper"), slice_key=(city, ptype))


def test_markdown_matches_golden_file():
    rows = published_gender_rows()
    ams = make_report("Amsterdam", "full", [r for r in rows if r["city"] == "AMS"
                                            and r["property_type"] == "full"])
    nas = make_report("Nashville", "shared", [r for r in rows if r["city"] == "NAS"
                                              and r["property_type"] == "shared"])
    text = fmt.pairs_table([ams, nas], "gender pairings")
    assert text == (DATA / "golden_gender_table.md").read_text(encoding="utf-8")


def test_report_round_trips_through_json(toy):
    rep = pr.analyze_network(toy, ("race",), rewirer=pr.XSwapRewirer(20, 10))["race"]
    back = pr.ExpressionReport.from_dict(json.loads(fmt.report_json(rep)))
    assert back.to_dict() == rep.to_dict()
    assert len(rep.pairs) == 9


def test_single_pair_network_report():
    net = make_network({"g1": {"gender": "F"}, "g2": {"gender": "M"}},
                       {"h1": {"gender": "F"}, "h2": {"gender": "M"}},
                       [("g1", "h1", 1), ("g2", "h2", 1)])
    rep = pr.analyze_network(net, ("gender",), rewirer=pr.XSwapRewirer(10, 3))["gender"]
    assert len(rep.to_dict()["pairs"]) == 4
    assert rep.metadata["n_configs"] == 10


def test_detector_estimator(toy):
    det = pr.HomophilyDetector(attribute="gender", n_configs=50, burn_in=20, random_state=1)
    labels = det.fit_predict(toy)
    assert labels.shape == (2, 2)
    assert set(labels.ravel()) <= {"Over", "Under", "Compatible"}
    assert np.array_equal(det.predict(toy), labels)
    assert det.observed_.counts.sum() == toy.total_weight
    again = pr.HomophilyDetector(**det.get_params()).fit(toy)
    assert np.array_equal(again.lower_, det.lower_)
    with pytest.raises(InsufficientEnsemble):
        pr.HomophilyDetector(n_configs=1).fit(toy)


def test_null_intervals_cover_the_observed_frequency_under_the_null():
    # a network drawn from the null should rarely be flagged
    from homorewire.synth import SynthSpec, generate

    net, _ = generate(SynthSpec(n_guests=300, n_hosts=40, seed=11))
    det = pr.HomophilyDetector(n_configs=400, random_state=2).fit(net)
    assert (det.labels_ == "Compatible").sum() >= 2
    assert np.all(det.lower_ <= det.upper_)


def test_ensemble_intervals_from_stream():
    mats = [pr.PairingMatrix("gender", ("F", "M"), np.array([[k, 10 - k], [0, 0]]))
            for k in range(1, 11)]
    iv = pr.ensemble_intervals(mats)
    assert iv[("F", "F")].lower == pytest.approx(0.1225)
    assert iv[("M", "M")] == IntervalEstimate(0.0, 0.0)


def test_demography_summary():
    net = make_network({"g": {"race": "White"}},
                       {f"h{i}": {"race": r, "gender": "F"}
                        for i, r in enumerate(["White"] * 3 + ["Asian", "Black"])},
                       [("g", f"h{i}", 1) for i in range(5)])
    d = pr.demography_summary(net)
    assert d["race"]["hosts"] == {"White": 0.6, "Asian": 0.2, "Black": 0.2}
    assert d["gender"]["hosts"] == {"F": 1.0, "M": 0.0}
    assert d["gender"]["guests"] == {}
