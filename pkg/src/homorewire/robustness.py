"""Robustness procedures: confidence re-runs, label perturbation, wealth controls.

Matched-pair analysis pairs White with non-White hosts of similar wealth
proxies (properties owned, weekly price), then compares the share of stays
each side receives from White guests with a paired t-test.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DegenerateDifferences,
    DegenerateTerciles,
    DegenerateVariance,
    EmptySourceGroup,
    InsufficientData,
    InsufficientPriceData,
    NoKnownRaceStays,
    NoMatchablePairs,
)
from .network import GUEST, HOST, RACES, confidence_mask, relabel
from .pairing import Expression, analyze_network
from .validation import check_network, check_unit_interval

# --------------------------------------------------------------------------
# label perturbation


@dataclass(frozen=True)
class PerturbationSpec:
    fraction: float = 0.05
    source_group: str = "White"
    target_groups: tuple = ("Black", "Asian")
    seed: int = 0

    def __post_init__(self):
        check_unit_interval(self.fraction, "fraction", low_open=True)
        for g in (self.source_group, *self.target_groups):
            if g not in RACES:
                raise ValueError(f"unknown race group {g!r}")
        if not self.target_groups:
            raise ValueError("need at least one target group")


def round_half_up(x):
    return int(math.floor(x + 0.5))


def perturbation_plan(network, spec: PerturbationSpec):
    """Nodes to relabel as ``[(side, node_id, new_race)]``.

    Candidates are all guests then all hosts (each in id order) whose race is
    ``spec.source_group``. ``round_half_up(fraction * N)`` of them are chosen
    as the first entries of ``default_rng(seed).permutation(N)``; a second
    draw ``integers(0, len(target_groups))`` from the same generator picks
    each new label.
    """
    cands = [(GUEST, gid) for gid, a in zip(network.guest_ids, network.guest_attrs)
             if a.race == spec.source_group]
    cands += [(HOST, hid) for hid, a in zip(network.host_ids, network.host_attrs)
              if a.race == spec.source_group]
    if not cands:
        raise EmptySourceGroup(f"{network.slice_key}: no {spec.source_group} nodes to relabel")
    k = round_half_up(spec.fraction * len(cands))
    rng = np.random.default_rng(spec.seed)
    chosen = rng.permutation(len(cands))[:k]
    picks = rng.integers(0, len(spec.target_groups), size=k)
    return [(*cands[c], spec.target_groups[p]) for c, p in zip(chosen.tolist(), picks.tolist())]


def perturb_labels(network, spec: PerturbationSpec = PerturbationSpec()):
    """Copy of ``network`` with a random share of one race relabelled."""
    plan = perturbation_plan(network, spec)
    guest_attrs = list(network.guest_attrs)
    host_attrs = list(network.host_attrs)
    for side, node_id, race in plan:
        if side == GUEST:
            i = network.guest_index(node_id)
            guest_attrs[i] = relabel(guest_attrs[i], race=race)
        else:
            j = network.host_index(node_id)
            host_attrs[j] = relabel(host_attrs[j], race=race)
    return network.with_attributes(guest_attrs, host_attrs)


class LabelPerturber(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`perturb_labels`; ``relabeled_`` keeps the last plan."""

    def __init__(self, fraction=0.05, source_group="White", target_groups=("Black", "Asian"),
                 random_state=0):
        self.fraction = fraction
        self.source_group = source_group
        self.target_groups = target_groups
        self.random_state = random_state

    def fit(self, network=None, y=None):
        self.spec_ = PerturbationSpec(self.fraction, self.source_group,
                                      tuple(self.target_groups), int(self.random_state or 0))
        return self

    def transform(self, network):
        check_is_fitted(self, "spec_")
        check_network(network, require_edges=False)
        self.relabeled_ = perturbation_plan(network, self.spec_)
        return perturb_labels(network, self.spec_)


# --------------------------------------------------------------------------
# price terciles


def tercile_bounds(prices):
    """``(low, high)`` weekly-price bounds of the middle third by rank.

    The bottom ``n // 3`` and top ``n // 3`` ranks are removed; prices tied
    with a boundary rank are kept.
    """
    p = np.sort(np.asarray(prices, dtype=float))
    n = p.size
    if n < 3:
        raise InsufficientPriceData(f"need at least 3 priced hosts, got {n}")
    cut = n // 3
    return float(p[cut]), float(p[n - 1 - cut])


def tercile_filter(network):
    """Sub-network of middle-third-price hosts, their edges and their guests."""
    priced = np.array([p is not None for p in network.host_profiles], dtype=bool)
    prices = np.array([p.weekly_price if p is not None else np.nan for p in network.host_profiles])
    lo, hi = tercile_bounds(prices[priced])
    keep = priced & (prices >= lo) & (prices <= hi)
    n = int(priced.sum())
    if int(keep.sum()) != n - 2 * (n // 3):
        warnings.warn(f"{network.slice_key}: price ties at the tercile bounds keep "
                      f"{int(keep.sum())} of {n} hosts", DegenerateTerciles, stacklevel=2)
    return network.subnetwork(host_mask=keep, drop_isolated=True)


class PriceTercileFilter(TransformerMixin, BaseEstimator):
    def fit(self, network=None, y=None):
        return self

    def transform(self, network):
        return tercile_filter(network)


# --------------------------------------------------------------------------
# matched pairs


@dataclass(frozen=True)
class MatchedPair:
    white_host: str
    nonwhite_host: str
    distance: float


def standardize(X):
    """Column z-scores (population std); constant columns become zero."""
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd


def greedy_match(ids_a, X_a, ids_b, X_b, caliper=0.2):
    """Greedy one-to-one matching on z-scored Euclidean distance.

    Covariates are standardized over both groups together. Pairs are taken in
    increasing distance (ties by ids) while both members are unmatched and the
    distance is within ``caliper``. Returns ``[(id_a, id_b, distance)]``.
    """
    X_a = np.asarray(X_a, dtype=float).reshape(len(ids_a), -1)
    X_b = np.asarray(X_b, dtype=float).reshape(len(ids_b), -1)
    if not len(ids_a) or not len(ids_b):
        return []
    Z = standardize(np.vstack([X_a, X_b]))
    Za, Zb = Z[:len(ids_a)], Z[len(ids_a):]
    D = np.sqrt(((Za[:, None, :] - Zb[None, :, :]) ** 2).sum(axis=-1))
    ia, ib = np.nonzero(D <= caliper)
    order = sorted(range(ia.size), key=lambda k: (D[ia[k], ib[k]], ids_a[ia[k]], ids_b[ib[k]]))
    used_a, used_b, out = set(), set(), []
    for k in order:
        i, j = int(ia[k]), int(ib[k])
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out.append((ids_a[i], ids_b[j], float(D[i, j])))
    return out


def host_stay_counts(network, min_conf=0.0):
    """``{host_id: (stays from White guests, stays from known-race guests)}``."""
    race = [a.race if a.race is not None and a.race_conf >= min_conf else None
            for a in network.guest_attrs]
    known = np.array([r is not None for r in race])
    white = np.array([r == "White" for r in race])
    eg, eh, ew = network.edge_guest, network.edge_host, network.edge_weight
    w_white = np.bincount(eh, weights=ew * white[eg], minlength=network.n_hosts)
    w_known = np.bincount(eh, weights=ew * known[eg], minlength=network.n_hosts)
    return {hid: (int(w_white[j]), int(w_known[j])) for j, hid in enumerate(network.host_ids)}


def white_guest_rate(network, host_id, min_conf=0.0):
    """Share of a host's known-race stays that come from White guests."""
    j = network.host_index(host_id)
    white, known = host_stay_counts(network, min_conf)[network.host_ids[j]]
    if known == 0:
        raise NoKnownRaceStays(f"host {host_id!r} has no stays from known-race guests")
    return white / known


def match_candidates(network, covariates=("num_properties", "weekly_price"), min_conf=0.0):
    """White and non-White hosts eligible for matching, with covariate rows.

    Eligible hosts have a known race (at ``min_conf``), a host profile and at
    least one stay from a known-race guest.
    """
    counts = host_stay_counts(network, min_conf)
    white, nonwhite = ([], []), ([], [])
    for hid, a, prof in zip(network.host_ids, network.host_attrs, network.host_profiles):
        if a.race is None or a.race_conf < min_conf or prof is None or counts[hid][1] == 0:
            continue
        row = [getattr(prof, c) for c in covariates]
        target = white if a.race == "White" else nonwhite
        target[0].append(hid)
        target[1].append(row)
    return white, nonwhite, counts


def matched_pairs(network, caliper=0.2, covariates=("num_properties", "weekly_price"),
                  min_conf=0.0):
    """Greedy caliper matching of White to non-White hosts on wealth proxies."""
    (wid, wX), (nid, nX), _ = match_candidates(network, covariates, min_conf)
    if not wid or not nid:
        raise NoMatchablePairs(f"{network.slice_key}: need both White and non-White hosts")
    pairs = [MatchedPair(a, b, d) for a, b, d in greedy_match(wid, wX, nid, nX, caliper)]
    if not pairs:
        raise NoMatchablePairs(f"{network.slice_key}: no pair within caliper {caliper}")
    return pairs


@dataclass
class MatchedPairResult:
    pairs: list
    rate_white_hosts: float
    rate_nonwhite_hosts: float
    n_pairs: int
    n_stays: int
    t_stat: float
    p_value: float
    slice_key: Optional[tuple] = None
    flags: list = field(default_factory=list)

    def to_dict(self):
        sk = self.slice_key
        return {
            "slice": None if sk is None else {"city": sk[0], "property_type": sk[1]},
            "rate_white_hosts": self.rate_white_hosts,
            "rate_nonwhite_hosts": self.rate_nonwhite_hosts,
            "n_pairs": self.n_pairs, "n_stays": self.n_stays,
            "t_stat": self.t_stat, "p_value": self.p_value, "flags": list(self.flags),
            "pairs": [{"white_host": p.white_host, "nonwhite_host": p.nonwhite_host,
                       "distance": p.distance} for p in self.pairs],
        }


def paired_t(diffs):
    """Two-sided paired t-test on differences, with the degenerate conventions.

    All-zero differences give ``(0, 1)``; zero variance with a non-zero mean
    gives ``(+-inf, 0)``. Returns ``(t, p, flag)``.
    """
    d = np.asarray(diffs, dtype=float)
    if d.size < 2:
        raise InsufficientData("a paired t-test needs at least two pairs")
    if np.all(d == 0):
        warnings.warn("all paired differences are zero; p set to 1", DegenerateDifferences,
                      stacklevel=3)
        return 0.0, 1.0, "DegenerateDifferences"
    if np.all(d == d[0]):
        warnings.warn("paired differences have zero variance; p set to 0", DegenerateVariance,
                      stacklevel=3)
        return math.copysign(math.inf, d[0]), 0.0, "DegenerateVariance"
    res = stats.ttest_1samp(d, 0.0)
    return float(res.statistic), float(res.pvalue), None


def rate_t_test(pairs: Sequence[MatchedPair], stay_counts, rate_mode="stay_weighted",
                slice_key=None) -> MatchedPairResult:
    """Compare White-guest rates of matched White and non-White hosts.

    ``stay_counts`` maps host id to ``(white stays, known-race stays)``. Group
    rates are pooled over stays (``rate_mode="stay_weighted"``) or averaged
    over hosts (``"per_host"``); the test is always on per-pair differences.
    """
    if rate_mode not in ("stay_weighted", "per_host"):
        raise ValueError("rate_mode must be 'stay_weighted' or 'per_host'")
    usable = [p for p in pairs if stay_counts[p.white_host][1] and stay_counts[p.nonwhite_host][1]]
    rw = np.array([stay_counts[p.white_host][0] / stay_counts[p.white_host][1] for p in usable])
    rn = np.array([stay_counts[p.nonwhite_host][0] / stay_counts[p.nonwhite_host][1]
                   for p in usable])
    t, p, flag = paired_t(rw - rn)
    if rate_mode == "per_host":
        gw, gn = float(rw.mean()), float(rn.mean())
    else:
        gw = (sum(stay_counts[q.white_host][0] for q in usable)
              / sum(stay_counts[q.white_host][1] for q in usable))
        gn = (sum(stay_counts[q.nonwhite_host][0] for q in usable)
              / sum(stay_counts[q.nonwhite_host][1] for q in usable))
    n_stays = sum(stay_counts[q.white_host][1] + stay_counts[q.nonwhite_host][1] for q in usable)
    return MatchedPairResult(list(usable), gw, gn, len(usable), int(n_stays), t, p, slice_key,
                             [flag] if flag else [])


class HostMatcher(BaseEstimator):
    """Matched-pair analysis of White-guest rates across host race.

    Attributes
    ----------
    pairs_ : list of MatchedPair
    result_ : MatchedPairResult
    """

    def __init__(self, caliper=0.2, covariates=("num_properties", "weekly_price"), min_conf=0.0,
                 rate_mode="stay_weighted"):
        self.caliper = caliper
        self.covariates = covariates
        self.min_conf = min_conf
        self.rate_mode = rate_mode

    def fit(self, network, y=None):
        check_network(network)
        check_unit_interval(self.min_conf, "min_conf")
        if not self.caliper > 0:
            raise ValueError("caliper must be positive")
        self.pairs_ = matched_pairs(network, self.caliper, tuple(self.covariates), self.min_conf)
        counts = host_stay_counts(network, self.min_conf)
        self.result_ = rate_t_test(self.pairs_, counts, self.rate_mode, network.slice_key)
        return self


# --------------------------------------------------------------------------
# baseline vs variant comparisons


def compare_reports(baseline: dict, variant: dict):
    """Row per (slice, attribute, pair) present in both report mappings.

    Both arguments map ``(slice_key, attribute) -> ExpressionReport``.
    """
    rows = []
    for key in sorted(set(baseline) & set(variant), key=lambda k: (tuple(k[0] or ()), k[1])):
        b, v = baseline[key], variant[key]
        for i, ga in enumerate(b.groups):
            for j, gb in enumerate(b.groups):
                bl, vl = Expression(b.labels[i, j]), Expression(v.labels[i, j])
                rows.append({
                    "slice": list(key[0]) if key[0] else None, "attribute": key[1],
                    "pair": f"{ga}->{gb}",
                    "baseline_observed": float(b.observed[i, j]), "baseline_label": bl.value,
                    "variant_observed": float(v.observed[i, j]), "variant_label": vl.value,
                    "changed": bl != vl,
                })
    return rows


def analyze_dataset(networks, attributes=("gender", "race"), min_conf=0.0,
                    mode="stay_weighted", rewirer=None, level=0.95):
    """``{(slice_key, attribute): ExpressionReport}`` over every slice."""
    out = {}
    for key, net in networks.items():
        for a, rep in analyze_network(net, attributes, min_conf, mode, rewirer, level).items():
            out[(key, a)] = rep
    return out


def restrict_confidence(network, threshold):
    """Keep nodes whose every known attribute has confidence >= ``threshold``."""
    return network.subnetwork(guest_mask=confidence_mask(network.guest_attrs, threshold),
                              host_mask=confidence_mask(network.host_attrs, threshold),
                              drop_isolated=True)


@dataclass
class ConfidenceBundle:
    threshold: float
    baseline: float
    counts: dict
    baseline_counts: dict
    reports: dict
    baseline_reports: dict
    delta: list


def rerun_with_confidence(networks, threshold=0.5, baseline=0.3, attributes=("gender", "race"),
                          mode="stay_weighted", rewirer=None, level=0.95):
    """Repeat the analysis on nodes annotated with confidence >= ``threshold``.

    Each slice is restricted to confidently annotated nodes (at the baseline
    and at the new threshold) and re-analysed with the matching ``min_conf``.
    Per-slice (hosts, guests, pairs) counts and label deltas are returned.
    """
    check_unit_interval(threshold, "threshold")
    check_unit_interval(baseline, "baseline")
    runs = {}
    for t in (baseline, threshold):
        if t in runs:
            continue
        restricted = {k: restrict_confidence(n, t) for k, n in networks.items()}
        restricted = {k: n for k, n in restricted.items() if n.total_weight > 0}
        counts = {k: (n.n_hosts, n.n_guests, n.n_edges) for k, n in restricted.items()}
        runs[t] = (counts, analyze_dataset(restricted, attributes, t, mode, rewirer, level))
    (bc, br), (vc, vr) = runs[baseline], runs[threshold]
    return ConfidenceBundle(threshold, baseline, vc, bc, vr, br, compare_reports(br, vr))
