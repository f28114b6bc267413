"""Group-pairing frequencies, null intervals and over/under-expression labels."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import EmptyView, InsufficientEnsemble
from .network import GENDERS, RACES, attribute_view
from .rewiring import XSwapRewirer
from .validation import check_attribute, check_level, check_mode, check_network, check_unit_interval


class Expression(str, enum.Enum):
    OVER = "Over"
    UNDER = "Under"
    COMPATIBLE = "Compatible"


@dataclass(frozen=True)
class IntervalEstimate:
    lower: float
    upper: float
    level: float = 0.95

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")


@dataclass(frozen=True)
class PairingMatrix:
    """Stay counts between guest group ``a`` and host group ``b``.

    ``counts[i, j]`` pairs ``groups[i]`` guests with ``groups[j]`` hosts.
    Frequencies are counts over ``total_weight_counted``.
    """

    attribute: str
    groups: tuple
    counts: np.ndarray
    mode: str = "stay_weighted"

    @property
    def total_weight_counted(self):
        return int(self.counts.sum())

    @property
    def frequencies(self):
        total = self.counts.sum()
        if total == 0:
            return np.zeros(self.counts.shape)
        return self.counts / total

    @property
    def entries(self):
        f = self.frequencies
        return {(a, b): float(f[i, j]) for i, a in enumerate(self.groups)
                for j, b in enumerate(self.groups)}

    def __getitem__(self, pair):
        a, b = pair
        return float(self.frequencies[self.groups.index(a), self.groups.index(b)])


def pairing_counts(view, guest_units, host_units, mode="stay_weighted", n_hosts=None):
    """Group-pair counts of one or many configurations.

    ``host_units`` is ``(W,)`` for a single configuration or ``(B, W)`` for a
    block. In ``distinct_pairs`` mode repeated (guest, host) units count once.
    Returns an int array of shape ``(K, K)`` or ``(B, K, K)``.
    """
    K = len(view.groups)
    h = np.asarray(host_units)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    B, W = h.shape
    gu = np.asarray(guest_units)
    if mode == "distinct_pairs":
        if n_hosts is None:
            n_hosts = int(h.max()) + 1 if h.size else 1
        keys = np.sort(gu[None, :] * n_hosts + h, axis=1)
        first = np.ones_like(keys, dtype=bool)
        first[:, 1:] = keys[:, 1:] != keys[:, :-1]
        gcode = view.guest_codes[keys // n_hosts]
        hcode = view.host_codes[keys % n_hosts]
        ok = first & (gcode >= 0) & (hcode >= 0)
    else:
        gcode = np.broadcast_to(view.guest_codes[gu][None, :], (B, W))
        hcode = view.host_codes[h]
        ok = (gcode >= 0) & (hcode >= 0)
    rows = np.broadcast_to(np.arange(B)[:, None], (B, W))
    idx = (rows * K + gcode) * K + hcode
    out = np.bincount(idx[ok], minlength=B * K * K).reshape(B, K, K)
    return out[0] if single else out


def pairing_frequencies(network, attribute, min_conf=0.0, mode="stay_weighted",
                        view=None) -> PairingMatrix:
    """Observed group-pairing matrix of ``network`` for one attribute.

    Only edges whose guest and host both have a known value at
    confidence >= ``min_conf`` are counted.
    """
    check_mode(mode)
    if view is None:
        view = attribute_view(network, check_attribute(attribute), min_conf)
    K = len(view.groups)
    mask = view.edge_mask(network)
    weight = network.edge_weight[mask] if mode == "stay_weighted" else 1
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (view.guest_codes[network.edge_guest[mask]],
                       view.host_codes[network.edge_host[mask]]), weight)
    if counts.sum() == 0:
        raise EmptyView(f"{network.slice_key}: no counted {attribute} pairing at "
                        f"min_conf={view.min_conf}")
    return PairingMatrix(view.attribute, view.groups, counts, mode)


def _freqs(counts):
    totals = counts.sum(axis=(-2, -1), keepdims=True)
    return np.divide(counts, totals, out=np.zeros(counts.shape), where=totals > 0)


def interval_array(null_freqs, level=0.95):
    """Percentile bounds (linear interpolation) over axis 0; returns ``(lower, upper)``."""
    null_freqs = np.asarray(null_freqs, dtype=float)
    if null_freqs.shape[0] < 2:
        raise InsufficientEnsemble("need at least two null configurations")
    q = 100.0 * (1.0 - check_level(level)) / 2.0
    lo, hi = np.percentile(null_freqs, [q, 100.0 - q], axis=0, method="linear")
    return lo, hi


def ensemble_intervals(stream: Iterable, level=0.95) -> dict:
    """Null interval of every group pair from a stream of :class:`PairingMatrix`."""
    mats = list(stream)
    if len(mats) < 2:
        raise InsufficientEnsemble(f"need at least two null matrices, got {len(mats)}")
    groups = mats[0].groups
    freqs = np.stack([m.frequencies for m in mats])
    lo, hi = interval_array(freqs, level)
    return {(a, b): IntervalEstimate(float(lo[i, j]), float(hi[i, j]), level)
            for i, a in enumerate(groups) for j, b in enumerate(groups)}


def classify(observed, interval: IntervalEstimate) -> Expression:
    """Over above the interval, Under below it, otherwise Compatible."""
    if observed > interval.upper:
        return Expression.OVER
    if observed < interval.lower:
        return Expression.UNDER
    return Expression.COMPATIBLE


def demography_summary(network, min_conf=0.0):
    """Shares of each gender and race among known hosts and guests.

    Returns ``{attribute: {"hosts": {group: share}, "guests": {...}}}``;
    a side without any known value maps to an empty dict.
    """
    out = {}
    for attribute, groups in (("gender", GENDERS), ("race", RACES)):
        out[attribute] = {}
        for side, attrs in (("hosts", network.host_attrs), ("guests", network.guest_attrs)):
            vals = [a.value(attribute) for a in attrs
                    if a.value(attribute) is not None and a.confidence(attribute) >= min_conf]
            n = len(vals)
            out[attribute][side] = {g: vals.count(g) / n for g in groups} if n else {}
    return out


# --------------------------------------------------------------------------
# null ensembles and reports


class NullPairingCounter:
    """Ensemble consumer storing per-replicate pairing counts for several views."""

    def __init__(self, views, n_configs, mode="stay_weighted", n_hosts=None):
        self.views = views
        self.mode = mode
        self.n_hosts = n_hosts
        self.counts = {a: np.zeros((n_configs, len(v.groups), len(v.groups)), dtype=np.int64)
                       for a, v in views.items()}

    def __call__(self, block):
        s, e = block.start, block.start + len(block)
        n_hosts = self.n_hosts or block.network.n_hosts
        for a, v in self.views.items():
            self.counts[a][s:e] = pairing_counts(v, block.guest_units, block.host_units,
                                                 self.mode, n_hosts)

    def frequencies(self, attribute):
        return _freqs(self.counts[attribute])


@dataclass
class ExpressionReport:
    slice_key: Optional[tuple]
    attribute: str
    groups: tuple
    observed: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    labels: np.ndarray
    observed_counts: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def pairs(self):
        return [(a, b) for a in self.groups for b in self.groups]

    def label(self, a, b):
        return Expression(self.labels[self.groups.index(a), self.groups.index(b)])

    def interval(self, a, b):
        i, j = self.groups.index(a), self.groups.index(b)
        return IntervalEstimate(float(self.lower[i, j]), float(self.upper[i, j]),
                                self.metadata.get("level", 0.95))

    def to_dict(self):
        rows = []
        for i, a in enumerate(self.groups):
            for j, b in enumerate(self.groups):
                row = {"guest_group": a, "host_group": b,
                       "observed": float(self.observed[i, j]),
                       "lower": float(self.lower[i, j]), "upper": float(self.upper[i, j]),
                       "label": str(Expression(self.labels[i, j]).value)}
                if self.observed_counts is not None:
                    row["observed_count"] = int(self.observed_counts[i, j])
                rows.append(row)
        sk = self.slice_key
        return {
            "slice": None if sk is None else {"city": sk[0], "property_type": sk[1]},
            "attribute": self.attribute,
            "groups": list(self.groups),
            "pairs": rows,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d):
        groups = tuple(d["groups"])
        K = len(groups)
        obs, lo, hi = np.zeros((K, K)), np.zeros((K, K)), np.zeros((K, K))
        lab = np.empty((K, K), dtype=object)
        cnt = np.zeros((K, K), dtype=np.int64)
        has_counts = True
        for row in d["pairs"]:
            i, j = groups.index(row["guest_group"]), groups.index(row["host_group"])
            obs[i, j], lo[i, j], hi[i, j] = row["observed"], row["lower"], row["upper"]
            lab[i, j] = Expression(row["label"]).value
            if "observed_count" in row:
                cnt[i, j] = row["observed_count"]
            else:
                has_counts = False
        sk = d.get("slice")
        return cls(None if sk is None else (sk["city"], sk["property_type"]),
                   d["attribute"], groups, obs, lo, hi, lab,
                   cnt if has_counts else None, dict(d.get("metadata", {})))

    @classmethod
    def from_values(cls, attribute, groups, observed, lower, upper, slice_key=None,
                    metadata=None):
        """Build a report from given observed values and intervals, classifying each pair."""
        observed, lower, upper = (np.asarray(x, dtype=float) for x in (observed, lower, upper))
        labels = np.empty(observed.shape, dtype=object)
        for idx in np.ndindex(observed.shape):
            labels[idx] = classify(observed[idx], IntervalEstimate(lower[idx], upper[idx])).value
        return cls(slice_key, attribute, tuple(groups), observed, lower, upper, labels,
                   None, dict(metadata or {}))


def build_report(network, attribute, observed: PairingMatrix, null_freqs, level, metadata):
    lo, hi = interval_array(null_freqs, level)
    obs = observed.frequencies
    labels = np.empty(obs.shape, dtype=object)
    for idx in np.ndindex(obs.shape):
        labels[idx] = classify(obs[idx], IntervalEstimate(lo[idx], hi[idx], level)).value
    return ExpressionReport(network.slice_key, attribute, observed.groups, obs, lo, hi, labels,
                            observed.counts.copy(), metadata)


def analyze_network(network, attributes=("gender", "race", "age_quintile"), min_conf=0.0,
                    mode="stay_weighted", rewirer: Optional[XSwapRewirer] = None, level=0.95,
                    skip_empty=True):
    """Observed vs null pairings for several attributes from one shared ensemble.

    Returns ``{attribute: ExpressionReport}``. Attributes without any counted
    pairing are skipped (or raise :class:`EmptyView` if ``skip_empty`` is
    false).
    """
    check_network(network)
    check_mode(mode)
    rewirer = rewirer if rewirer is not None else XSwapRewirer()
    views, observed = {}, {}
    for a in attributes:
        view = attribute_view(network, check_attribute(a), min_conf)
        try:
            observed[a] = pairing_frequencies(network, a, min_conf, mode, view=view)
        except EmptyView:
            if not skip_empty:
                raise
            continue
        views[a] = view
    if not views:
        return {}
    rewirer.fit(network)
    counter = NullPairingCounter(views, int(rewirer.n_configs), mode, network.n_hosts)
    summary = rewirer.sample(counter)
    reports = {}
    for a in views:
        meta = {"mode": mode, "min_conf": float(min_conf), "level": float(level),
                "n_configs": summary.n_configs, "seed": summary.master_seed,
                "burn_in": summary.burn_in, "sampler": summary.sampler,
                "thinning_swaps": summary.thinning_swaps,
                "total_weight_counted": observed[a].total_weight_counted}
        if views[a].bins is not None:
            meta["age_boundaries"] = list(views[a].bins.boundaries)
        reports[a] = build_report(network, a, observed[a], counter.frequencies(a), level, meta)
    return reports


class HomophilyDetector(BaseEstimator):
    """Flags over- and under-expressed guest/host group pairings.

    ``fit`` counts observed pairings for ``attribute``, draws an xSwap null
    ensemble and stores per-pair percentile intervals. ``predict`` returns
    the label matrix (rows: guest groups, columns: host groups).

    Attributes
    ----------
    observed_ : PairingMatrix
    lower_, upper_ : ndarray of shape (K, K)
    labels_ : ndarray of shape (K, K) with values "Over", "Under", "Compatible"
    burn_in_ : int
    report_ : ExpressionReport
    """

    def __init__(self, attribute="gender", min_conf=0.0, mode="stay_weighted", level=0.95,
                 n_configs=1000, burn_in="auto", tau_stop=0.05, probe_interval=None,
                 max_swaps=None, thinning_swaps=None, sampler="slots", random_state=0,
                 n_jobs=1):
        self.attribute = attribute
        self.min_conf = min_conf
        self.mode = mode
        self.level = level
        self.n_configs = n_configs
        self.burn_in = burn_in
        self.tau_stop = tau_stop
        self.probe_interval = probe_interval
        self.max_swaps = max_swaps
        self.thinning_swaps = thinning_swaps
        self.sampler = sampler
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _rewirer(self):
        return XSwapRewirer(self.n_configs, self.burn_in, self.tau_stop, self.probe_interval,
                            self.max_swaps, self.thinning_swaps, self.sampler,
                            self.random_state, self.n_jobs)

    def fit(self, network, y=None):
        check_network(network)
        check_attribute(self.attribute)
        check_unit_interval(self.min_conf, "min_conf")
        check_level(self.level)
        if int(self.n_configs) < 2:
            raise InsufficientEnsemble("n_configs must be at least 2 to form intervals")
        rewirer = self._rewirer()
        report = analyze_network(network, (self.attribute,), self.min_conf, self.mode,
                                 rewirer, self.level, skip_empty=False)[self.attribute]
        self.report_ = report
        self.observed_ = PairingMatrix(self.attribute, report.groups, report.observed_counts,
                                       self.mode)
        self.lower_, self.upper_ = report.lower, report.upper
        self.labels_ = report.labels
        self.burn_in_ = rewirer.burn_in_
        return self

    def predict(self, network=None):
        """Label matrix of the fitted network, or of ``network`` against the fitted null."""
        check_is_fitted(self, "labels_")
        if network is None:
            return self.labels_.copy()
        obs = pairing_frequencies(network, self.attribute, self.min_conf, self.mode).frequencies
        out = np.empty(obs.shape, dtype=object)
        for idx in np.ndindex(obs.shape):
            out[idx] = classify(obs[idx], IntervalEstimate(self.lower_[idx], self.upper_[idx],
                                                           self.level)).value
        return out

    def fit_predict(self, network, y=None):
        return self.fit(network).labels_.copy()
