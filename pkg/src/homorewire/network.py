"""Immutable weighted bipartite guest -> host networks.

A network holds one (city, property type) slice: guests and hosts with their
annotated attributes, and directed guest -> host edges whose integer weight
counts stays. Edge arrays are stored sorted by (guest index, host index) and
are read-only, so a network can be shared freely between threads.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import (
    DegenerateBins,
    DuplicateNodeId,
    EmptyViewWarning,
    InsufficientData,
    NonPositiveWeight,
    UnknownEndpoint,
    UnknownNode,
)

GUEST = "guest"
HOST = "host"
SIDES = (GUEST, HOST)

GENDERS = ("F", "M")
RACES = ("White", "Asian", "Black")
QUINTILES = ("Q1", "Q2", "Q3", "Q4", "Q5")
ATTRIBUTES = ("gender", "race", "age_quintile")
PROPERTY_TYPES = ("full", "shared")

_GENDER_ALIASES = {"f": "F", "female": "F", "m": "M", "male": "M"}
_RACE_ALIASES = {"white": "White", "w": "White", "asian": "Asian", "a": "Asian",
                 "black": "Black", "b": "Black"}
_MISSING = {"", "unknown", "u", "na", "n/a", "none"}


def canonical_gender(value):
    """Map a gender string to ``"F"``/``"M"``, or None when unknown."""
    if value is None:
        return None
    key = str(value).strip().lower()
    if key in _MISSING:
        return None
    try:
        return _GENDER_ALIASES[key]
    except KeyError:
        raise ValueError(f"unrecognised gender {value!r}") from None


def canonical_race(value):
    """Map a race string to ``"White"``/``"Asian"``/``"Black"``, or None."""
    if value is None:
        return None
    key = str(value).strip().lower()
    if key in _MISSING:
        return None
    try:
        return _RACE_ALIASES[key]
    except KeyError:
        raise ValueError(f"unrecognised race {value!r}") from None


def canonical_property_type(value):
    key = str(value).strip().lower()
    if key not in PROPERTY_TYPES:
        raise ValueError(f"property type must be one of {PROPERTY_TYPES}, got {value!r}")
    return key


class SliceKey(NamedTuple):
    city: str
    property_type: str

    def __str__(self):
        return f"{self.city}/{self.property_type}"


@dataclass(frozen=True)
class AttributeSet:
    """Annotated demographic attributes of one user.

    A value of None means Unknown. Confidences live in [0, 1]; a known value
    without a reported confidence is taken at face value (confidence 1).
    """

    gender: Optional[str] = None
    gender_conf: float = 1.0
    race: Optional[str] = None
    race_conf: float = 1.0
    age_years: Optional[int] = None
    age_conf: float = 1.0

    def __post_init__(self):
        for name in ("gender_conf", "race_conf", "age_conf"):
            conf = getattr(self, name)
            if not (0.0 <= conf <= 1.0):
                raise ValueError(f"{name}={conf} outside [0, 1]")
        if self.gender is not None and self.gender not in GENDERS:
            raise ValueError(f"gender must be one of {GENDERS} or None")
        if self.race is not None and self.race not in RACES:
            raise ValueError(f"race must be one of {RACES} or None")
        if self.age_years is not None and self.age_years < 0:
            raise ValueError("age_years must be non-negative")

    def value(self, attribute):
        if attribute == "gender":
            return self.gender
        if attribute == "race":
            return self.race
        if attribute in ("age", "age_quintile"):
            return self.age_years
        raise ValueError(f"unknown attribute {attribute!r}")

    def confidence(self, attribute):
        if attribute == "gender":
            return self.gender_conf
        if attribute == "race":
            return self.race_conf
        if attribute in ("age", "age_quintile"):
            return self.age_conf
        raise ValueError(f"unknown attribute {attribute!r}")

    def min_known_confidence(self):
        """Lowest confidence over the attributes whose value is known."""
        confs = [c for v, c in ((self.gender, self.gender_conf),
                                (self.race, self.race_conf),
                                (self.age_years, self.age_conf)) if v is not None]
        return min(confs) if confs else None


@dataclass(frozen=True)
class HostProfile:
    """Wealth proxies of a host: properties owned and weekly price."""

    num_properties: int
    weekly_price: float

    def __post_init__(self):
        if self.num_properties < 1:
            raise ValueError("num_properties must be positive")
        if not (self.weekly_price > 0 and math.isfinite(self.weekly_price)):
            raise ValueError("weekly_price must be a positive finite number")


@dataclass(frozen=True)
class NodeRecord:
    node_id: str
    side: str
    attributes: AttributeSet = field(default_factory=AttributeSet)
    profile: Optional[HostProfile] = None
    city: Optional[str] = None


@dataclass(frozen=True)
class EdgeRecord:
    guest_id: str
    host_id: str
    weight: int = 1
    city: Optional[str] = None
    property_type: Optional[str] = None


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class BipartiteNetwork:
    """Weighted guest -> host network for one slice.

    Build instances with :func:`build_network`; the constructor expects
    already validated, sorted parts.
    """

    def __init__(self, slice_key, guest_ids, host_ids, guest_attrs, host_attrs,
                 host_profiles, edge_guest, edge_host, edge_weight):
        self.slice_key = slice_key
        self.guest_ids = tuple(guest_ids)
        self.host_ids = tuple(host_ids)
        self.guest_attrs = tuple(guest_attrs)
        self.host_attrs = tuple(host_attrs)
        self.host_profiles = tuple(host_profiles)
        self.edge_guest = _readonly(np.asarray(edge_guest, dtype=np.int64))
        self.edge_host = _readonly(np.asarray(edge_host, dtype=np.int64))
        self.edge_weight = _readonly(np.asarray(edge_weight, dtype=np.int64))
        self._guest_pos = {g: i for i, g in enumerate(self.guest_ids)}
        self._host_pos = {h: i for i, h in enumerate(self.host_ids)}
        self._edges = None

    # sizes -----------------------------------------------------------------
    @property
    def n_guests(self):
        return len(self.guest_ids)

    @property
    def n_hosts(self):
        return len(self.host_ids)

    @property
    def n_edges(self):
        return int(self.edge_weight.size)

    @property
    def total_weight(self):
        return int(self.edge_weight.sum())

    # lookups ---------------------------------------------------------------
    def guest_index(self, guest_id):
        try:
            return self._guest_pos[guest_id]
        except KeyError:
            raise UnknownNode(f"no guest {guest_id!r} in {self.slice_key}") from None

    def host_index(self, host_id):
        try:
            return self._host_pos[host_id]
        except KeyError:
            raise UnknownNode(f"no host {host_id!r} in {self.slice_key}") from None

    def has_guest(self, guest_id):
        return guest_id in self._guest_pos

    def has_host(self, host_id):
        return host_id in self._host_pos

    @property
    def edges(self) -> Mapping:
        """Mapping ``(guest_id, host_id) -> weight``."""
        if self._edges is None:
            g, h = self.guest_ids, self.host_ids
            self._edges = {(g[i], h[j]): int(w) for i, j, w in
                           zip(self.edge_guest.tolist(), self.edge_host.tolist(),
                               self.edge_weight.tolist())}
        return self._edges

    def out_strengths(self):
        return np.bincount(self.edge_guest, weights=self.edge_weight,
                           minlength=self.n_guests).astype(np.int64)

    def in_strengths(self):
        return np.bincount(self.edge_host, weights=self.edge_weight,
                           minlength=self.n_hosts).astype(np.int64)

    def units(self):
        """Expand edges into one (guest, host) row per unit of weight."""
        return (np.repeat(self.edge_guest, self.edge_weight),
                np.repeat(self.edge_host, self.edge_weight))

    # derived networks --------------------------------------------------------
    def with_edges(self, edge_guest, edge_host, edge_weight):
        """Same nodes, new edge set (aggregated and sorted here)."""
        edge_guest, edge_host, edge_weight = _aggregate(
            np.asarray(edge_guest, dtype=np.int64), np.asarray(edge_host, dtype=np.int64),
            np.asarray(edge_weight, dtype=np.int64), self.n_hosts)
        return BipartiteNetwork(self.slice_key, self.guest_ids, self.host_ids,
                                self.guest_attrs, self.host_attrs, self.host_profiles,
                                edge_guest, edge_host, edge_weight)

    def with_attributes(self, guest_attrs=None, host_attrs=None):
        return BipartiteNetwork(
            self.slice_key, self.guest_ids, self.host_ids,
            self.guest_attrs if guest_attrs is None else guest_attrs,
            self.host_attrs if host_attrs is None else host_attrs,
            self.host_profiles, self.edge_guest, self.edge_host, self.edge_weight)

    def subnetwork(self, guest_mask=None, host_mask=None, drop_isolated=True):
        """Restrict to the masked nodes and the edges between them.

        With ``drop_isolated`` nodes left without any edge are removed too.
        """
        gm = np.ones(self.n_guests, bool) if guest_mask is None else np.asarray(guest_mask, bool)
        hm = np.ones(self.n_hosts, bool) if host_mask is None else np.asarray(host_mask, bool)
        keep = gm[self.edge_guest] & hm[self.edge_host]
        eg, eh, ew = self.edge_guest[keep], self.edge_host[keep], self.edge_weight[keep]
        if drop_isolated:
            gm = gm & (np.bincount(eg, minlength=self.n_guests) > 0)
            hm = hm & (np.bincount(eh, minlength=self.n_hosts) > 0)
        gnew = np.cumsum(gm) - 1
        hnew = np.cumsum(hm) - 1
        gsel = np.flatnonzero(gm).tolist()
        hsel = np.flatnonzero(hm).tolist()
        return BipartiteNetwork(
            self.slice_key,
            [self.guest_ids[i] for i in gsel], [self.host_ids[i] for i in hsel],
            [self.guest_attrs[i] for i in gsel], [self.host_attrs[i] for i in hsel],
            [self.host_profiles[i] for i in hsel],
            gnew[eg], hnew[eh], ew)

    def node_records(self):
        city = self.slice_key.city if self.slice_key else None
        for gid, attrs in zip(self.guest_ids, self.guest_attrs):
            yield NodeRecord(gid, GUEST, attrs, None, city)
        for hid, attrs, prof in zip(self.host_ids, self.host_attrs, self.host_profiles):
            yield NodeRecord(hid, HOST, attrs, prof, city)

    def edge_records(self):
        city, ptype = (self.slice_key if self.slice_key else (None, None))
        for (g, h), w in self.edges.items():
            yield EdgeRecord(g, h, w, city, ptype)

    # value semantics -------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, BipartiteNetwork):
            return NotImplemented
        return (self.slice_key == other.slice_key
                and self.guest_ids == other.guest_ids
                and self.host_ids == other.host_ids
                and self.guest_attrs == other.guest_attrs
                and self.host_attrs == other.host_attrs
                and self.host_profiles == other.host_profiles
                and np.array_equal(self.edge_guest, other.edge_guest)
                and np.array_equal(self.edge_host, other.edge_host)
                and np.array_equal(self.edge_weight, other.edge_weight))

    __hash__ = None

    def __repr__(self):
        return (f"BipartiteNetwork({self.slice_key}, guests={self.n_guests}, "
                f"hosts={self.n_hosts}, edges={self.n_edges}, W={self.total_weight})")


def _aggregate(eg, eh, ew, n_hosts):
    """Sum duplicate (guest, host) rows, drop zero weights, sort by key."""
    if eg.size == 0:
        return eg, eh, ew
    keys = eg * max(n_hosts, 1) + eh
    uniq, inverse = np.unique(keys, return_inverse=True)
    w = np.bincount(inverse, weights=ew, minlength=uniq.size).astype(np.int64)
    nz = w > 0
    uniq, w = uniq[nz], w[nz]
    return uniq // max(n_hosts, 1), uniq % max(n_hosts, 1), w


def build_network(nodes: Iterable, edges: Iterable, slice_key=None) -> BipartiteNetwork:
    """Assemble a network from node and edge records.

    ``nodes`` holds :class:`NodeRecord` objects. ``edges`` holds
    :class:`EdgeRecord` objects or ``(guest_id, host_id[, weight])`` tuples.
    Duplicate edge rows are merged by summing their weights. The result does
    not depend on the order of either input.
    """
    guests, hosts = {}, {}
    for row, node in enumerate(nodes):
        if node.side not in SIDES:
            raise ValueError(f"row {row}: side must be 'guest' or 'host', got {node.side!r}")
        if not node.node_id:
            raise ValueError(f"row {row}: empty node id")
        table = guests if node.side == GUEST else hosts
        if node.node_id in table:
            raise DuplicateNodeId(f"row {row}: duplicate {node.side} id {node.node_id!r}")
        if node.side == GUEST and node.profile is not None:
            raise ValueError(f"row {row}: host profile on guest {node.node_id!r}")
        table[node.node_id] = node

    guest_ids = sorted(guests)
    host_ids = sorted(hosts)
    gpos = {g: i for i, g in enumerate(guest_ids)}
    hpos = {h: i for i, h in enumerate(host_ids)}

    eg, eh, ew = [], [], []
    for row, edge in enumerate(edges):
        if isinstance(edge, EdgeRecord):
            g, h, w = edge.guest_id, edge.host_id, edge.weight
        else:
            g, h, *rest = edge
            w = rest[0] if rest else 1
        if g not in gpos:
            raise UnknownEndpoint(f"edge row {row}: unknown guest {g!r}")
        if h not in hpos:
            raise UnknownEndpoint(f"edge row {row}: unknown host {h!r}")
        if int(w) != w or w < 1:
            raise NonPositiveWeight(f"edge row {row}: weight {w!r} is not a positive integer")
        eg.append(gpos[g])
        eh.append(hpos[h])
        ew.append(int(w))

    eg, eh, ew = _aggregate(np.asarray(eg, dtype=np.int64), np.asarray(eh, dtype=np.int64),
                            np.asarray(ew, dtype=np.int64), len(host_ids))
    if slice_key is not None and not isinstance(slice_key, SliceKey):
        slice_key = SliceKey(*slice_key)
    return BipartiteNetwork(
        slice_key, guest_ids, host_ids,
        [guests[g].attributes for g in guest_ids],
        [hosts[h].attributes for h in host_ids],
        [hosts[h].profile for h in host_ids],
        eg, eh, ew)


def out_strength(network, guest_id):
    """Total stay weight leaving ``guest_id``."""
    i = network.guest_index(guest_id)
    return int(network.edge_weight[network.edge_guest == i].sum())


def in_strength(network, host_id):
    """Total stay weight received by ``host_id``."""
    j = network.host_index(host_id)
    return int(network.edge_weight[network.edge_host == j].sum())


# --------------------------------------------------------------------------
# age quintiles


@dataclass(frozen=True)
class QuintileBins:
    """Four cut points splitting ages into Q1..Q5.

    Bins are half-open, ``Q1 = [.., b1)``, ``Q2 = [b1, b2)`` ... ``Q5 = [b4, ..)``.
    When a cut point is repeated the ties at that value are kept together in
    the lowest bin touching it, so a constant sample lands entirely in Q1.
    """

    boundaries: tuple

    @property
    def degenerate(self):
        b = self.boundaries
        return any(b[i] >= b[i + 1] for i in range(3))

    def assign(self, ages):
        ages = np.asarray(ages)
        b = np.asarray(self.boundaries, dtype=float)
        idx = np.searchsorted(b, ages, side="right")
        vals, counts = np.unique(b, return_counts=True)
        for v in vals[counts > 1]:
            hit = ages == v
            idx[hit] = np.searchsorted(b, v, side="left")
        return idx

    def counts(self, ages):
        return np.bincount(self.assign(ages), minlength=5)

    def label(self, age):
        return QUINTILES[int(self.assign([age])[0])]

    def describe(self):
        """Interval labels in the ``< a``, ``[a, b)``, ``> d`` style."""
        b = [_fmt_num(x) for x in self.boundaries]
        return (f"< {b[0]}", f"[{b[0]}, {b[1]})", f"[{b[1]}, {b[2]})",
                f"[{b[2]}, {b[3]})", f">= {b[3]}")


def _fmt_num(x):
    return str(int(x)) if float(x).is_integer() else f"{x:g}"


def quintile_bins(ages: Sequence) -> QuintileBins:
    """Nearest-rank quintile cut points of a sample of ages.

    The k-th cut point is the first value above the bottom ``20k%`` of the
    sorted sample, i.e. ``sorted[ceil(0.2 k n)]``.
    """
    a = np.sort(np.asarray([x for x in ages if x is not None], dtype=float))
    n = a.size
    if n < 5:
        raise InsufficientData(f"need at least 5 known ages, got {n}")
    idx = [min(math.ceil(round(0.2 * k * n, 9)), n - 1) for k in range(1, 5)]
    bins = QuintileBins(tuple(float(a[i]) for i in idx))
    if bins.degenerate:
        warnings.warn(f"quintile cut points {bins.boundaries} are not strictly ascending",
                      DegenerateBins, stacklevel=2)
    return bins


# --------------------------------------------------------------------------
# attribute views


def groups_for(attribute):
    try:
        return {"gender": GENDERS, "race": RACES, "age_quintile": QUINTILES}[attribute]
    except KeyError:
        raise ValueError(f"attribute must be one of {ATTRIBUTES}, got {attribute!r}") from None


@dataclass(frozen=True)
class AttributeView:
    """Group codes of every node for one attribute; -1 marks exclusion."""

    attribute: str
    min_conf: float
    groups: tuple
    guest_codes: np.ndarray
    host_codes: np.ndarray
    bins: Optional[QuintileBins] = None

    @property
    def included_guests(self):
        return np.flatnonzero(self.guest_codes >= 0)

    @property
    def included_hosts(self):
        return np.flatnonzero(self.host_codes >= 0)

    def edge_mask(self, network):
        return (self.guest_codes[network.edge_guest] >= 0) & (self.host_codes[network.edge_host] >= 0)

    def is_empty(self, network):
        return not bool(self.edge_mask(network).any())


def _codes(attrs, attribute, min_conf, groups, bins):
    out = np.full(len(attrs), -1, dtype=np.int64)
    for i, a in enumerate(attrs):
        value = a.value(attribute)
        if value is None or a.confidence(attribute) < min_conf:
            continue
        if attribute == "age_quintile":
            if bins is None:
                continue
            out[i] = int(bins.assign([value])[0])
        else:
            out[i] = groups.index(value)
    return out


def attribute_view(network, attribute, min_conf=0.0, bins=None) -> AttributeView:
    """Group every node by ``attribute``, excluding Unknown or low-confidence ones.

    Nodes with confidence below ``min_conf`` are excluded. For
    ``age_quintile`` the cut points default to the quintiles of the included
    host ages.
    """
    if not (0.0 <= min_conf <= 1.0):
        raise ValueError(f"min_conf must lie in [0, 1], got {min_conf}")
    groups = groups_for(attribute)
    if attribute == "age_quintile" and bins is None:
        host_ages = [a.age_years for a in network.host_attrs
                     if a.age_years is not None and a.age_conf >= min_conf]
        try:
            bins = quintile_bins(host_ages)
        except InsufficientData:
            bins = None
    view = AttributeView(
        attribute, float(min_conf), groups,
        _codes(network.guest_attrs, attribute, min_conf, groups, bins),
        _codes(network.host_attrs, attribute, min_conf, groups, bins),
        bins)
    if view.is_empty(network):
        warnings.warn(f"{network.slice_key}: no edge has both endpoints with a known "
                      f"{attribute} at min_conf={min_conf}", EmptyViewWarning, stacklevel=2)
    return view


def confidence_mask(attrs, threshold):
    """Nodes whose every known attribute has confidence >= ``threshold``."""
    out = np.zeros(len(attrs), dtype=bool)
    for i, a in enumerate(attrs):
        low = a.min_known_confidence()
        out[i] = low is not None and low >= threshold
    return out


def relabel(attrs: AttributeSet, **changes) -> AttributeSet:
    return replace(attrs, **changes)
