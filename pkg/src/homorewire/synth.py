"""Synthetic guest/host networks with planted homophily.

Every guest makes a number of stays; each stay picks a host with probability
proportional to

    attractiveness[h] * (1 + bias if same group else 1) * price_fit(g, h)

``bias = 0`` is the exact null, ``bias = inf`` restricts stays to the
guest's own group. The optional price model gives hosts a group-dependent
weekly price and guests a group-dependent budget, so that guests sort on
price alone; that makes race and choices correlated without any racial
preference.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import InvalidSpec
from .network import (
    GENDERS,
    GUEST,
    HOST,
    RACES,
    AttributeSet,
    HostProfile,
    NodeRecord,
    SliceKey,
    build_network,
    canonical_property_type,
)

_VALID_GROUPS = {"gender": GENDERS, "race": RACES}


@dataclass
class SynthSpec:
    n_guests: int = 1000
    n_hosts: int = 100
    group_shares: dict = field(default_factory=lambda: {"gender": {"F": 0.6, "M": 0.4}})
    activity: dict = field(default_factory=lambda: {"kind": "constant", "k": 2})
    bias: float = 0.0
    bias_attribute: Optional[str] = None
    attractiveness: dict = field(default_factory=lambda: {"kind": "uniform"})
    price_model: Optional[dict] = None
    age: Optional[dict] = None
    confidence: float = 1.0
    city: str = "Synthville"
    property_type: str = "full"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_guests < 1 or self.n_hosts < 1:
            raise InvalidSpec("n_guests and n_hosts must be positive")
        if not self.group_shares:
            raise InvalidSpec("group_shares must name at least one attribute")
        for attr, shares in self.group_shares.items():
            if attr not in _VALID_GROUPS:
                raise InvalidSpec(f"group_shares attribute must be gender or race, got {attr!r}")
            bad = [g for g in shares if g not in _VALID_GROUPS[attr]]
            if bad:
                raise InvalidSpec(f"unknown {attr} groups {bad}")
            if any(p < 0 for p in shares.values()) or abs(sum(shares.values()) - 1.0) > 1e-9:
                raise InvalidSpec(f"{attr} shares must be non-negative and sum to 1")
        if self.bias_attribute is None:
            self.bias_attribute = next(iter(self.group_shares))
        if self.bias_attribute not in self.group_shares:
            raise InvalidSpec("bias_attribute must be one of the group_shares attributes")
        if isinstance(self.bias, str):
            if self.bias.lower() not in ("inf", "infinity"):
                raise InvalidSpec(f"bias must be a number >= -1 or 'inf', got {self.bias!r}")
            self.bias = math.inf
        if not self.bias >= -1:
            raise InvalidSpec("bias must be >= -1")
        kind = self.activity.get("kind")
        if kind == "constant":
            if int(self.activity.get("k", 0)) < 1:
                raise InvalidSpec("constant activity needs k >= 1")
        elif kind == "powerlaw":
            if self.activity.get("alpha", 0) <= 1 or int(self.activity.get("k_max", 0)) < 1:
                raise InvalidSpec("power-law activity needs alpha > 1 and k_max >= 1")
        else:
            raise InvalidSpec(f"activity kind must be constant or powerlaw, got {kind!r}")
        if self.attractiveness.get("kind") not in ("uniform", "powerlaw"):
            raise InvalidSpec("attractiveness kind must be uniform or powerlaw")
        if not (0.0 <= self.confidence <= 1.0):
            raise InvalidSpec("confidence must lie in [0, 1]")
        try:
            self.property_type = canonical_property_type(self.property_type)
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from None
        if self.price_model is not None:
            pm = self.price_model
            attr = pm.get("attribute", "race")
            if attr not in self.group_shares:
                raise InvalidSpec("price_model attribute must appear in group_shares")
            for g in self.group_shares[attr]:
                if g not in pm.get("host_log_price", {}) or g not in pm.get("guest_log_budget", {}):
                    raise InvalidSpec(f"price_model lacks parameters for group {g!r}")

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["bias"]):
            d["bias"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class GroundTruth:
    bias: float
    bias_attribute: str
    guest_groups: dict
    host_groups: dict
    n_stays: int
    spec: dict

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["bias"]):
            d["bias"] = "inf"
        return d


def exact_counts(shares, n):
    """Largest-remainder split of ``n`` items by ``shares`` (ties by order)."""
    groups = list(shares)
    raw = [shares[g] * n for g in groups]
    base = [int(math.floor(x)) for x in raw]
    rest = n - sum(base)
    order = sorted(range(len(groups)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return dict(zip(groups, base))


def _assign(shares, n, rng):
    counts = exact_counts(shares, n)
    labels = np.array([g for g, c in counts.items() for _ in range(c)], dtype=object)
    return labels[rng.permutation(n)]


def _activity(spec, rng):
    a = spec.activity
    if a["kind"] == "constant":
        return np.full(spec.n_guests, int(a["k"]), dtype=np.int64)
    k = np.arange(1, int(a["k_max"]) + 1)
    p = k ** -float(a["alpha"])
    return rng.choice(k, size=spec.n_guests, p=p / p.sum())


def generate(spec: SynthSpec):
    """Draw a network from ``spec``; returns ``(BipartiteNetwork, GroundTruth)``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    G, H = spec.n_guests, spec.n_hosts
    g_lab = {a: _assign(s, G, rng) for a, s in spec.group_shares.items()}
    h_lab = {a: _assign(s, H, rng) for a, s in spec.group_shares.items()}

    if spec.attractiveness["kind"] == "powerlaw":
        attract = rng.pareto(float(spec.attractiveness.get("alpha", 2.0)), size=H) + 1.0
    else:
        attract = np.ones(H)

    pm = spec.price_model
    if pm is not None:
        pa = pm.get("attribute", "race")
        mu = np.array([pm["host_log_price"][g][0] for g in h_lab[pa]])
        sd = np.array([pm["host_log_price"][g][1] for g in h_lab[pa]])
        log_price = rng.normal(mu, sd)
        budget = np.array([pm["guest_log_budget"][g] for g in g_lab[pa]])
        width = float(pm.get("width", 0.3))
        props_rate = float(pm.get("properties_rate", 0.5))
    else:
        log_price = rng.normal(6.0, 0.5, size=H)
        budget = None
        props_rate = 0.5
    price = np.round(np.exp(log_price), 2)
    n_props = 1 + rng.poisson(props_rate, size=H)

    ages_g = ages_h = None
    if spec.age is not None:
        mean, sdv = float(spec.age.get("mean", 33)), float(spec.age.get("sd", 7))
        ages_g = np.clip(np.rint(rng.normal(mean, sdv, size=G)), 18, 90).astype(int)
        ages_h = np.clip(np.rint(rng.normal(mean, sdv, size=H)), 18, 90).astype(int)

    k = _activity(spec, rng)
    ba = spec.bias_attribute
    hgroup = h_lab[ba]
    keys = {}
    for i in range(G):
        key = (g_lab[ba][i], None if budget is None else budget[i])
        keys.setdefault(key, []).append(i)
    guest_ids = [f"g{i:0{len(str(G))}d}" for i in range(G)]
    host_ids = [f"h{j:0{len(str(H))}d}" for j in range(H)]
    edges = []
    for (grp, b), members in keys.items():
        same = hgroup == grp
        if math.isinf(spec.bias):
            w = attract * same
        else:
            w = attract * np.where(same, 1.0 + spec.bias, 1.0)
        if b is not None:
            w = w * np.exp(-((log_price - b) ** 2) / (2 * width ** 2))
        if w.sum() <= 0:
            raise InvalidSpec(f"guests of group {grp!r} have no host they may choose")
        members = np.array(members)
        draws = rng.choice(H, size=int(k[members].sum()), p=w / w.sum())
        owners = np.repeat(members, k[members])
        edges.extend((guest_ids[g], host_ids[h]) for g, h in zip(owners.tolist(), draws.tolist()))

    conf = float(spec.confidence)

    def attrs(labels, i, ages):
        return AttributeSet(
            gender=labels["gender"][i] if "gender" in labels else None, gender_conf=conf,
            race=labels["race"][i] if "race" in labels else None, race_conf=conf,
            age_years=None if ages is None else int(ages[i]), age_conf=conf)

    nodes = [NodeRecord(guest_ids[i], GUEST, attrs(g_lab, i, ages_g), None, spec.city)
             for i in range(G)]
    nodes += [NodeRecord(host_ids[j], HOST, attrs(h_lab, j, ages_h),
                         HostProfile(int(n_props[j]), float(price[j])), spec.city)
              for j in range(H)]
    net = build_network(nodes, edges, SliceKey(spec.city, spec.property_type))
    truth = GroundTruth(
        spec.bias, ba,
        {a: {guest_ids[i]: str(lab[i]) for i in range(G)} for a, lab in g_lab.items()},
        {a: {host_ids[j]: str(lab[j]) for j in range(H)} for a, lab in h_lab.items()},
        len(edges), spec.to_dict())
    return net, truth


def write_synthetic(spec: SynthSpec, out_dir):
    """Generate and write ``nodes.csv``, ``edges.csv``, ``ground_truth.json``, ``manifest.json``.

    Isolated generated nodes (guests or hosts without stays) are kept in
    ``nodes.csv``. Returns the output paths.
    """
    from .io import write_dataset

    net, truth = generate(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nodes_p, edges_p = out / "nodes.csv", out / "edges.csv"
    write_dataset(net, nodes_p, edges_p)
    (out / "ground_truth.json").write_text(json.dumps(truth.to_dict(), indent=1, sort_keys=True) + "\n")
    manifest = {"spec": spec.to_dict(), "n_guests": net.n_guests, "n_hosts": net.n_hosts,
                "n_pairs": net.n_edges, "n_stays": net.total_weight,
                "guests_with_stays": int((net.out_strengths() > 0).sum()),
                "hosts_with_stays": int((net.in_strengths() > 0).sum())}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return {"nodes": nodes_p, "edges": edges_p, "ground_truth": out / "ground_truth.json",
            "manifest": out / "manifest.json"}
