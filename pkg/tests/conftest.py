import numpy as np
import pytest

from homorewire import network as nw
from homorewire.network import GUEST, HOST, AttributeSet, HostProfile, NodeRecord, SliceKey


def node(node_id, side, gender=None, race=None, age=None, conf=1.0, price=None, props=1):
    attrs = AttributeSet(gender=gender, gender_conf=conf, race=race, race_conf=conf,
                         age_years=age, age_conf=conf)
    profile = HostProfile(props, price) if price is not None else None
    return NodeRecord(node_id, side, attrs, profile, "Testville")


def make_network(guests, hosts, edges, key=SliceKey("Testville", "full")):
    """``guests``/``hosts`` map id -> attribute kwargs; ``edges`` are (g, h, w) tuples."""
    nodes = [node(g, GUEST, **kw) for g, kw in guests.items()]
    nodes += [node(h, HOST, **kw) for h, kw in hosts.items()]
    return nw.build_network(nodes, edges, key)


def random_network(rng, n_guests, n_hosts, n_edges, max_w=3, groups=("F", "M")):
    guests = {f"g{i}": {"gender": groups[rng.integers(len(groups))]} for i in range(n_guests)}
    hosts = {f"h{j}": {"gender": groups[rng.integers(len(groups))]} for j in range(n_hosts)}
    pairs = set()
    while len(pairs) < n_edges:
        pairs.add((int(rng.integers(n_guests)), int(rng.integers(n_hosts))))
    edges = [(f"g{g}", f"h{h}", int(rng.integers(1, max_w + 1))) for g, h in sorted(pairs)]
    used_g = {e[0] for e in edges}
    used_h = {e[1] for e in edges}
    return make_network({k: v for k, v in guests.items() if k in used_g},
                        {k: v for k, v in hosts.items() if k in used_h}, edges)


@pytest.fixture
def toy():
    """Two guests, three hosts, mixed genders and races."""
    guests = {"g1": {"gender": "F", "race": "White", "age": 30},
              "g2": {"gender": "M", "race": "Asian", "age": 40}}
    hosts = {"h1": {"gender": "F", "race": "White", "age": 25, "price": 500.0},
             "h2": {"gender": "M", "race": "Black", "age": 35, "price": 700.0, "props": 2},
             "h3": {"gender": "F", "race": "Asian", "age": 45, "price": 900.0}}
    return make_network(guests, hosts, [("g1", "h1", 2), ("g1", "h2", 1),
                                        ("g2", "h2", 1), ("g2", "h3", 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_count_fixture(directory, city, property_type, n_hosts, n_guests, n_pairs, seed=0):
    """Write a nodes/edges pair with exactly the requested slice totals.

    Every host and guest is incident to at least one distinct pair. Returns
    ``(nodes_path, edges_path, manifest)``.
    """
    import csv

    from homorewire.io import EDGE_COLUMNS, NODE_COLUMNS

    assert n_guests >= n_hosts and n_pairs >= n_guests
    rng = np.random.default_rng(seed)
    pairs = [(g, g % n_hosts) for g in range(n_guests)]
    seen = set(pairs)
    while len(pairs) < n_pairs:
        p = (int(rng.integers(n_guests)), int(rng.integers(n_hosts)))
        if p not in seen:
            seen.add(p)
            pairs.append(p)
    nodes_p, edges_p = directory / "nodes.csv", directory / "edges.csv"
    races = ("White", "Asian", "Black", "")
    with open(nodes_p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(NODE_COLUMNS)
        for i in range(n_guests):
            w.writerow([f"g{i}", "guest", city, "FM"[i % 2], "0.9", races[i % 4], "0.8",
                        "", "", "", ""])
        for j in range(n_hosts):
            w.writerow([f"h{j}", "host", city, "MF"[j % 2], "0.7", races[j % 3], "0.6",
                        str(25 + j % 40), "0.5", str(1 + j % 3), f"{300 + j}.5"])
    with open(edges_p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EDGE_COLUMNS)
        for g, h in pairs:
            w.writerow([f"g{g}", f"h{h}", int(rng.integers(1, 4)), city, property_type])
    manifest = {(city, property_type): (n_hosts, n_guests, n_pairs)}
    return nodes_p, edges_p, manifest


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``PASS``/``FAIL`` line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} -- {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
