"""Strength-preserving xSwap randomization of bipartite networks.

Each unit of edge weight is an individually swappable slot, so an edge of
weight ``w`` is ``w`` times as likely to be picked as an edge of weight one.
Every move keeps all guest out-strengths and host in-strengths unchanged.

Two samplers are available:

``"slots"``
    plain unit moves. Its stationary law over weight matrices is
    proportional to ``V(M) / prod(M_gh!)`` where ``V`` counts admissible
    unit pairs, i.e. (up to the nearly constant ``V``) the law of stays
    placed independently given the strengths.
``"uniform"``
    the same proposals with a Metropolis-Hastings correction making every
    weight matrix with the original strengths equally likely. It keeps a
    dense guests x hosts matrix per replicate and is meant for small
    networks.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from . import _kernels
from .exceptions import NotConverged, NotRewirable
from .network import BipartiteNetwork

SAMPLERS = ("slots", "uniform")
_MAX_DENSE = 20_000_000
_MASK64 = (1 << 64) - 1


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FixedBurnIn:
    swaps: int

    def __post_init__(self):
        if self.swaps < 0:
            raise ValueError("burn-in swap count must be >= 0")


@dataclass(frozen=True)
class AutoKendall:
    """Probe Kendall's tau every ``probe_interval`` swaps until it drops to ``tau_stop``.

    ``None`` intervals default to ``2 * n_edges`` (probe) and ``20 * n_edges``
    (maximum).
    """

    tau_stop: float = 0.05
    probe_interval: Optional[int] = None
    max_swaps: Optional[int] = None

    def __post_init__(self):
        if not (0.0 < self.tau_stop <= 1.0):
            raise ValueError("tau_stop must lie in (0, 1]")
        if self.probe_interval is not None and self.probe_interval < 1:
            raise ValueError("probe_interval must be positive")
        if self.max_swaps is not None and self.max_swaps < 1:
            raise ValueError("max_swaps must be positive")
        if (self.probe_interval is not None and self.max_swaps is not None
                and self.max_swaps < self.probe_interval):
            raise ValueError("max_swaps must be >= probe_interval")

    def resolved(self, n_edges):
        probe = self.probe_interval or max(1, 2 * n_edges)
        top = self.max_swaps or max(probe, 20 * n_edges)
        return probe, max(top, probe)


@dataclass(frozen=True)
class RewireConfig:
    n_configs: int = 1000
    burn_in: Union[FixedBurnIn, AutoKendall] = field(default_factory=AutoKendall)
    master_seed: int = 0
    thinning_swaps: Optional[int] = None
    sampler: str = "slots"

    def __post_init__(self):
        if self.n_configs < 1:
            raise ValueError("n_configs must be positive")
        if self.thinning_swaps is not None and self.thinning_swaps < 1:
            raise ValueError("thinning_swaps must be positive")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")

    def to_dict(self):
        d = asdict(self)
        d["burn_in"] = {"kind": type(self.burn_in).__name__, **asdict(self.burn_in)}
        return d


@dataclass(frozen=True)
class SwapMove:
    g1: int
    g2: int
    h1: int
    h2: int


# --------------------------------------------------------------------------
# random streams


def stream_state(master_seed, *key):
    """Four-word xoshiro256** state derived from ``(master_seed, *key)``."""
    ss = np.random.SeedSequence(int(master_seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    state = ss.generate_state(4, np.uint64)
    if not state.any():
        state[0] = 1
    return state


def replicate_seeds(master_seed, start, stop):
    return np.stack([stream_state(master_seed, 0, r) for r in range(start, stop)]) \
        if stop > start else np.zeros((0, 4), np.uint64)


class StreamRNG:
    """A private xoshiro256** stream, as used by the compiled kernels."""

    def __init__(self, master_seed=0, *key):
        self.state = stream_state(master_seed, *key)


# --------------------------------------------------------------------------
# mutable network state


def _vbase(gu, h, n_guests, n_hosts):
    W = gu.size
    r = np.bincount(gu, minlength=n_guests).astype(float)
    c = np.bincount(h, minlength=n_hosts).astype(float)
    return W * (W - 1) / 2.0 - float((r * (r - 1) / 2).sum()) - float((c * (c - 1) / 2).sum())


def _dense(gu, h, n_guests, n_hosts):
    if n_guests * n_hosts > _MAX_DENSE:
        raise ValueError("the uniform sampler needs a dense guests x hosts matrix; "
                         f"{n_guests} x {n_hosts} is too large")
    M = np.zeros((n_guests, n_hosts), dtype=np.int64)
    np.add.at(M, (gu, h), 1)
    return M, float((M * (M - 1) // 2).sum())


class NetworkState:
    """Mutable unit-level copy of a network, the state xSwap moves act on."""

    def __init__(self, network: BipartiteNetwork, sampler="slots"):
        if sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        self.network = network
        self.sampler = sampler
        gu, h = network.units()
        self.guest_units = np.ascontiguousarray(gu, dtype=np.int64)
        self.host_units = np.ascontiguousarray(h, dtype=np.int64)
        self.vbase = _vbase(self.guest_units, self.host_units, network.n_guests, network.n_hosts)
        if sampler == "uniform":
            self.M, self.S = _dense(self.guest_units, self.host_units,
                                    network.n_guests, network.n_hosts)
        else:
            self.M, self.S = np.zeros((1, 1), np.int64), 0.0

    def weights(self):
        """Current weights as ``{(guest_id, host_id): w}``."""
        eg, eh, ew = aggregate_units(self.guest_units, self.host_units, self.network.n_hosts)
        g, hh = self.network.guest_ids, self.network.host_ids
        return {(g[i], hh[j]): int(w) for i, j, w in zip(eg.tolist(), eh.tolist(), ew.tolist())}

    def to_network(self):
        eg, eh, ew = aggregate_units(self.guest_units, self.host_units, self.network.n_hosts)
        return self.network.with_edges(eg, eh, ew)

    def apply_move(self, move: SwapMove) -> bool:
        """Move one unit (g1,h1)->(g1,h2) and one (g2,h2)->(g2,h1).

        Degenerate moves (g1 == g2 or h1 == h2) and moves whose source edges
        are absent are rejected, leaving the state unchanged.
        """
        if move.g1 == move.g2 or move.h1 == move.h2:
            return False
        gu, h = self.guest_units, self.host_units
        a = np.flatnonzero((gu == move.g1) & (h == move.h1))
        b = np.flatnonzero((gu == move.g2) & (h == move.h2))
        if a.size == 0 or b.size == 0:
            return False
        h[a[0]], h[b[0]] = move.h2, move.h1
        if self.sampler == "uniform":
            M = self.M
            x11, x22, x12, x21 = (M[move.g1, move.h1], M[move.g2, move.h2],
                                  M[move.g1, move.h2], M[move.g2, move.h1])
            self.S += -(x11 - 1) - (x22 - 1) + x12 + x21
            M[move.g1, move.h1] -= 1
            M[move.g2, move.h2] -= 1
            M[move.g1, move.h2] += 1
            M[move.g2, move.h1] += 1
        return True

    def run(self, n_swaps, rng: StreamRNG):
        self.S = _kernels.swap_run(self.guest_units, self.host_units, rng.state, int(n_swaps),
                                   self.sampler == "uniform", self.M, self.vbase, self.S)


def aggregate_units(guest_units, host_units, n_hosts):
    """Collapse unit rows into sorted ``(guest, host, weight)`` edge arrays."""
    keys = np.asarray(guest_units, dtype=np.int64) * max(n_hosts, 1) + host_units
    uniq, counts = np.unique(keys, return_counts=True)
    return uniq // max(n_hosts, 1), uniq % max(n_hosts, 1), counts.astype(np.int64)


def check_rewirable(network):
    """Raise :class:`NotRewirable` unless some pair of units admits a swap.

    A swap exists iff the units span at least two guests and two hosts.
    """
    if network.total_weight < 2:
        raise NotRewirable(f"{network.slice_key}: fewer than two units of weight")
    if np.unique(network.edge_guest).size < 2:
        raise NotRewirable(f"{network.slice_key}: all stays come from a single guest")
    if np.unique(network.edge_host).size < 2:
        raise NotRewirable(f"{network.slice_key}: all stays go to a single host")


def xswap_step(state: NetworkState, rng: StreamRNG) -> NetworkState:
    """One admissible xSwap move drawn from ``rng``; mutates and returns ``state``."""
    check_rewirable(state.network)
    state.run(1, rng)
    return state


# --------------------------------------------------------------------------
# Kendall decorrelation probe


def kendall_tau(a, b):
    """Tie-corrected Kendall tau-b, or None when either vector is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("kendall_tau needs two 1-d vectors of equal length")
    if a.size < 2:
        raise ValueError("kendall_tau needs at least two observations")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return None
    return float(stats.kendalltau(a, b, variant="b").statistic)


def weight_vectors(orig_keys, orig_w, cur_keys, cur_w):
    """Align two sparse weight vectors over the union of their keys (absent = 0)."""
    keys = np.union1d(orig_keys, cur_keys)
    a = np.zeros(keys.size)
    b = np.zeros(keys.size)
    a[np.searchsorted(keys, orig_keys)] = orig_w
    b[np.searchsorted(keys, cur_keys)] = cur_w
    return a, b


def calibrate_burn_in(network, config: RewireConfig) -> int:
    """Swap count after which Kendall's tau with the original drops to ``tau_stop``.

    A single chain is run on a dedicated stream of ``master_seed``; tau is
    computed every ``probe_interval`` swaps between the original and current
    edge-weight vectors. Returns the first probed count meeting the threshold,
    or ``max_swaps`` with a :class:`NotConverged` warning.
    """
    mode = config.burn_in
    if not isinstance(mode, AutoKendall):
        raise TypeError("calibrate_burn_in needs an AutoKendall burn-in")
    check_rewirable(network)
    probe, top = mode.resolved(network.n_edges)
    nh = max(network.n_hosts, 1)
    orig_keys = network.edge_guest * nh + network.edge_host
    orig_w = network.edge_weight
    state = NetworkState(network, config.sampler)
    rng = StreamRNG(config.master_seed, 1)
    done = 0
    while done < top:
        step = min(probe, top - done)
        state.run(step, rng)
        done += step
        eg, eh, ew = aggregate_units(state.guest_units, state.host_units, network.n_hosts)
        tau = kendall_tau(*weight_vectors(orig_keys, orig_w, eg * nh + eh, ew))
        if tau is not None and tau <= mode.tau_stop:
            return done
    warnings.warn(f"{network.slice_key}: Kendall tau stayed above {mode.tau_stop} "
                  f"after {top} swaps", NotConverged, stacklevel=2)
    return top


def resolve_burn_in(network, config):
    if isinstance(config.burn_in, FixedBurnIn):
        return config.burn_in.swaps
    return calibrate_burn_in(network, config)


# --------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class ConfigurationBlock:
    """Consecutive replicates ``start .. start + len - 1`` of an ensemble.

    ``host_units[r]`` gives the host of every unit in replicate
    ``start + r``; the guest of each unit is ``guest_units``.
    """

    start: int
    guest_units: np.ndarray
    host_units: np.ndarray
    network: BipartiteNetwork

    def __len__(self):
        return self.host_units.shape[0]

    def edges(self, r):
        return aggregate_units(self.guest_units, self.host_units[r], self.network.n_hosts)

    def to_network(self, r):
        return self.network.with_edges(*self.edges(r))


@dataclass(frozen=True)
class EnsembleSummary:
    n_configs: int
    burn_in: int
    master_seed: int
    sampler: str
    thinning_swaps: Optional[int]

    def to_dict(self):
        return asdict(self)


def _batch_size(W, n_configs):
    return int(max(1, min(n_configs, 256, 4_000_000 // max(W, 1))))


def generate_ensemble(network, config: RewireConfig, consumer: Optional[Callable] = None,
                      n_jobs=1, batch_size=None, burn_in=None) -> EnsembleSummary:
    """Produce ``config.n_configs`` randomized configurations of ``network``.

    Without thinning, replicate ``r`` starts from the original network and
    applies the burn-in swaps on a stream derived from ``(master_seed, r)``,
    so output does not depend on ``n_jobs`` or ``batch_size``. With
    ``thinning_swaps`` the replicates are successive snapshots of one chain.
    ``consumer`` is called with each :class:`ConfigurationBlock`, in replicate
    order; configurations are not retained. ``burn_in`` overrides the
    configured burn-in with an already calibrated swap count.
    """
    n_configs = config.n_configs
    if burn_in is None:
        burn_in = resolve_burn_in(network, config) if not (
            isinstance(config.burn_in, FixedBurnIn) and config.burn_in.swaps == 0) else 0
    if burn_in > 0 or config.thinning_swaps:
        check_rewirable(network)
    gu, h0 = network.units()
    gu = np.ascontiguousarray(gu, dtype=np.int64)
    h0 = np.ascontiguousarray(h0, dtype=np.int64)
    W = gu.size
    uniform = config.sampler == "uniform"
    vbase = _vbase(gu, h0, network.n_guests, network.n_hosts)
    if uniform:
        M0, S0 = _dense(gu, h0, network.n_guests, network.n_hosts)
    else:
        M0, S0 = np.zeros((1, 1), np.int64), 0.0
    B = batch_size or _batch_size(W, n_configs)
    starts = list(range(0, n_configs, B))
    emit = consumer if consumer is not None else (lambda block: None)

    if config.thinning_swaps:
        h = h0.copy()
        state = stream_state(config.master_seed, 0, 0)
        M = M0.copy()
        S = S0
        for k, s in enumerate(starts):
            out = np.empty((min(B, n_configs - s), W), dtype=np.int64)
            first = burn_in if k == 0 else config.thinning_swaps
            S = _kernels.chain_block(gu, h, state, first, config.thinning_swaps,
                                     uniform, M, vbase, S, out)
            emit(ConfigurationBlock(s, gu, out, network))
    else:
        def run(s):
            e = min(s + B, n_configs)
            out = np.empty((e - s, W), dtype=np.int64)
            _kernels.restart_block(gu, h0, replicate_seeds(config.master_seed, s, e),
                                   int(burn_in), uniform, M0, vbase, S0, out)
            return ConfigurationBlock(s, gu, out, network)

        if n_jobs is None or n_jobs <= 1:
            for s in starts:
                emit(run(s))
        else:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                window = 2 * n_jobs
                pending = [pool.submit(run, s) for s in starts[:window]]
                nxt = window
                while pending:
                    block = pending.pop(0).result()
                    if nxt < len(starts):
                        pending.append(pool.submit(run, starts[nxt]))
                        nxt += 1
                    emit(block)
    return EnsembleSummary(n_configs, int(burn_in), int(config.master_seed),
                           config.sampler, config.thinning_swaps)


class XSwapRewirer(BaseEstimator):
    """Estimator front end to the xSwap null ensemble.

    ``fit`` calibrates the burn-in on a network; ``sample`` then streams the
    ensemble to a consumer.

    Parameters
    ----------
    n_configs : int
        Ensemble size.
    burn_in : "auto" or int
        ``"auto"`` calibrates with Kendall's tau, an int fixes the swap count.
    tau_stop, probe_interval, max_swaps :
        Kendall calibration settings (``None`` means the size-based default).
    thinning_swaps : int or None
        If set, replicates are snapshots of a single chain this many swaps apart.
    sampler : {"slots", "uniform"}
    random_state : int
        Master seed of all replicate streams.
    n_jobs : int
        Worker threads; results do not depend on it.
    """

    def __init__(self, n_configs=1000, burn_in="auto", tau_stop=0.05, probe_interval=None,
                 max_swaps=None, thinning_swaps=None, sampler="slots", random_state=0,
                 n_jobs=1):
        self.n_configs = n_configs
        self.burn_in = burn_in
        self.tau_stop = tau_stop
        self.probe_interval = probe_interval
        self.max_swaps = max_swaps
        self.thinning_swaps = thinning_swaps
        self.sampler = sampler
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self):
        if self.burn_in == "auto":
            burn = AutoKendall(self.tau_stop, self.probe_interval, self.max_swaps)
        elif isinstance(self.burn_in, (int, np.integer)) and not isinstance(self.burn_in, bool):
            burn = FixedBurnIn(int(self.burn_in))
        else:
            raise ValueError(f"burn_in must be 'auto' or a non-negative int, got {self.burn_in!r}")
        seed = 0 if self.random_state is None else int(self.random_state)
        return RewireConfig(int(self.n_configs), burn, seed, self.thinning_swaps, self.sampler)

    def fit(self, network, y=None):
        from .validation import check_network
        check_network(network)
        self.config_ = self._config()
        if isinstance(self.config_.burn_in, FixedBurnIn) and self.config_.burn_in.swaps == 0:
            self.burn_in_ = 0
        else:
            self.burn_in_ = resolve_burn_in(network, self.config_)
        self.network_ = network
        return self

    def sample(self, consumer=None, batch_size=None):
        from sklearn.utils.validation import check_is_fitted
        check_is_fitted(self, "burn_in_")
        return generate_ensemble(self.network_, self.config_, consumer, n_jobs=self.n_jobs,
                                 batch_size=batch_size, burn_in=self.burn_in_)

    def sample_networks(self, limit=None):
        """Materialize replicates as networks (small ensembles only)."""
        out = []

        def keep(block):
            for r in range(len(block)):
                out.append(block.to_network(r))

        self.sample(keep)
        return out[:limit] if limit is not None else out
