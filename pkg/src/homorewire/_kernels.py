"""Compiled inner loops: xoshiro256** streams and xSwap moves.

A configuration is stored as one row per unit of weight: ``gu[u]`` is the
guest of unit ``u`` (never changes) and ``h[u]`` its host. A swap exchanges
the hosts of two units with different guests and different hosts, which moves
one unit of weight from (g1, h1) to (g1, h2) and one from (g2, h2) to (g2, h1).
"""
import numpy as np
from numba import njit

_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U45 = np.uint64(45)
_U7 = np.uint64(7)
_U64 = np.uint64(64)
_U5 = np.uint64(5)
_U9 = np.uint64(9)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (_U64 - k))


@njit(inline="always")
def next_u64(s):
    result = _rotl(s[1] * _U5, _U7) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U45)
    return result


@njit(inline="always")
def next_float(s):
    return float(next_u64(s) >> _U11) * _INV53


@njit(inline="always")
def below(s, n):
    return int(next_float(s) * n)


@njit(nogil=True, cache=True)
def swap_run(gu, h, state, n_swaps, uniform, M, vbase, S):
    """Apply ``n_swaps`` admissible moves to ``h`` in place.

    Draws with i == j, g1 == g2 or h1 == h2 are redrawn and not counted.
    With ``uniform`` each admissible move passes a Metropolis-Hastings test
    that makes the stationary law uniform over weight matrices; ``M`` is then
    the dense current weight matrix and ``S`` the running sum of
    ``C(w, 2)`` over entries, both updated here. Returns the new ``S``.
    """
    W = gu.shape[0]
    done = 0
    while done < n_swaps:
        i = below(state, W)
        j = below(state, W)
        if i == j:
            continue
        g1 = gu[i]
        g2 = gu[j]
        h1 = h[i]
        h2 = h[j]
        if g1 == g2 or h1 == h2:
            continue
        if uniform:
            x11 = M[g1, h1]
            x22 = M[g2, h2]
            x12 = M[g1, h2]
            x21 = M[g2, h1]
            s_new = S - (x11 - 1) - (x22 - 1) + x12 + x21
            ratio = ((x12 + 1) * (x21 + 1) * (vbase + S)) / (x11 * x22 * (vbase + s_new))
            if ratio < 1.0 and next_float(state) >= ratio:
                done += 1
                continue
            M[g1, h1] = x11 - 1
            M[g2, h2] = x22 - 1
            M[g1, h2] = x12 + 1
            M[g2, h1] = x21 + 1
            S = s_new
        h[i] = h2
        h[j] = h1
        done += 1
    return S


@njit(nogil=True, cache=True)
def restart_block(gu, h0, seeds, n_swaps, uniform, M0, vbase, S0, out):
    """Each replicate restarts from ``h0`` with its own stream ``seeds[r]``."""
    for r in range(seeds.shape[0]):
        h = h0.copy()
        state = seeds[r].copy()
        if uniform:
            M = M0.copy()
        else:
            M = M0
        swap_run(gu, h, state, n_swaps, uniform, M, vbase, S0)
        out[r, :] = h


@njit(nogil=True, cache=True)
def chain_block(gu, h, state, first_swaps, thin_swaps, uniform, M, vbase, S, out):
    """Consecutive snapshots of one chain; ``h``, ``state`` and ``M`` advance in place."""
    for r in range(out.shape[0]):
        n = first_swaps if r == 0 else thin_swaps
        S = swap_run(gu, h, state, n, uniform, M, vbase, S)
        out[r, :] = h
    return S
