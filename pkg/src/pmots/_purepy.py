"""Numpy implementations of the hot kernels.

Used when the compiled ``_speedups`` extension is unavailable, and as the
cross-check for it in the test-suite.  Signatures match ``_speedups.pyx``.
"""
from __future__ import annotations

import numpy as np

# Bounds the (chunk, n, m) temporary built by dominator_counts.
_CHUNK_ELEMENTS = 4_000_000


def dominator_counts(objs: np.ndarray) -> np.ndarray:
    """Number of rows of ``objs`` that Pareto-dominate each row (minimization)."""
    objs = np.ascontiguousarray(objs, dtype=np.float64)
    n, m = objs.shape
    counts = np.zeros(n, dtype=np.int64)
    if n == 0:
        return counts
    chunk = max(1, _CHUNK_ELEMENTS // max(1, n * m))
    for start in range(0, n, chunk):
        target = objs[start:start + chunk, None, :]
        leq = np.all(objs[None, :, :] <= target, axis=2)
        lt = np.any(objs[None, :, :] < target, axis=2)
        counts[start:start + chunk] = np.count_nonzero(leq & lt, axis=1)
    return counts


def wlp_block_stats(codes: np.ndarray, tensor: np.ndarray, floor: float):
    """Best and second-best received power per block for a batch of solutions.

    Args:
        codes: ``(n, M)`` int array; ``-1`` for an Off site, otherwise the
            flattened ``power * N_D + direction`` index into ``tensor``.
        tensor: ``(M, C, L)`` received power in dBm.
        floor: noise floor in dBm; received powers below it are raised to it.

    Returns:
        ``(best, second, server)`` with shapes ``(n, L)``; ``server`` is the
        lowest-index site attaining ``best`` or ``-1`` when every site is Off.
    """
    codes = np.asarray(codes, dtype=np.int64)
    n, n_sites = codes.shape
    n_blocks = tensor.shape[2]
    on = codes >= 0
    rows = tensor[np.arange(n_sites)[None, :], np.where(on, codes, 0)]  # (n, M, L)
    rows = np.maximum(rows, floor)
    rows = np.where(on[:, :, None], rows, -np.inf)

    if n_sites == 1:
        best = rows[:, 0, :]
        second = np.full((n, n_blocks), -np.inf)
    else:
        top2 = -np.partition(-rows, 1, axis=1)[:, :2, :]
        best, second = top2[:, 0, :], top2[:, 1, :]
    server = np.argmax(rows, axis=1).astype(np.int64)
    server[~np.isfinite(best)] = -1
    best = np.where(np.isfinite(best), best, floor)
    second = np.where(np.isfinite(second), second, floor)
    return np.ascontiguousarray(best), np.ascontiguousarray(second), server


def wlp_throughput(best, server, weights, tier_snr, tier_rate, users, floor):
    """Per-block throughput (bit/s) under proportional user apportionment.

    A block is served by ``server``; its nominal rate is the highest tier whose
    SNR threshold ``best - floor`` reaches.  Each site carries ``users`` times
    the share of block weight it serves, and a block gets rate / site users.
    """
    n = best.shape[0]
    n_sites = int(server.max()) + 1 if server.size else 0
    if len(tier_snr):
        idx = np.searchsorted(tier_snr, best - floor, side="right") - 1
        rate = np.where(idx >= 0, tier_rate[np.maximum(idx, 0)], 0.0)
    else:
        rate = np.zeros_like(best)
    served = server >= 0
    if n_sites == 0:
        return np.zeros_like(best)
    load = np.zeros(n * n_sites)
    flat = (np.arange(n)[:, None] * n_sites + server)[served]
    np.add.at(load, flat, np.broadcast_to(weights, best.shape)[served])
    load = load.reshape(n, n_sites)
    total = load.sum(axis=1, keepdims=True)
    site_users = np.divide(users * load, total, out=np.zeros_like(load), where=total > 0)
    block_users = np.take_along_axis(site_users, np.maximum(server, 0), axis=1)
    return np.divide(rate, block_users, out=np.zeros_like(rate), where=served & (block_users > 0))


def _penalties(u, profile):
    lo, hi, delta, maximize = profile
    if maximize:
        return np.where(u >= hi, 0.0, np.where(u <= lo, delta, delta * (hi - u) / (hi - lo)))
    return np.where(u <= lo, 0.0, np.where(u >= hi, delta, delta * (u - lo) / (hi - lo)))


def wlp_criteria(codes, tensor, floor, weights, profiles, tier_snr, tier_rate, users):
    """``(n, 3)`` array of coverage, interference and QoS criteria.

    ``profiles`` is ``(3, 4)``: ``s_min, s_max, delta, maximize`` per criterion.
    """
    best, second, server = wlp_block_stats(codes, tensor, floor)
    qos = wlp_throughput(best, server, weights, tier_snr, tier_rate, users, floor)
    out = np.empty((best.shape[0], 3))
    for c, u in enumerate((best, second, qos)):
        pen = _penalties(u, profiles[c])
        out[:, c] = np.sqrt(np.sum(weights * pen * pen, axis=1))
    return out


def wsn_reach(plink: np.ndarray, weight: np.ndarray, dest: int, energy: np.ndarray, hmax: int):
    """Hop-stratified reach probabilities and expected relay energies.

    ``weight[j]`` is the forwarding probability of ``j`` when it may relay and 0
    otherwise.  Returns ``(reach, spent)`` of shape ``(N, hmax)`` where column
    ``h - 1`` holds the ``h``-hop quantities for every starting node.
    """
    plink = np.asarray(plink, dtype=np.float64)
    n = plink.shape[0]
    w = plink * weight[None, :]
    np.fill_diagonal(w, 0.0)
    w[:, dest] = 0.0
    reach = np.zeros((n, hmax))
    spent = np.zeros((n, hmax))
    reach[:, 0] = plink[:, dest]
    reach[dest, 0] = 0.0
    for h in range(1, hmax):
        reach[:, h] = 1.0 - np.prod(1.0 - w * reach[None, :, h - 1], axis=1)
        spent[:, h] = w @ (energy + spent[:, h - 1])
    return reach, spent


def wsn_link_matrix(x, atten, power, gamma, noise, kbits):
    """Link success ``exp(-kbits / SINR)`` with forwarders as constant interferers."""
    emit = power * x
    total = emit @ atten
    interference = gamma * (total[None, :] - emit[:, None] * atten)
    signal = power[:, None] * atten
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = signal / (noise + interference)
        p = np.exp(-kbits / sinr)
    p = np.clip(np.nan_to_num(p, nan=0.0), 0.0, 1.0)
    np.fill_diagonal(p, 0.0)
    return p


def wsn_criteria(xs, atten, power, energy, gamma, noise, kbits, sources, dests, hmax):
    """``(n, 3)`` robustness, delay and energy averaged over the ``(sources[i], dests[i])`` pairs."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    out = np.zeros((xs.shape[0], 3))
    hops2 = np.arange(hmax, dtype=np.float64) ** 2
    for r, x in enumerate(xs):
        p = wsn_link_matrix(x, atten, power, gamma, noise, kbits)
        cache = {}
        for s, d in zip(sources, dests):
            if d not in cache:
                cache[d] = wsn_reach(p, x, d, energy, hmax)
            reach, spent = cache[d]
            rs = reach[s]
            missed = np.concatenate([[1.0], np.cumprod(1.0 - rs)[:-1]])
            out[r, 0] += np.prod(1.0 - rs)
            out[r, 1] += np.sum(hops2 * rs * missed)
            out[r, 2] += spent[s].sum()
    out /= len(sources)
    return out
