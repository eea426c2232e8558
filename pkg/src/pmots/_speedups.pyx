# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contracts as ``pmots._purepy``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()


def dominator_counts(objs):
    cdef double[:, ::1] a = np.ascontiguousarray(objs, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1]
    out = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = out
    cdef Py_ssize_t i, j, k
    cdef bint leq, lt
    with nogil:
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                leq = True
                lt = False
                for k in range(m):
                    if a[j, k] > a[i, k]:
                        leq = False
                        break
                    if a[j, k] < a[i, k]:
                        lt = True
                if leq and lt:
                    counts[i] += 1
    return out


def wlp_block_stats(codes, tensor, double floor):
    cdef cnp.int64_t[:, ::1] c = np.ascontiguousarray(codes, dtype=np.int64)
    cdef double[:, :, ::1] t = np.ascontiguousarray(tensor, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], n_sites = c.shape[1], n_blocks = t.shape[2]
    best_a = np.empty((n, n_blocks), dtype=np.float64)
    second_a = np.empty((n, n_blocks), dtype=np.float64)
    server_a = np.empty((n, n_blocks), dtype=np.int64)
    cdef double[:, ::1] best = best_a
    cdef double[:, ::1] second = second_a
    cdef cnp.int64_t[:, ::1] server = server_a
    cdef Py_ssize_t s, k, l
    cdef cnp.int64_t code
    cdef double v
    with nogil:
        for s in range(n):
            for l in range(n_blocks):
                best[s, l] = floor
                second[s, l] = floor
                server[s, l] = -1
            for k in range(n_sites):
                code = c[s, k]
                if code < 0:
                    continue
                for l in range(n_blocks):
                    v = t[k, code, l]
                    if v < floor:
                        v = floor
                    if server[s, l] < 0 or v > best[s, l]:
                        if server[s, l] >= 0:
                            second[s, l] = best[s, l]
                        best[s, l] = v
                        server[s, l] = k
                    elif v > second[s, l]:
                        second[s, l] = v
    return best_a, second_a, server_a


cdef inline double _penalty(double u, double lo, double hi, double delta, bint maximize) nogil:
    if maximize:
        if u >= hi:
            return 0.0
        if u <= lo:
            return delta
        return delta * (hi - u) / (hi - lo)
    if u <= lo:
        return 0.0
    if u >= hi:
        return delta
    return delta * (u - lo) / (hi - lo)


def wlp_criteria(codes, tensor, double floor, weights, profiles, tier_snr, tier_rate, double users):
    cdef cnp.int64_t[:, ::1] c = np.ascontiguousarray(codes, dtype=np.int64)
    cdef double[:, :, ::1] t = np.ascontiguousarray(tensor, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[:, ::1] prof = np.ascontiguousarray(profiles, dtype=np.float64)
    cdef double[::1] snr_thr = np.ascontiguousarray(tier_snr, dtype=np.float64)
    cdef double[::1] rates = np.ascontiguousarray(tier_rate, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], n_sites = c.shape[1], n_blocks = t.shape[2]
    cdef Py_ssize_t n_tiers = snr_thr.shape[0]
    out_a = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_a
    best_a = np.empty(n_blocks, dtype=np.float64)
    second_a = np.empty(n_blocks, dtype=np.float64)
    server_a = np.empty(n_blocks, dtype=np.int64)
    load_a = np.empty(n_sites, dtype=np.float64)
    cdef double[::1] best = best_a
    cdef double[::1] second = second_a
    cdef cnp.int64_t[::1] server = server_a
    cdef double[::1] load = load_a
    cdef Py_ssize_t s, k, l, q
    cdef cnp.int64_t code
    cdef double v, total, rate, site_users, d, pc, pi, pq, acc_c, acc_i, acc_q
    with nogil:
        for s in range(n):
            for l in range(n_blocks):
                best[l] = floor
                second[l] = floor
                server[l] = -1
            for k in range(n_sites):
                load[k] = 0.0
                code = c[s, k]
                if code < 0:
                    continue
                for l in range(n_blocks):
                    v = t[k, code, l]
                    if v < floor:
                        v = floor
                    if server[l] < 0 or v > best[l]:
                        if server[l] >= 0:
                            second[l] = best[l]
                        best[l] = v
                        server[l] = k
                    elif v > second[l]:
                        second[l] = v
            total = 0.0
            for l in range(n_blocks):
                if server[l] >= 0:
                    load[server[l]] += w[l]
                    total += w[l]
            acc_c = 0.0
            acc_i = 0.0
            acc_q = 0.0
            for l in range(n_blocks):
                d = 0.0
                if server[l] >= 0 and total > 0.0:
                    rate = 0.0
                    for q in range(n_tiers):
                        if best[l] - floor >= snr_thr[q]:
                            rate = rates[q]
                    site_users = users * load[server[l]] / total
                    if site_users > 0.0:
                        d = rate / site_users
                pc = _penalty(best[l], prof[0, 0], prof[0, 1], prof[0, 2], prof[0, 3] != 0.0)
                pi = _penalty(second[l], prof[1, 0], prof[1, 1], prof[1, 2], prof[1, 3] != 0.0)
                pq = _penalty(d, prof[2, 0], prof[2, 1], prof[2, 2], prof[2, 3] != 0.0)
                acc_c += w[l] * pc * pc
                acc_i += w[l] * pi * pi
                acc_q += w[l] * pq * pq
            out[s, 0] = sqrt(acc_c)
            out[s, 1] = sqrt(acc_i)
            out[s, 2] = sqrt(acc_q)
    return out_a


def wsn_reach(plink, weight, Py_ssize_t dest, energy, Py_ssize_t hmax):
    cdef double[:, ::1] p = np.ascontiguousarray(plink, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef double[::1] e = np.ascontiguousarray(energy, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    reach_a = np.zeros((n, hmax), dtype=np.float64)
    spent_a = np.zeros((n, hmax), dtype=np.float64)
    cdef double[:, ::1] reach = reach_a
    cdef double[:, ::1] spent = spent_a
    cdef Py_ssize_t i, j, h
    cdef double miss, acc, wij
    with nogil:
        for i in range(n):
            reach[i, 0] = p[i, dest] if i != dest else 0.0
        for h in range(1, hmax):
            for i in range(n):
                miss = 1.0
                acc = 0.0
                for j in range(n):
                    if j == i or j == dest:
                        continue
                    wij = p[i, j] * w[j]
                    if wij == 0.0:
                        continue
                    miss *= 1.0 - wij * reach[j, h - 1]
                    acc += wij * (e[j] + spent[j, h - 1])
                reach[i, h] = 1.0 - miss
                spent[i, h] = acc
    return reach_a, spent_a


cdef void _fill_link(const double[::1] x, const double[:, ::1] a, const double[::1] pw, double gamma, double noise,
                     double kbits, double[::1] emit, double[::1] total, double[:, ::1] p) noexcept nogil:
    cdef Py_ssize_t nn = x.shape[0], i, j, k
    cdef double acc, signal, denom, sinr, v
    for k in range(nn):
        emit[k] = pw[k] * x[k]
    for j in range(nn):
        acc = 0.0
        for k in range(nn):
            acc = acc + emit[k] * a[k, j]
        total[j] = acc
    for i in range(nn):
        for j in range(nn):
            signal = pw[i] * a[i, j]
            if i == j or signal <= 0.0:
                p[i, j] = 0.0
                continue
            denom = noise + gamma * (total[j] - emit[i] * a[i, j])
            if denom <= 0.0:
                p[i, j] = 1.0
                continue
            sinr = signal / denom
            v = exp(-kbits / sinr)
            p[i, j] = 1.0 if v > 1.0 else v


def wsn_link_matrix(x, atten, power, double gamma, double noise, double kbits):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] a = np.ascontiguousarray(atten, dtype=np.float64)
    cdef double[::1] pw = np.ascontiguousarray(power, dtype=np.float64)
    cdef Py_ssize_t nn = xv.shape[0]
    p_a = np.empty((nn, nn), dtype=np.float64)
    cdef double[::1] emit = np.empty(nn, dtype=np.float64)
    cdef double[::1] total = np.empty(nn, dtype=np.float64)
    cdef double[:, ::1] p = p_a
    with nogil:
        _fill_link(xv, a, pw, gamma, noise, kbits, emit, total, p)
    return p_a



def wsn_criteria(xs, atten, power, energy, double gamma, double noise, double kbits, sources, dests,
                 Py_ssize_t hmax):
    cdef double[:, ::1] X = np.ascontiguousarray(np.atleast_2d(xs), dtype=np.float64)
    cdef double[:, ::1] a = np.ascontiguousarray(atten, dtype=np.float64)
    cdef double[::1] pw = np.ascontiguousarray(power, dtype=np.float64)
    cdef double[::1] e = np.ascontiguousarray(energy, dtype=np.float64)
    cdef cnp.int64_t[::1] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef cnp.int64_t[::1] dst = np.ascontiguousarray(dests, dtype=np.int64)
    cdef Py_ssize_t n = X.shape[0], nn = X.shape[1], n_pairs = src.shape[0]
    out_a = np.zeros((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_a
    p_a = np.empty((nn, nn), dtype=np.float64)
    emit_a = np.empty(nn, dtype=np.float64)
    total_a = np.empty(nn, dtype=np.float64)
    reach_a = np.empty((nn, hmax), dtype=np.float64)
    spent_a = np.empty((nn, hmax), dtype=np.float64)
    cdef double[:, ::1] p = p_a
    cdef double[::1] emit = emit_a
    cdef double[::1] total = total_a
    cdef double[:, ::1] reach = reach_a
    cdef double[:, ::1] spent = spent_a
    cdef Py_ssize_t r, i, j, k, h, q, s, d, last_d
    cdef double miss, acc, wij, missed, fd, fe
    with nogil:
        for r in range(n):
            _fill_link(X[r], a, pw, gamma, noise, kbits, emit, total, p)
            last_d = -1
            for q in range(n_pairs):
                s = src[q]
                d = dst[q]
                if d != last_d:
                    for i in range(nn):
                        reach[i, 0] = p[i, d] if i != d else 0.0
                        spent[i, 0] = 0.0
                    for h in range(1, hmax):
                        for i in range(nn):
                            miss = 1.0
                            acc = 0.0
                            for j in range(nn):
                                if j == i or j == d:
                                    continue
                                wij = p[i, j] * X[r, j]
                                if wij == 0.0:
                                    continue
                                miss *= 1.0 - wij * reach[j, h - 1]
                                acc += wij * (e[j] + spent[j, h - 1])
                            reach[i, h] = 1.0 - miss
                            spent[i, h] = acc
                    last_d = d
                missed = 1.0
                fd = 0.0
                fe = 0.0
                for h in range(hmax):
                    fd += <double>(h * h) * reach[s, h] * missed
                    missed *= 1.0 - reach[s, h]
                    fe += spent[s, h]
                out[r, 0] += missed
                out[r, 1] += fd
                out[r, 2] += fe
            for k in range(3):
                out[r, k] /= n_pairs
    return out_a
