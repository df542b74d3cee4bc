"""numba-compiled twins of the kernels in ``_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True)
def _count_matrix(f, r, n_concepts, n_positions):
    out = np.zeros((n_concepts, n_positions), dtype=np.int64)
    for i in range(f.shape[0]):
        out[f[i], r[i]] += 1
    return out


def count_matrix(fill, role, n_concepts, n_positions):
    f = np.ascontiguousarray(fill, dtype=np.int64).ravel()
    r = np.ascontiguousarray(role, dtype=np.int64).ravel()
    return _count_matrix(f, r, int(n_concepts), int(n_positions))


@njit(cache=True)
def _row_entropy(counts, c, log_m):
    total = 0
    for m in range(counts.shape[1]):
        total += counts[c, m]
    if total == 0:
        return 0.0, 0
    h = 0.0
    for m in range(counts.shape[1]):
        v = counts[c, m]
        if v > 0:
            p = v / total
            h -= p * np.log(p)
    return h / log_m, total


@njit(cache=True)
def _normalized_entropy_rows(counts):
    n = counts.shape[0]
    out = np.zeros(n, dtype=np.float64)
    log_m = np.log(counts.shape[1])
    for c in range(n):
        out[c] = _row_entropy(counts, c, log_m)[0]
    return out


def normalized_entropy_rows(counts):
    return _normalized_entropy_rows(np.ascontiguousarray(counts, dtype=np.int64))


@njit(cache=True)
def _objective(counts, targets_cpl, target_blc, w_cpl, w_blc):
    n_concepts, n_positions = counts.shape
    log_m = np.log(n_positions)
    dev = 0.0
    for m in range(n_positions):
        seen = 0
        for c in range(n_concepts):
            if counts[c, m] > 0:
                seen += 1
        dev += abs(seen / n_concepts - targets_cpl[m])
    weighted = 0.0
    grand = 0
    for c in range(n_concepts):
        h, tot = _row_entropy(counts, c, log_m)
        weighted += tot * h
        grand += tot
    blc = weighted / grand if grand > 0 else 0.0
    return w_cpl * dev + w_blc * abs(blc - target_blc)


def objective(counts, targets_cpl, target_blc, w_cpl, w_blc):
    return float(_objective(np.ascontiguousarray(counts, dtype=np.int64),
                            np.asarray(targets_cpl, dtype=np.float64),
                            float(target_blc), float(w_cpl), float(w_blc)))


@njit(cache=True)
def _swap_objectives(counts, rem_fill, rem_role, add_fill, add_role,
                     targets_cpl, target_blc, w_cpl, w_blc):
    work = counts.copy()
    for k in range(rem_fill.shape[0]):
        work[rem_fill[k], rem_role[k]] -= 1
    n_cand, arity = add_fill.shape
    out = np.empty(n_cand, dtype=np.float64)
    for j in range(n_cand):
        for k in range(arity):
            work[add_fill[j, k], add_role[j, k]] += 1
        out[j] = _objective(work, targets_cpl, target_blc, w_cpl, w_blc)
        for k in range(arity):
            work[add_fill[j, k], add_role[j, k]] -= 1
    return out


def swap_objectives(counts, rem_fill, rem_role, add_fill, add_role,
                    targets_cpl, target_blc, w_cpl, w_blc):
    return _swap_objectives(np.ascontiguousarray(counts, dtype=np.int64),
                            np.ascontiguousarray(rem_fill, dtype=np.int64),
                            np.ascontiguousarray(rem_role, dtype=np.int64),
                            np.ascontiguousarray(add_fill, dtype=np.int64),
                            np.ascontiguousarray(add_role, dtype=np.int64),
                            np.asarray(targets_cpl, dtype=np.float64),
                            float(target_blc), float(w_cpl), float(w_blc))


@njit(cache=True)
def _flip_objectives(counts, fill, role, targets_cpl, target_blc, w_cpl, w_blc):
    work = counts.copy()
    n = fill.shape[0]
    out = np.empty(n, dtype=np.float64)
    for s in range(n):
        a, b = fill[s, 0], fill[s, 1]
        ra, rb = role[s, 0], role[s, 1]
        work[a, ra] -= 1
        work[b, rb] -= 1
        work[a, rb] += 1
        work[b, ra] += 1
        out[s] = _objective(work, targets_cpl, target_blc, w_cpl, w_blc)
        work[a, rb] -= 1
        work[b, ra] -= 1
        work[a, ra] += 1
        work[b, rb] += 1
    return out


def flip_objectives(counts, fill, role, targets_cpl, target_blc, w_cpl, w_blc):
    return _flip_objectives(np.ascontiguousarray(counts, dtype=np.int64),
                            np.ascontiguousarray(fill, dtype=np.int64),
                            np.ascontiguousarray(role, dtype=np.int64),
                            np.asarray(targets_cpl, dtype=np.float64),
                            float(target_blc), float(w_cpl), float(w_blc))


@njit(cache=True)
def _center_rows(x):
    n, d = x.shape
    xc = np.empty_like(x)
    norms = np.empty(n)
    for i in range(n):
        mu = 0.0
        for t in range(d):
            mu += x[i, t]
        mu /= d
        s = 0.0
        for t in range(d):
            v = x[i, t] - mu
            xc[i, t] = v
            s += v * v
        norms[i] = np.sqrt(s)
    return xc, norms


@njit(cache=True)
def _scale_scores(dots, xn, kn):
    n, g = dots.shape
    out = np.zeros((n, g))
    for i in range(n):
        for j in range(g):
            denom = xn[i] * kn[j]
            if denom >= 1e-12:
                out[i, j] = dots[i, j] / denom
    return out


def ncc_scores(crops, kernels):
    n, g = crops.shape[0], kernels.shape[0]
    x = np.ascontiguousarray(crops.reshape(n, -1), dtype=np.float64)
    k = np.ascontiguousarray(kernels.reshape(g, -1), dtype=np.float64)
    xc, xn = _center_rows(x)
    kc, kn = _center_rows(k)
    # the cross term is a plain GEMM; numpy's BLAS beats a compiled triple loop
    return _scale_scores(xc @ kc.T, xn, kn)
