"""Vectorised numpy implementations of the hot loops.

Every function here has a twin in ``_numba`` with the same signature and
semantics; the two are cross-checked in the test suite.
"""

import numpy as np


def count_matrix(fill, role, n_concepts, n_positions):
    fill = np.asarray(fill, dtype=np.int64).ravel()
    role = np.asarray(role, dtype=np.int64).ravel()
    flat = np.bincount(fill * n_positions + role, minlength=n_concepts * n_positions)
    return flat.reshape(n_concepts, n_positions).astype(np.int64)


def _entropy_rows(counts):
    counts = np.asarray(counts, dtype=np.float64)
    n_positions = counts.shape[-1]
    rowsum = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(rowsum > 0, counts / rowsum, 0.0)
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=-1) / np.log(n_positions)


def normalized_entropy_rows(counts):
    return _entropy_rows(counts)


def _objective_batch(batch, targets_cpl, target_blc, w_cpl, w_blc):
    # batch: (B, N, M)
    n_concepts = batch.shape[1]
    cpl = (batch > 0).sum(axis=1) / n_concepts
    rowsum = batch.sum(axis=2)
    total = rowsum.sum(axis=1)
    ent = _entropy_rows(batch)
    with np.errstate(divide="ignore", invalid="ignore"):
        blc = np.where(total > 0, (rowsum * ent).sum(axis=1) / total, 0.0)
    return w_cpl * np.abs(cpl - targets_cpl).sum(axis=1) + w_blc * np.abs(blc - target_blc)


def objective(counts, targets_cpl, target_blc, w_cpl, w_blc):
    batch = np.asarray(counts)[None]
    return float(_objective_batch(batch, np.asarray(targets_cpl), target_blc, w_cpl, w_blc)[0])


def swap_objectives(counts, rem_fill, rem_role, add_fill, add_role,
                    targets_cpl, target_blc, w_cpl, w_blc):
    base = np.array(counts, dtype=np.int64)
    np.subtract.at(base, (rem_fill, rem_role), 1)
    n_cand = add_fill.shape[0]
    batch = np.repeat(base[None], n_cand, axis=0)
    rows = np.repeat(np.arange(n_cand), add_fill.shape[1])
    np.add.at(batch, (rows, add_fill.ravel(), add_role.ravel()), 1)
    return _objective_batch(batch, np.asarray(targets_cpl), target_blc, w_cpl, w_blc)


def flip_objectives(counts, fill, role, targets_cpl, target_blc, w_cpl, w_blc):
    n_scenes = fill.shape[0]
    batch = np.repeat(np.asarray(counts, dtype=np.int64)[None], n_scenes, axis=0)
    idx = np.arange(n_scenes)
    a, b = fill[:, 0], fill[:, 1]
    ra, rb = role[:, 0], role[:, 1]
    np.subtract.at(batch, (idx, a, ra), 1)
    np.subtract.at(batch, (idx, b, rb), 1)
    np.add.at(batch, (idx, a, rb), 1)
    np.add.at(batch, (idx, b, ra), 1)
    return _objective_batch(batch, np.asarray(targets_cpl), target_blc, w_cpl, w_blc)


def ncc_scores(crops, kernels):
    n, g = crops.shape[0], kernels.shape[0]
    x = crops.reshape(n, -1).astype(np.float64)
    k = kernels.reshape(g, -1).astype(np.float64)
    x = x - x.mean(axis=1, keepdims=True)
    k = k - k.mean(axis=1, keepdims=True)
    xn = np.sqrt((x * x).sum(axis=1))
    kn = np.sqrt((k * k).sum(axis=1))
    denom = np.outer(xn, kn)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (x @ k.T) / denom
    out[~np.isfinite(out)] = 0.0
    out[denom < 1e-12] = 0.0
    return out
