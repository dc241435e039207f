"""Numeric hot kernels for the ML benchmarks.

Each kernel exists twice: a numba ``@njit`` build and a pure-numpy fallback.
Set ``MPBENCH_PURE_NUMPY=1`` to force the fallback (it is also selected
automatically when numba is unavailable). Both paths perform floating-point
accumulation in the same order, so their outputs are bitwise identical; and
every kernel treats rows independently, so computing a row subset yields
exactly the rows of the full computation. Those two properties are what let
the distributed ML benchmarks match their sequential baselines bit for bit.

``benchmarks/kernel_speed.py`` compares the two paths.
"""

import os

import numpy as np

__all__ = [
    "USE_NUMBA",
    "matmul_rows",
    "knn_predict",
    "kmeans_assign",
    "kmeans_accumulate",
]

USE_NUMBA = os.environ.get("MPBENCH_PURE_NUMPY", "").strip() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


def _matmul_rows_np(a, b):
    m, n = a.shape
    p = b.shape[1]
    out = np.zeros((m, p))
    for k in range(n):  # k-ordered accumulation, same as the jit triple loop
        out += a[:, k][:, None] * b[k][None, :]
    return out


def _matmul_rows_jit(a, b):
    m, n = a.shape
    p = b.shape[1]
    out = np.zeros((m, p))
    for i in range(m):
        for j in range(p):
            acc = 0.0
            for k in range(n):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def _sq_distances_np(points, refs):
    # (len(points), len(refs)) squared euclidean distances, feature-ordered sum
    out = np.zeros((points.shape[0], refs.shape[0]))
    for f in range(points.shape[1]):
        diff = points[:, f][:, None] - refs[:, f][None, :]
        out += diff * diff
    return out


def _knn_predict_np(train_x, train_y, test_x, k):
    dists = _sq_distances_np(test_x, train_x)
    preds = np.empty(test_x.shape[0], dtype=np.int64)
    for i in range(test_x.shape[0]):
        order = np.argsort(dists[i], kind="stable")[:k]  # ties -> lower index
        neigh = train_y[order]
        labels, votes = np.unique(neigh, return_counts=True)
        preds[i] = labels[np.argmax(votes)]  # vote ties -> smallest label
    return preds


def _knn_predict_jit(train_x, train_y, test_x, k):
    n_train, n_feat = train_x.shape
    preds = np.empty(test_x.shape[0], dtype=np.int64)
    best_d = np.empty(k)
    best_i = np.empty(k, dtype=np.int64)
    for i in range(test_x.shape[0]):
        filled = 0
        for j in range(n_train):
            d = 0.0
            for f in range(n_feat):
                diff = test_x[i, f] - train_x[j, f]
                d += diff * diff
            # insertion by (distance, train index); j ascending keeps ties stable
            if filled < k:
                pos = filled
                while pos > 0 and best_d[pos - 1] > d:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d
                best_i[pos] = j
                filled += 1
            elif d < best_d[k - 1]:
                pos = k - 1
                while pos > 0 and best_d[pos - 1] > d:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d
                best_i[pos] = j
        best_label = np.int64(0)
        best_votes = -1
        for a in range(filled):
            label = train_y[best_i[a]]
            votes = 0
            for b in range(filled):
                if train_y[best_i[b]] == label:
                    votes += 1
            if votes > best_votes or (votes == best_votes and label < best_label):
                best_votes = votes
                best_label = label
        preds[i] = best_label
    return preds


def _kmeans_assign_np(points, centroids):
    dists = _sq_distances_np(points, centroids)
    assign = np.argmin(dists, axis=1).astype(np.int64)  # ties -> lower centroid
    dmin = dists[np.arange(points.shape[0]), assign]
    return assign, dmin


def _kmeans_assign_jit(points, centroids):
    n, n_feat = points.shape
    k = centroids.shape[0]
    assign = np.empty(n, dtype=np.int64)
    dmin = np.empty(n)
    for i in range(n):
        best = 0
        best_d = np.inf
        for c in range(k):
            d = 0.0
            for f in range(n_feat):
                diff = points[i, f] - centroids[c, f]
                d += diff * diff
            if d < best_d:
                best_d = d
                best = c
        assign[i] = best
        dmin[i] = best_d
    return assign, dmin


def _kmeans_accumulate_np(points, assign, k):
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, assign, points)  # processes points in index order
    counts = np.bincount(assign, minlength=k).astype(np.int64)
    return sums, counts


def _kmeans_accumulate_jit(points, assign, k):
    n, n_feat = points.shape
    sums = np.zeros((k, n_feat))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        c = assign[i]
        counts[c] += 1
        for f in range(n_feat):
            sums[c, f] += points[i, f]
    return sums, counts


if USE_NUMBA:
    _jit = njit(cache=True)
    matmul_rows = _jit(_matmul_rows_jit)
    knn_predict = _jit(_knn_predict_jit)
    kmeans_assign = _jit(_kmeans_assign_jit)
    kmeans_accumulate = _jit(_kmeans_accumulate_jit)
else:
    matmul_rows = _matmul_rows_np
    knn_predict = _knn_predict_np
    kmeans_assign = _kmeans_assign_np
    kmeans_accumulate = _kmeans_accumulate_np
