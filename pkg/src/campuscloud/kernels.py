"""Hot numeric kernels: rendezvous score hashing and usage-ledger rollups.

Both kernels ship in two interchangeable implementations:

* a numba ``@njit`` version (default when numba imports cleanly), and
* a pure-numpy version vectorized across rows.

Selection is driven by the ``CAMPUSCLOUD_KERNELS`` environment variable:
``numba`` forces the JIT path (raising if numba is unavailable), ``numpy``
forces the fallback, anything else picks numba when present. The two paths
are bit-for-bit identical; tests compare them against a pure-Python
reference.
"""

from __future__ import annotations

import os

import numpy as np

FNV_OFFSET = np.uint64(14695981039346656037)
FNV_PRIME = np.uint64(1099511628211)

MIB = 1 << 20

_FLAG = os.environ.get("CAMPUSCLOUD_KERNELS", "").strip().lower()

if _FLAG == "numpy":
    _numba = None
else:
    try:
        import numba as _numba
    except ImportError:  # pragma: no cover - exercised only without numba
        _numba = None
        if _FLAG == "numba":
            raise

USING_NUMBA = _numba is not None


# --- FNV-1a-64 score hashing -------------------------------------------------
#
# Scores one key per row of a padded uint8 matrix. Arithmetic is uint64 with
# silent wraparound in both paths (numpy and numba agree on this for unsigned
# dtypes), which is exactly the mod-2^64 the hash requires.


def fnv1a64_scores_numpy(keys: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    n, width = keys.shape
    hashes = np.full(n, FNV_OFFSET, dtype=np.uint64)
    cols = keys.astype(np.uint64)
    for j in range(width):
        active = lengths > j
        mixed = (hashes ^ cols[:, j]) * FNV_PRIME
        hashes = np.where(active, mixed, hashes)
    return hashes


def _fnv1a64_scores_jit(keys, lengths):  # pragma: no cover - compiled body
    n = keys.shape[0]
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        h = FNV_OFFSET
        for j in range(lengths[i]):
            h = (h ^ np.uint64(keys[i, j])) * FNV_PRIME
        out[i] = h
    return out


# --- Usage-ledger rollup -----------------------------------------------------
#
# Entries are (tick, node index, bytes). A rollup sums ceil(bytes / MiB) per
# node over ticks in [from_tick, to_tick); billing is that times a flat rate.


def usage_rollup_numpy(
    ticks: np.ndarray, node_idx: np.ndarray, sizes: np.ndarray,
    from_tick: int, to_tick: int, n_nodes: int,
) -> np.ndarray:
    mask = (ticks >= from_tick) & (ticks < to_tick)
    mib_ticks = (sizes[mask] + (MIB - 1)) // MIB
    out = np.zeros(n_nodes, dtype=np.int64)
    np.add.at(out, node_idx[mask], mib_ticks)
    return out


def _usage_rollup_jit(ticks, node_idx, sizes, from_tick, to_tick, n_nodes):  # pragma: no cover
    out = np.zeros(n_nodes, dtype=np.int64)
    for i in range(ticks.shape[0]):
        t = ticks[i]
        if t >= from_tick and t < to_tick:
            out[node_idx[i]] += (sizes[i] + (MIB - 1)) // MIB
    return out


if USING_NUMBA:
    fnv1a64_scores_numba = _numba.njit(cache=True)(_fnv1a64_scores_jit)
    usage_rollup_numba = _numba.njit(cache=True)(_usage_rollup_jit)
    fnv1a64_scores = fnv1a64_scores_numba
    usage_rollup = usage_rollup_numba
else:
    fnv1a64_scores = fnv1a64_scores_numpy
    usage_rollup = usage_rollup_numpy


def encode_keys(keys: list[bytes]) -> tuple[np.ndarray, np.ndarray]:
    """Pack variable-length byte keys into the padded matrix the kernels take."""
    n = len(keys)
    lengths = np.fromiter((len(k) for k in keys), dtype=np.int64, count=n)
    width = int(lengths.max()) if n else 0
    mat = np.zeros((n, max(width, 1)), dtype=np.uint8)
    for i, key in enumerate(keys):
        mat[i, : len(key)] = np.frombuffer(key, dtype=np.uint8)
    return mat, lengths


def rendezvous_scores(node_ids: list[str], object_id: str) -> np.ndarray:
    """uint64 FNV-1a score of ``<node_id>:<object_id>`` for each node."""
    suffix = ":" + object_id
    mat, lengths = encode_keys([(nid + suffix).encode("utf-8") for nid in node_ids])
    return fnv1a64_scores(mat, lengths)
