"""Numeric inner loops for metric computation.

The longest-common-subsequence table dominates evaluation runtime (O(n*m)
per summary pair, with token sequences routinely in the thousands), so it is
JIT-compiled with numba. A pure-numpy row-vectorized fallback is kept for
environments without numba; set HCSUM_NO_NUMBA=1 to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE_FLAG = os.environ.get("HCSUM_NO_NUMBA", "").lower() in ("1", "true", "yes")

try:
    from numba import njit

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _HAS_NUMBA = False


def _lcs_len_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """LCS length via a row-vectorized dynamic program.

    Row recurrence: with t[j] = max(prev[j], prev[j-1] + eq(i,j)), the row is
    cur[j] = max(t[j], cur[j-1]), i.e. a running maximum of t.
    """
    if a.size == 0 or b.size == 0:
        return 0
    prev = np.zeros(b.size + 1, dtype=np.int64)
    cur = np.zeros(b.size + 1, dtype=np.int64)
    for i in range(a.size):
        eq = (b == a[i]).astype(np.int64)
        np.maximum(prev[1:], prev[:-1] + eq, out=cur[1:])
        np.maximum.accumulate(cur[1:], out=cur[1:])
        prev, cur = cur, prev
    return int(prev[-1])


if _HAS_NUMBA:

    @njit(cache=True)
    def _lcs_len_numba(a, b):  # pragma: no cover - covered via dispatch tests
        n = b.size
        prev = np.zeros(n + 1, dtype=np.int64)
        cur = np.zeros(n + 1, dtype=np.int64)
        for i in range(a.size):
            ai = a[i]
            for j in range(1, n + 1):
                if b[j - 1] == ai:
                    cur[j] = prev[j - 1] + 1
                elif prev[j] >= cur[j - 1]:
                    cur[j] = prev[j]
                else:
                    cur[j] = cur[j - 1]
            prev, cur = cur, prev
        return prev[n]


def using_numba() -> bool:
    """True when the numba kernel is active (installed and not disabled)."""
    return _HAS_NUMBA and not _DISABLE_FLAG


def lcs_length(a: np.ndarray, b: np.ndarray) -> int:
    """Length of the longest common subsequence of two int id arrays."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return 0
    if using_numba():
        return int(_lcs_len_numba(a, b))
    return _lcs_len_numpy(a, b)
