"""Compiled row-reduction kernels over F_p (p < 2^31).

Rows are CSR triples ``(ptr, cols, vals)`` with int64 values in ``[0, p)``.
Pivot rows must be monic at their first column.  Products of two residues
stay below 2^62, so every update is a single ``(a + f*b) % p`` in int64.
"""

import numba
import numpy as np
from numba import njit, prange

# TBB is probed first by default and warns when too old; omp is thread-safe
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

CHUNK = 256
# int64 entries per dense scratch block
DENSE_BUDGET = 1 << 22


@njit(parallel=True, cache=True)
def _reduce_chunk(start, stop, ncols, ptr, cols, vals,
                  piv_of_col, pptr, pcols, pvals, p, skip_lead):
    n = stop - start
    dense = np.zeros((n, ncols), dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for t in prange(n):
        r = start + t
        acc = dense[t]
        first = ncols
        for q in range(ptr[r], ptr[r + 1]):
            c = cols[q]
            acc[c] = vals[q]
            if c < first:
                first = c
        if skip_lead:
            first += 1
        for c in range(first, ncols):
            v = acc[c]
            if v != 0:
                pr = piv_of_col[c]
                if pr >= 0:
                    f = p - v
                    for q in range(pptr[pr], pptr[pr + 1]):
                        cc = pcols[q]
                        acc[cc] = (acc[cc] + f * pvals[q]) % p
        k = 0
        for c in range(ncols):
            if acc[c] != 0:
                k += 1
        counts[t] = k
    optr = np.zeros(n + 1, dtype=np.int64)
    for t in range(n):
        optr[t + 1] = optr[t] + counts[t]
    ocols = np.empty(optr[n], dtype=np.int64)
    ovals = np.empty(optr[n], dtype=np.int64)
    for t in prange(n):
        acc = dense[t]
        k = optr[t]
        for c in range(ncols):
            if acc[c] != 0:
                ocols[k] = c
                ovals[k] = acc[c]
                k += 1
    return optr, ocols, ovals


def reduce_by_pivots(ncols, ptr, cols, vals, piv_of_col, pptr, pcols, pvals, p,
                     skip_lead=False):
    """Reduce every row by the known pivot rows (independent per row).

    With ``skip_lead`` the first entry of each row is kept as is and only the
    remaining columns are reduced (tail reduction).
    """
    nrows = len(ptr) - 1
    outs = []
    step = max(16, min(CHUNK, DENSE_BUDGET // max(1, ncols)))
    for start in range(0, nrows, step):
        stop = min(nrows, start + step)
        outs.append(_reduce_chunk(start, stop, ncols, ptr, cols, vals,
                                  piv_of_col, pptr, pcols, pvals, p, skip_lead))
    return _concat(outs, nrows)


def _concat(outs, nrows):
    if not outs:
        return (np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=np.int64))
    ptrs, offset = [np.zeros(1, dtype=np.int64)], 0
    for optr, _, _ in outs:
        ptrs.append(optr[1:] + offset)
        offset += optr[-1]
    return (np.concatenate(ptrs), np.concatenate([o[1] for o in outs]),
            np.concatenate([o[2] for o in outs]))


@njit(cache=True)
def echelon(ncols, ptr, cols, vals, p):
    """Sequential row echelon form of the given rows.

    Row ``i`` is reduced by the pivots created by rows ``< i``; a nonzero
    result is normalised to be monic and becomes the pivot of its first
    column.  Returns CSR of the results (empty range = zero row).
    """
    nrows = len(ptr) - 1
    newpiv = np.full(ncols, -1, dtype=np.int64)
    cap = max(64, 2 * len(cols))
    ocols = np.empty(cap, dtype=np.int64)
    ovals = np.empty(cap, dtype=np.int64)
    optr = np.zeros(nrows + 1, dtype=np.int64)
    acc = np.zeros(ncols, dtype=np.int64)
    nnz = 0
    for r in range(nrows):
        first = ncols
        for q in range(ptr[r], ptr[r + 1]):
            c = cols[q]
            acc[c] = vals[q]
            if c < first:
                first = c
        lead = -1
        for c in range(first, ncols):
            v = acc[c]
            if v == 0:
                continue
            pr = newpiv[c]
            if pr >= 0:
                f = p - v
                for q in range(optr[pr], optr[pr + 1]):
                    cc = ocols[q]
                    acc[cc] = (acc[cc] + f * ovals[q]) % p
            elif lead < 0:
                lead = c
        if lead < 0:
            optr[r + 1] = nnz
            continue
        # modular inverse of the lead coefficient
        a = acc[lead]
        inv = 1
        e = p - 2
        b = a
        while e > 0:
            if e & 1:
                inv = inv * b % p
            b = b * b % p
            e >>= 1
        k = 0
        for c in range(lead, ncols):
            if acc[c] != 0:
                k += 1
        if nnz + k > cap:
            while nnz + k > cap:
                cap *= 2
            nc = np.empty(cap, dtype=np.int64)
            nv = np.empty(cap, dtype=np.int64)
            nc[:nnz] = ocols[:nnz]
            nv[:nnz] = ovals[:nnz]
            ocols = nc
            ovals = nv
        for c in range(lead, ncols):
            v = acc[c]
            if v != 0:
                ocols[nnz] = c
                ovals[nnz] = v * inv % p
                nnz += 1
                acc[c] = 0
        optr[r + 1] = nnz
        newpiv[lead] = r
    return optr, ocols[:nnz].copy(), ovals[:nnz].copy()
