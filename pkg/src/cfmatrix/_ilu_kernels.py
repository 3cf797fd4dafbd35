"""Numba kernels for the zero-fill incomplete LU factorization.

The factorization runs in place on the CSR value array (pattern of the input,
no fill).  Strictly-lower entries hold L (unit diagonal implied), the rest
holds U.  Kernels are dtype-generic; numba specializes for real and complex.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def ilu0_factor(indptr, indices, data, diagptr):
    """IKJ in-place ILU(0); returns the row of the first zero pivot, or -1."""
    n = len(indptr) - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = p
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            if k >= i:
                break
            piv = data[diagptr[k]]
            if piv == 0:
                return k
            lik = data[p] / piv
            data[p] = lik
            for q in range(diagptr[k] + 1, indptr[k + 1]):
                pj = pos[indices[q]]
                if pj != -1:
                    data[pj] -= lik * data[q]
        if data[diagptr[i]] == 0:
            return i
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = -1
    return -1


@njit(cache=True)
def ilu0_solve(indptr, indices, data, diagptr, b, out):
    """Forward (unit lower) then backward (upper) substitution on the factors."""
    n = len(indptr) - 1
    for i in range(n):
        s = b[i]
        for p in range(indptr[i], diagptr[i]):
            s -= data[p] * out[indices[p]]
        out[i] = s
    for i in range(n - 1, -1, -1):
        s = out[i]
        for p in range(diagptr[i] + 1, indptr[i + 1]):
            s -= data[p] * out[indices[p]]
        out[i] = s / data[diagptr[i]]
    return out
