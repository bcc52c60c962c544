"""Exact squared Euclidean distance transform (separable lower-envelope passes).

Each 1D pass computes, for every position ``q`` on a line,
``min_p  w2 * (q - p)**2 + f[p]`` with ``f`` the result of the previous pass.
With unit weights and integer inputs every output is an exact integer held in
a float64, so fields can be compared bit-for-bit against brute force.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _envelope(f, n, w2, out, v, z):
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            p = v[k]
            s = ((fq + w2 * q * q) - (f[p] + w2 * p * p)) / (2.0 * w2 * (q - p))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            out[q] = np.inf
        return
    j = 0
    for q in range(n):
        while z[j + 1] < q:
            j += 1
        d = q - v[j]
        out[q] = w2 * d * d + f[v[j]]


@njit(cache=True, nogil=True)
def squared_edt(sources, w2x, w2y, w2z):
    """Squared distance from every voxel to the nearest ``True`` voxel of ``sources``."""
    nx, ny, nz = sources.shape
    m = max(nx, max(ny, nz))
    dist = np.empty((nx, ny, nz), dtype=np.float64)
    f = np.empty(m, dtype=np.float64)
    out = np.empty(m, dtype=np.float64)
    v = np.empty(m, dtype=np.int64)
    z = np.empty(m + 1, dtype=np.float64)

    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                f[k] = 0.0 if sources[i, j, k] else np.inf
            _envelope(f, nz, w2z, out, v, z)
            for k in range(nz):
                dist[i, j, k] = out[k]
    for i in range(nx):
        for k in range(nz):
            for j in range(ny):
                f[j] = dist[i, j, k]
            _envelope(f, ny, w2y, out, v, z)
            for j in range(ny):
                dist[i, j, k] = out[j]
    for j in range(ny):
        for k in range(nz):
            for i in range(nx):
                f[i] = dist[i, j, k]
            _envelope(f, nx, w2x, out, v, z)
            for i in range(nx):
                dist[i, j, k] = out[i]
    return dist
