"""Compiled inner loops (stack sweeps) shared by the estimator and the
Chernoff simulation."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def upper_hull(x, y):
    """Indices of the vertices of the least concave majorant of (x, y).

    ``x`` must be strictly increasing. A point lying on the chord of its
    neighbours is dropped, so consecutive slopes are strictly decreasing.
    """
    m = x.shape[0]
    stack = np.empty(m, np.int64)
    top = 0
    for i in range(m):
        while top >= 2:
            a = stack[top - 2]
            b = stack[top - 1]
            if (y[b] - y[a]) * (x[i] - x[a]) <= (y[i] - y[a]) * (x[b] - x[a]):
                top -= 1
            else:
                break
        stack[top] = i
        top += 1
    return stack[:top].copy()


@njit(cache=True)
def drifted_argmax(W, u, curvature, drifts):
    """Greatest maximiser of ``W[r] - curvature*u**2 + b*u`` for each path r
    and each drift coefficient b in the increasing array ``drifts``.

    Returns grid indices, shape (paths, len(drifts)). The maximiser for every
    drift is a vertex of the concave majorant of ``W - curvature*u**2``, so
    one sweep per path serves the whole drift grid.
    """
    n_paths, m = W.shape
    nd = drifts.shape[0]
    out = np.empty((n_paths, nd), np.int64)
    v = np.empty(m)
    stack = np.empty(m, np.int64)
    for r in range(n_paths):
        for i in range(m):
            v[i] = W[r, i] - curvature * u[i] * u[i]
        top = 0
        for i in range(m):
            while top >= 2:
                a = stack[top - 2]
                b = stack[top - 1]
                if (v[b] - v[a]) * (u[i] - u[a]) <= (v[i] - v[a]) * (u[b] - u[a]):
                    top -= 1
                else:
                    break
            stack[top] = i
            top += 1
        j = 0
        for k in range(nd):
            d = drifts[k]
            while j + 1 < top:
                a = stack[j]
                b = stack[j + 1]
                if (v[b] - v[a]) + d * (u[b] - u[a]) >= 0.0:
                    j += 1
                else:
                    break
            out[r, k] = stack[j]
    return out
