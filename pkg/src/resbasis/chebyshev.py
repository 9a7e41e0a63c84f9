"""Chebyshev-Gauss-Lobatto collocation helpers on an interval ``[a, b]``."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct


def lobatto_grid(a: float, b: float, N: int):
    """Nodes ``r_0 = a < ... < r_N = b`` and the first-derivative matrix.

    Uses the classical explicit formula for the differentiation matrix with
    the negative-sum trick on the diagonal.
    """
    if N < 2:
        raise ValueError("need at least 3 collocation points")
    j = np.arange(N + 1)
    t = -np.cos(np.pi * j / N)  # ascending in [-1, 1]
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dt = t[:, None] - t[None, :]
    D = np.outer(c, 1.0 / c) / (dt + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), D / half


class ChebSeries:
    """Chebyshev interpolant of values sampled on :func:`lobatto_grid` nodes.

    ``values`` may be one- or two-dimensional; with two dimensions each row
    is a separate function.
    """

    def __init__(self, a: float, b: float, values):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        N = values.shape[1] - 1
        # reversed order puts the samples at cos(pi k / N), k = 0..N
        coef = dct(values[:, ::-1], type=1, axis=1) / N
        coef[:, 0] *= 0.5
        coef[:, -1] *= 0.5
        self.a, self.b = float(a), float(b)
        self.coef = coef

    def _t(self, r):
        return (2.0 * np.asarray(r, dtype=float) - (self.a + self.b)) / (self.b - self.a)

    def __call__(self, r, derivative: int = 0):
        """Evaluate all rows (or their ``derivative``-th r-derivative) at ``r``."""
        coef = self.coef
        if derivative:
            coef = C.chebder(coef, m=derivative, axis=1) * (2.0 / (self.b - self.a)) ** derivative
        return C.chebval(self._t(r), coef.T)
