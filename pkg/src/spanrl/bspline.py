"""Clamped uniform B-spline bases on [0, 1].

A basis of degree ``k`` over ``N`` equal elements uses the open knot vector

    t = (0, ..., 0, 1/N, 2/N, ..., (N-1)/N, 1, ..., 1)

with the endpoint knots repeated ``k + 1`` times, giving ``N + k`` basis
functions.  Values come from the Cox-de Boor recursion; first derivatives from
the degree-lowering formula

    B'_{i,k}(x) = k * ( B_{i,k-1}(x) / (t[i+k] - t[i])
                      - B_{i+1,k-1}(x) / (t[i+k+1] - t[i+1]) )

with zero-width denominators contributing nothing.

Interval membership uses the half-open convention [t_i, t_{i+1}) with the
final nonempty interval closed, so evaluation is total on [0, 1].  For
degree 1 the derivative is discontinuous at knots; this implementation returns
the right-hand derivative there (left-hand at x = 1), which is what the
half-open convention yields naturally.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


class SplineBasis:
    """Degree-``degree`` clamped uniform basis with ``nelems`` elements."""

    def __init__(self, nelems: int, degree: int):
        if nelems < 1 or degree < 1:
            raise ValueError("nelems and degree must be >= 1")
        self.nelems = int(nelems)
        self.degree = int(degree)
        self.nbasis = self.nelems + self.degree
        k, n = self.degree, self.nelems
        interior = np.arange(1, n) / n
        self.knots = np.concatenate([np.zeros(k + 1), interior, np.ones(k + 1)])

        # Per-level reciprocal knot spans (0 where the span is empty) let the
        # recursion run as plain array arithmetic with no masking.
        t = self.knots
        self._recur = []
        for p in range(1, k + 1):
            m = t.shape[0] - 1 - p
            i = np.arange(m)
            d1 = t[i + p] - t[i]
            d2 = t[i + p + 1] - t[i + 1]
            inv1 = np.where(d1 > 0, 1.0 / np.where(d1 > 0, d1, 1.0), 0.0)
            inv2 = np.where(d2 > 0, 1.0 / np.where(d2 > 0, d2, 1.0), 0.0)
            self._recur.append((t[i].copy(), inv1, t[i + p + 1].copy(), inv2))

    def __repr__(self):
        return f"SplineBasis(nelems={self.nelems}, degree={self.degree})"

    def _check_domain(self, x: np.ndarray):
        if x.size and (x.min() < 0.0 or x.max() > 1.0):
            bad = x[(x < 0.0) | (x > 1.0)]
            raise DomainError(f"spline input outside [0, 1]: {bad[:4]}")

    def _level0(self, x: np.ndarray) -> np.ndarray:
        # Indicator of the containing element; uniform interior knots let us
        # index it directly instead of scanning intervals.
        n, k = self.nelems, self.degree
        elem = np.minimum((x * n).astype(np.int64), n - 1)
        b0 = np.zeros((x.shape[0], self.knots.shape[0] - 1))
        b0[np.arange(x.shape[0]), k + elem] = 1.0
        return b0

    def _tableau(self, x: np.ndarray, upto: int) -> np.ndarray:
        b = self._level0(x)
        xc = x[:, None]
        for p in range(1, upto + 1):
            t_lo, inv1, t_hi, inv2 = self._recur[p - 1]
            b = ((xc - t_lo) * inv1) * b[:, :-1] + ((t_hi - xc) * inv2) * b[:, 1:]
        return b

    def eval(self, x) -> np.ndarray:
        """Basis values at ``x``; shape ``(..., nbasis)`` matching the input."""
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        flat = np.atleast_1d(x).ravel()
        self._check_domain(flat)
        out = self._tableau(flat, self.degree)
        if scalar:
            return out[0]
        return out.reshape(x.shape + (self.nbasis,))

    def eval_deriv(self, x) -> np.ndarray:
        """First-derivative values at ``x``; same shape convention as eval."""
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        flat = np.atleast_1d(x).ravel()
        self._check_domain(flat)

        k = self.degree
        lower = self._tableau(flat, k - 1)  # degree k-1 values, nbasis+1 of them
        _, inv1, _, inv2 = self._recur[k - 1]  # same spans the last raise uses
        out = k * (lower[:, :-1] * inv1 - lower[:, 1:] * inv2)
        if scalar:
            return out[0]
        return out.reshape(x.shape + (self.nbasis,))
