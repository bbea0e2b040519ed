"""Radial discretization near the knot.

Nodes are Legendre-Gauss-Lobatto points in t = log(rho), so functions that
behave like powers rho^p are smooth in t and differentiated spectrally.
Both endpoints are nodes, which gives direct access to boundary values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_legendre, roots_jacobi


def lgl_nodes(n: int):
    """LGL nodes and weights on [-1, 1] (n >= 2 points)."""
    if n < 2:
        raise ValueError("need at least two LGL nodes")
    inner = roots_jacobi(n - 2, 1.0, 1.0)[0] if n > 2 else np.empty(0)
    x = np.concatenate([[-1.0], np.sort(inner), [1.0]])
    w = 2.0 / (n * (n - 1) * eval_legendre(n - 1, x) ** 2)
    return x, w


def barycentric_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Spectral differentiation matrix for arbitrary distinct nodes."""
    n = x.size
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # barycentric weights via log-sums to avoid overflow
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(logw - logw.max())
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    d[np.diag_indices(n)] = -d.sum(axis=1)
    return d


@dataclass(frozen=True)
class RadialGrid:
    """LGL nodes in log(rho) on [rho_min, rho_max]."""

    rho_min: float
    rho_max: float
    n: int

    def __post_init__(self):
        if not (0 < self.rho_min < self.rho_max):
            raise ValueError("need 0 < rho_min < rho_max")
        x, w = lgl_nodes(self.n)
        half = 0.5 * np.log(self.rho_max / self.rho_min)
        t = np.log(self.rho_min) + (x + 1.0) * half
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "rho", np.exp(t))
        object.__setattr__(self, "t_weights", w * half)
        object.__setattr__(self, "dt", barycentric_diff_matrix(x) / half)

    @property
    def drho_weights(self) -> np.ndarray:
        """Weights for integrals f(rho) d rho."""
        return self.t_weights * self.rho

    def integrate(self, f, axis: int = -1):
        """int_{rho_min}^{rho_max} f d rho along ``axis``."""
        f = np.moveaxis(np.asarray(f), axis, -1)
        return f @ self.drho_weights

    def deriv(self, f, axis: int = -1):
        """d/d rho along ``axis``; constants differentiate to exact zero."""
        f = np.moveaxis(np.asarray(f), axis, -1)
        g = f - f[..., :1]
        out = (g @ self.dt.T) / self.rho
        return np.moveaxis(out, -1, axis)


class PowerSum:
    """Finite sum sum_i c_i rho^{p_i}; exact derivatives, products and tails."""

    def __init__(self, terms):
        merged: dict[float, complex] = {}
        for c, p in terms:
            merged[float(p)] = merged.get(float(p), 0.0) + complex(c)
        self.terms = [(c, p) for p, c in sorted(merged.items()) if c != 0]

    @staticmethod
    def zero() -> "PowerSum":
        return PowerSum([])

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.zeros(rho.shape, dtype=complex)
        for c, p in self.terms:
            out = out + c * rho ** p
        return out

    def deriv(self) -> "PowerSum":
        return PowerSum([(c * p, p - 1) for c, p in self.terms if p != 0])

    def conj(self) -> "PowerSum":
        return PowerSum([(np.conj(c), p) for c, p in self.terms])

    def __mul__(self, other):
        if isinstance(other, PowerSum):
            return PowerSum([(a * b, p + q) for a, p in self.terms for b, q in other.terms])
        return PowerSum([(a * other, p) for a, p in self.terms])

    __rmul__ = __mul__

    def __add__(self, other: "PowerSum") -> "PowerSum":
        return PowerSum(self.terms + other.terms)

    def shift(self, q: float) -> "PowerSum":
        """Multiply by rho^q."""
        return PowerSum([(c, p + q) for c, p in self.terms])

    def abs2(self) -> "PowerSum":
        return self.conj() * self

    def min_power(self) -> float:
        return min((p for _, p in self.terms), default=np.inf)

    def integral(self, lo: float, hi: float) -> complex:
        """Exact int_lo^hi; lo may be 0 when every power exceeds -1."""
        total = 0j
        for c, p in self.terms:
            if abs(p + 1) < 1e-14:
                if lo <= 0:
                    raise ValueError("divergent integral at rho = 0")
                total += c * np.log(hi / lo)
            else:
                if lo <= 0 and p <= -1:
                    raise ValueError("divergent integral at rho = 0")
                total += c * (hi ** (p + 1) - (lo ** (p + 1) if lo > 0 else 0.0)) / (p + 1)
        return total
