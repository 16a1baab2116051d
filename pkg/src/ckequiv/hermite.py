"""Hermite polynomials, Gaussian quadrature and activation coefficients.

Conventions
-----------
All Gaussian integrals are taken against the standard normal weight,
``E[g(N)]`` with ``N ~ N(0, 1)``.  The polynomials ``h_r`` are the monic
(probabilists') Hermite polynomials,

    h_0(t) = 1,   h_1(t) = t,   h_{r+1}(t) = t h_r(t) - r h_{r-1}(t),

and ``hh_r = h_r / sqrt(r!)`` are orthonormal for the Gaussian inner
product.  A quadrature rule here is normalized so that ``sum(weights) = 1``
and ``sum(weights * g(nodes))`` approximates ``E[g(N)]``.

The coefficient of an activation ``f`` in the orthonormal basis is

    zeta_r(f) = E[f(N) hh_r(N)],

so ``E[f(N)^2] = sum_r zeta_r(f)^2`` (Parseval).  For dilations
``f_sigma(t) = f(sigma t)`` the helper ``psi`` computes

    Psi_r(sigma) = sigma^{-r} E[f(sigma N) h_r(N)],

which satisfies ``Psi_r'(sigma) = sigma Psi_{r+2}(sigma)`` and links the
coefficients of ``f`` and ``f_sigma`` through
``zeta_r(f_sigma) = sigma^r Psi_r(sigma) / sqrt(r!)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

MAX_DEGREE = 64


class DegreeOverflowError(ValueError):
    """Requested Hermite degree exceeds the supported range."""


def _check_degree(r: int) -> int:
    r = int(r)
    if r < 0 or r > MAX_DEGREE:
        raise DegreeOverflowError(f"degree {r} outside [0, {MAX_DEGREE}]")
    return r


def _hermite_all(r_max: int, t: np.ndarray) -> np.ndarray:
    """Values of the monic h_0 .. h_{r_max} at t, stacked as rows."""
    t = np.asarray(t, dtype=float)
    out = np.empty((r_max + 1,) + t.shape)
    out[0] = 1.0
    if r_max >= 1:
        out[1] = t
    for r in range(1, r_max):
        out[r + 1] = t * out[r] - r * out[r - 1]
    return out


def hermite_h(r: int, t):
    """Monic Hermite polynomial h_r evaluated at t (scalar or array)."""
    r = _check_degree(r)
    t = np.asarray(t, dtype=float)
    vals = _hermite_all(r, t)[r]
    return vals if t.shape else float(vals)


def hermite_normalized(r: int, t):
    """Orthonormal Hermite polynomial h_r / sqrt(r!) at t."""
    r = _check_degree(r)
    return hermite_h(r, t) / math.sqrt(math.factorial(r))


@dataclass(frozen=True)
class QuadratureRule:
    """Gaussian quadrature against the standard normal weight.

    ``sum(weights) == 1`` and ``nodes`` are symmetric about zero, so odd
    moments vanish identically.  Exact for polynomials of degree
    ``< 2 * len(nodes)``.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n, w = self.nodes, self.weights
        if n.shape != w.shape or n.ndim != 1:
            raise ValueError("nodes and weights must be aligned 1-d arrays")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("quadrature weights must sum to 1")
        if abs(float(w @ n)) > 1e-10 or abs(float(w @ n**2) - 1.0) > 1e-10:
            raise ValueError("quadrature rule fails Gaussian moment checks")

    def expect(self, values: np.ndarray) -> float:
        """E[g(N)] for g given by its values at the nodes."""
        return float(self.weights @ values)


def make_rule(m: int) -> QuadratureRule:
    """Gauss-Hermite rule with m nodes for the standard normal weight.

    Nodes and weights come from the symmetric, tridiagonal Jacobi matrix of
    the monic Hermite recurrence (zero diagonal, off-diagonal sqrt(k)); the
    eigenvalues are the nodes and the squared first eigenvector components
    are the weights.  Nodes are symmetrized in pairs so that odd moments
    cancel exactly.
    """
    m = int(m)
    if m < 1 or m > 512:
        raise ValueError(f"node count {m} outside [1, 512]")
    if m == 1:
        return QuadratureRule(np.zeros(1), np.ones(1))
    off = np.sqrt(np.arange(1.0, m))
    nodes, vecs = eigh_tridiagonal(np.zeros(m), off)
    weights = vecs[0] ** 2
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    # first eigenvector components of the outermost nodes underflow to exact
    # zero for large m; such nodes carry no mass and are dropped
    keep = weights > 0.0
    nodes, weights = nodes[keep], weights[keep]
    weights = weights / weights.sum()
    return QuadratureRule(nodes, weights)


DEFAULT_NODES = 128


def default_rule() -> QuadratureRule:
    return make_rule(DEFAULT_NODES)


# ---------------------------------------------------------------------------
# Activations


@dataclass(frozen=True)
class Activation:
    """Scalar function applied entrywise, with a known Lipschitz bound.

    ``fn`` must accept and return float arrays and be defined for every
    real argument.  Derived activations (input scaling, output shift) keep
    track of the bound.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz_bound: float = 1.0

    def __post_init__(self):
        if not (self.lipschitz_bound > 0):
            raise ValueError("lipschitz_bound must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.fn(t), dtype=float)
        if out.shape != t.shape:
            raise ValueError(f"activation {self.name!r} changed input shape")
        return out

    def scaled(self, scale: float) -> "Activation":
        """The dilation t -> f(scale * t)."""
        scale = float(scale)
        if scale == 0.0:
            raise ValueError("scale must be nonzero")
        base = self.fn
        return Activation(
            name=f"{self.name}@x{scale:g}",
            fn=lambda t, _s=scale, _f=base: _f(_s * t),
            lipschitz_bound=self.lipschitz_bound * abs(scale),
        )

    def shifted(self, offset: float) -> "Activation":
        """The recentering t -> f(t) - offset."""
        offset = float(offset)
        base = self.fn
        return Activation(
            name=f"{self.name}-{offset:g}",
            fn=lambda t, _c=offset, _f=base: _f(t) - _c,
            lipschitz_bound=self.lipschitz_bound,
        )


def identity_activation() -> Activation:
    return Activation("identity", lambda t: t, 1.0)


def tanh_activation() -> Activation:
    return Activation("tanh", np.tanh, 1.0)


def centered_relu() -> Activation:
    """max(t, 0) recentered to zero Gaussian mean (subtract 1/sqrt(2 pi))."""
    c = 1.0 / math.sqrt(2.0 * math.pi)
    return Activation("centered-relu", lambda t: np.maximum(t, 0.0) - c, 1.0)


def hermite2_activation() -> Activation:
    """(t^2 - 1)/sqrt(2), the normalized second Hermite polynomial.

    A purely nonlinear activation: its first coefficient vanishes at unit
    input scale, which kills the linear covariance term entirely.
    """
    return Activation("hermite2", lambda t: (t * t - 1.0) / math.sqrt(2.0), 1.0)


def table_activation(ts, ys, name: str = "table") -> Activation:
    """Piecewise-linear interpolant through (ts, ys), clamped outside."""
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ts.ndim != 1 or ts.shape != ys.shape or ts.size < 2:
        raise ValueError("need aligned 1-d sample arrays with >= 2 points")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("sample abscissae must be strictly increasing")
    lip = float(np.max(np.abs(np.diff(ys) / np.diff(ts))))
    return Activation(name, lambda t: np.interp(t, ts, ys), max(lip, 1e-300))


ACTIVATIONS = {
    "identity": identity_activation,
    "tanh": tanh_activation,
    "centered-relu": centered_relu,
    "hermite2": hermite2_activation,
}


def activation_by_name(name: str) -> Activation:
    try:
        return ACTIVATIONS[name]()
    except KeyError:
        raise ValueError(
            f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}"
        ) from None


# ---------------------------------------------------------------------------
# Coefficients


def hermite_coeff(f: Activation, r: int, rule: QuadratureRule) -> float:
    """zeta_r(f) = E[f(N) hh_r(N)] by quadrature."""
    r = _check_degree(r)
    hh = hermite_h(r, rule.nodes) / math.sqrt(math.factorial(r))
    return float(rule.weights @ (f(rule.nodes) * hh))


def coeff_vector(f: Activation, r_max: int, rule: QuadratureRule) -> np.ndarray:
    """zeta_0(f) .. zeta_{r_max}(f) in one pass over the nodes."""
    r_max = _check_degree(r_max)
    hmat = _hermite_all(r_max, rule.nodes)
    norms = np.array([math.sqrt(math.factorial(r)) for r in range(r_max + 1)])
    return (hmat @ (rule.weights * f(rule.nodes))) / norms


def gaussian_norm_sq(f: Activation, rule: QuadratureRule) -> float:
    """||f||^2 = E[f(N)^2]."""
    vals = f(rule.nodes)
    return float(rule.weights @ vals**2)


def psi(f: Activation, r: int, sigma: float, rule: QuadratureRule) -> float:
    """Psi_r(sigma) = sigma^{-r} E[f(sigma N) h_r(N)] (monic h_r)."""
    r = _check_degree(r)
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    vals = f(sigma * rule.nodes) * hermite_h(r, rule.nodes)
    return float(rule.weights @ vals) / sigma**r


def scaled_coeff(f: Activation, sigma: float, r: int, rule: QuadratureRule) -> float:
    """zeta_r of the dilation t -> f(sigma t)."""
    r = _check_degree(r)
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    hh = hermite_h(r, rule.nodes) / math.sqrt(math.factorial(r))
    return float(rule.weights @ (f(sigma * rule.nodes) * hh))
