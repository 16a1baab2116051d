"""Deterministic equivalents for conjugate-kernel resolvents.

A random layer Y = f(W X / sqrt(d) + B) + D acts on spectra through
three scalars derived from the rescaled activation ft(t) = f(st * t),
st^2 = sw2 * sx2 + sb2:

    a = |ft|^2 - (sw2 * sx2 / st^2) * zeta_1(ft)^2 + sd2,
    b = zeta_1(ft)^2 * sw2 / st^2,
    sy2 = |ft|^2 + sd2            (the output variance; a + b*sx2 = sy2).

The limiting kernel spectrum of the layer output is MP(gamma) boxtimes
(a + b * chi_in), and the equivalent resolvent matrix is assembled from
the companion fixed point l(z):

    G(z) = (l/z) (Sigma - l I)^{-1}          for an explicit covariance,
    K(z) = (l / (z b)) H((l - a) / b)        composed from the upstream
                                             equivalent resolvent map H.

Chaining the composition through several layers costs one fixed-point
solve per layer and a single evaluation of the base resolvent map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .freeconv import DEFAULT_CONFIG, FixedPointConfig, mp_boxtimes_stieltjes, mp_stieltjes_closed, solve_l
from .gauss_cov import max_norm
from .hermite import Activation, QuadratureRule, coeff_vector, default_rule, gaussian_norm_sq
from .measures import AffinePush, DiscreteMeasure, Measure, MpBoxtimes, dirac, esd_from_eigenvalues

if TYPE_CHECKING:
    from .netsim import NetworkSpec

DEFAULT_R_MAX = 20
B_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class LayerSpec:
    """Variance parameters of one random layer and its activation.

    gamma is the shape ratio n / d of the layer's kernel matrix.
    """

    sigma_w2: float
    sigma_b2: float
    sigma_d2: float
    f: Activation
    gamma: float

    def __post_init__(self):
        for name in ("sigma_w2", "sigma_b2", "sigma_d2", "gamma"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.sigma_w2 <= 0:
            raise ValueError("sigma_w2 must be positive")
        if self.sigma_b2 < 0 or self.sigma_d2 < 0:
            raise ValueError("bias and noise variances must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class LayerConstants:
    sigma_x2: float
    sigma_tilde2: float
    zeta: np.ndarray
    norm2: float
    a: float
    b: float
    sigma_y2: float

    def __post_init__(self):
        if self.a < -1e-10:
            raise ValueError(f"a must be nonnegative, got {self.a:.3e}")
        gap = abs(self.a + self.b * self.sigma_x2 - self.sigma_y2)
        if gap > 1e-8:
            raise ValueError(f"constants violate a + b*sx2 = sy2 by {gap:.3e}")


def layer_constants(
    spec: LayerSpec,
    sigma_x2: float,
    rule: QuadratureRule | None = None,
    r_max: int = DEFAULT_R_MAX,
) -> LayerConstants:
    """Scalar constants of one layer for input entry variance sigma_x2.

    The rescaled activation ft must have zero Gaussian mean; otherwise
    the error names the recentering shift to subtract.
    """
    sigma_x2 = float(sigma_x2)
    if sigma_x2 <= 0:
        raise ValueError("sigma_x2 must be positive")
    rule = default_rule() if rule is None else rule
    st2 = spec.sigma_w2 * sigma_x2 + spec.sigma_b2
    ft = spec.f.scaled(np.sqrt(st2))
    zeta = coeff_vector(ft, r_max, rule)
    if abs(zeta[0]) >= 1e-6:
        raise ValueError(
            f"rescaled activation {ft.name!r} is not Gaussian-centered "
            f"(zeta_0 = {zeta[0]:.3e}); use f.shifted({zeta[0]!r})"
        )
    norm2 = gaussian_norm_sq(ft, rule)
    z1 = zeta[1]
    if abs(z1) < B_ZERO_TOL:
        b = 0.0
    else:
        b = z1 * z1 * spec.sigma_w2 / st2
    a = norm2 - (spec.sigma_w2 * sigma_x2 / st2) * z1 * z1 + spec.sigma_d2
    if -1e-10 < a < 0:
        a = 0.0
    return LayerConstants(
        sigma_x2=sigma_x2,
        sigma_tilde2=st2,
        zeta=zeta,
        norm2=norm2,
        a=a,
        b=b,
        sigma_y2=norm2 + spec.sigma_d2,
    )


# ---------------------------------------------------------------------------
# Equivalent resolvent matrices


def _eigh_psd(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("Sigma must be square")
    if max_norm(sigma - sigma.T) > 1e-12 * max(1.0, max_norm(sigma)):
        raise ValueError("Sigma must be symmetric")
    lam, vec = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if lam[0] < -1e-10:
        raise ValueError(f"Sigma must be PSD; min eigenvalue {lam[0]:.3e}")
    return np.maximum(lam, 0.0), vec


def gbox_from_sigma(sigma, gamma: float, z: complex, cfg: FixedPointConfig = DEFAULT_CONFIG):
    """Equivalent resolvent G(z) = (l/z)(Sigma - l I)^{-1} for explicit Sigma."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the open upper half-plane")
    lam, vec = _eigh_psd(sigma)
    mu = esd_from_eigenvalues(lam)
    l = solve_l(mu, gamma, z, cfg).l
    core = (l / z) / (lam - l)
    return (vec * core) @ vec.T


def _scaled_mp_stieltjes(a: float, gamma: float, w: complex) -> complex:
    """Stieltjes transform of a * MP(gamma) (a >= 0) at w."""
    if a < B_ZERO_TOL:
        return -1.0 / w
    return mp_stieltjes_closed(gamma, w / a) / a


def gbox_composed(
    H: Callable[[complex], np.ndarray],
    tau: Measure,
    a: float,
    b: float,
    gamma: float,
    z: complex,
    cfg: FixedPointConfig = DEFAULT_CONFIG,
    n: int | None = None,
):
    """Compose the layer equivalent from the upstream resolvent map H.

    tau is the upstream spectral measure; a, b the layer constants.  For
    b = 0 the result is g_{a MP(gamma)}(z) I and H, tau are unused (n
    then fixes the matrix size).
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the open upper half-plane")
    if abs(b) < B_ZERO_TOL:
        if n is None:
            raise ValueError("n is required when b = 0")
        return _scaled_mp_stieltjes(a, gamma, z) * np.eye(n, dtype=complex)
    pushed = AffinePush(a, b, tau)
    l = solve_l(pushed, gamma, z, cfg).l
    w = (l - a) / b
    if w.imag <= 0:
        raise ArithmeticError(
            f"composed argument left the upper half-plane (Im = {w.imag:.3e})"
        )
    return (l / (z * b)) * np.asarray(H(w))


# ---------------------------------------------------------------------------
# Multi-layer chain


@dataclass(frozen=True)
class ChainLayer:
    constants: LayerConstants
    chi: Measure
    gbuilder: Callable[[complex], np.ndarray]
    gamma: float


@dataclass(frozen=True)
class EquivalentChain:
    """Per-layer limiting measures chi and equivalent resolvent builders.

    layers[k] describes layer k+1 of the network; chi0/g0 are the input
    kernel's spectral measure and resolvent map.
    """

    n: int
    chi0: Measure
    g0: Callable[[complex], np.ndarray]
    layers: tuple[ChainLayer, ...]

    @property
    def depth(self) -> int:
        return len(self.layers)


def _chain_builder(n, g0, consts, chis, upto):
    def build(z):
        z = complex(z)
        if z.imag <= 0:
            raise ValueError("z must lie in the open upper half-plane")
        coef = 1.0 + 0.0j
        w = z
        for j in range(upto - 1, -1, -1):
            const = consts[j]
            if const.b == 0.0:
                g = _scaled_mp_stieltjes(const.a, chis[j].gamma, w)
                return coef * g * np.eye(n, dtype=complex)
            l = chis[j].companion_l(w)
            coef *= l / (w * const.b)
            w = (l - const.a) / const.b
            if w.imag <= 0:
                raise ArithmeticError(
                    f"composed argument left the upper half-plane at layer {j + 1}"
                )
        return coef * np.asarray(g0(w))

    return build


def build_chain(
    net: "NetworkSpec",
    chi0: Measure,
    G0: Callable[[complex], np.ndarray],
    sigma_x2_0: float,
    rule: QuadratureRule | None = None,
    cfg: FixedPointConfig = DEFAULT_CONFIG,
    r_max: int = DEFAULT_R_MAX,
) -> EquivalentChain:
    """Layer-by-layer deterministic equivalents for a whole network.

    chi0 and G0 describe the input kernel (its spectral measure and
    resolvent map); sigma_x2_0 is the input entry variance.  Builders
    evaluate G0 once per z at the fully composed argument.
    """
    rule = default_rule() if rule is None else rule
    consts: list[LayerConstants] = []
    chis: list[MpBoxtimes] = []
    links: list[ChainLayer] = []
    sx2 = float(sigma_x2_0)
    prev: Measure = chi0
    for i, lspec in enumerate(net.layers, start=1):
        try:
            const = layer_constants(lspec, sx2, rule, r_max)
        except ValueError as ex:
            raise ValueError(f"layer {i}: {ex}") from ex
        base = dirac(const.a) if const.b == 0.0 else AffinePush(const.a, const.b, prev)
        chi = MpBoxtimes(lspec.gamma, base, solver=cfg)
        consts.append(const)
        chis.append(chi)
        links.append(
            ChainLayer(
                constants=const,
                chi=chi,
                gbuilder=_chain_builder(net.n, G0, consts[:], chis[:], i),
                gamma=lspec.gamma,
            )
        )
        prev = chi
        sx2 = const.sigma_y2
    return EquivalentChain(n=net.n, chi0=chi0, g0=G0, layers=tuple(links))


# ---------------------------------------------------------------------------
# Closed-form equicorrelated example


def _two_atom_measure(n: int, a: float, b: float) -> Measure:
    if b == 0.0:
        return dirac(a)
    alpha = a + b - b / n
    return DiscreteMeasure([alpha, alpha + b], [(n - 1) / n, 1.0 / n])


def equicorrelated_stieltjes(
    n: int, a: float, b: float, z: complex, cfg: FixedPointConfig = DEFAULT_CONFIG
) -> complex:
    """g of MP(1) boxtimes the two-atom linearized equicorrelated spectrum."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    return mp_boxtimes_stieltjes(_two_atom_measure(n, a, b), 1.0, complex(z), cfg)


def equicorrelated_equivalent(
    n: int, a: float, b: float, z: complex, cfg: FixedPointConfig = DEFAULT_CONFIG
):
    """Closed-form equivalent resolvent for equicorrelated inputs.

    The linearized covariance (a + b - b/n) I + (b/n) J has two
    eigenvalues, so the square-ratio fixed point reduces to a scalar g
    and G assembles from the identity and the rank-one all-ones matrix.
    Returns (g, G).
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the open upper half-plane")
    g = equicorrelated_stieltjes(n, a, b, z, cfg)
    alpha = a + b - b / n
    c1 = g * alpha + 1.0
    c2 = g * (alpha + b) + 1.0
    G = (-1.0 / (z * c1)) * np.eye(n, dtype=complex)
    G += (g * b / (z * c1 * c2 * n)) * np.ones((n, n), dtype=complex)
    return g, G
