"""Monte Carlo ground truth for random-network kernel spectra.

Samples the network X -> f(W X / sqrt(d) + B) + D layer by layer,
forms the conjugate kernel K = Y^T Y / d at every depth, and extracts
the quantities the deterministic theory predicts: eigenvalues,
resolvents, empirical Stieltjes transforms, and the deviation stats of
K from a multiple of the identity.

Randomness is fanned out from one master seed into independent
substreams keyed by (layer, role), so enlarging the evaluation grid or
adding probes never changes the sampled network.
"""

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .detequiv import LayerSpec
from .hermite import default_rule, gaussian_norm_sq

_ROLES = {"X": 0, "W": 1, "B": 2, "D": 3}


def stream(master_seed: int, layer: int, role: str) -> np.random.Generator:
    """Independent generator for one random matrix of the network."""
    if role not in _ROLES:
        raise ValueError(f"unknown role {role!r}; expected one of {sorted(_ROLES)}")
    seq = np.random.SeedSequence([int(master_seed), int(layer), _ROLES[role]])
    return np.random.default_rng(seq)


def sample_gaussian(rows: int, cols: int, variance: float, rng: np.random.Generator):
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if variance == 0.0:
        return np.zeros((rows, cols))
    return math.sqrt(variance) * rng.standard_normal((rows, cols))


# ---------------------------------------------------------------------------
# Input data models


@dataclass(frozen=True)
class IidData:
    """Input matrix with i.i.d. centered Gaussian entries."""

    sigma_x2: float = 1.0

    def __post_init__(self):
        if not (self.sigma_x2 > 0):
            raise ValueError("sigma_x2 must be positive")

    def materialize(self, d0: int, n: int, rng) -> np.ndarray:
        return sample_gaussian(d0, n, self.sigma_x2, rng)

    def input_variance(self) -> float:
        return self.sigma_x2


@dataclass(frozen=True)
class EquicorrelatedData:
    """Deterministic input whose kernel is exactly S = I + (J - I)/n.

    Realized as X = sqrt(n) S^{1/2} with the closed-form square root of
    the rank-one update; requires d0 = n.
    """

    def materialize(self, d0: int, n: int, rng) -> np.ndarray:
        if d0 != n:
            raise ValueError("equicorrelated data needs d0 = n")
        lo = math.sqrt(1.0 - 1.0 / n)
        hi = math.sqrt(2.0 - 1.0 / n)
        root = lo * np.eye(n) + (hi - lo) / n * np.ones((n, n))
        return math.sqrt(n) * root

    def input_variance(self) -> float:
        return 1.0


@dataclass(frozen=True)
class ExplicitData:
    """A fixed input matrix supplied by the caller."""

    x0: np.ndarray

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        if x0.ndim != 2:
            raise ValueError("x0 must be a matrix")
        object.__setattr__(self, "x0", x0)

    def materialize(self, d0: int, n: int, rng) -> np.ndarray:
        if self.x0.shape != (d0, n):
            raise ValueError(f"x0 has shape {self.x0.shape}, expected {(d0, n)}")
        return self.x0.copy()

    def input_variance(self) -> float:
        d0 = self.x0.shape[0]
        return float(np.mean(np.einsum("ij,ij->j", self.x0, self.x0)) / d0)


DataModel = Union[IidData, EquicorrelatedData, ExplicitData]


@dataclass(frozen=True)
class NetworkSpec:
    n: int
    d0: int
    dims: tuple
    data: DataModel
    layers: tuple

    def __post_init__(self):
        if self.n < 1 or self.d0 < 1:
            raise ValueError("dimensions must be >= 1")
        dims = tuple(int(d) for d in self.dims)
        layers = tuple(self.layers)
        if len(dims) != len(layers) or not layers:
            raise ValueError("need one width per layer, at least one layer")
        if any(d < 1 for d in dims):
            raise ValueError("layer widths must be >= 1")
        for i, (d, lspec) in enumerate(zip(dims, layers), start=1):
            if not isinstance(lspec, LayerSpec):
                raise TypeError(f"layer {i} is not a LayerSpec")
            ratio = self.n / d
            if abs(ratio - lspec.gamma) > 1e-12 * max(1.0, abs(lspec.gamma)):
                raise ValueError(
                    f"layer {i}: gamma {lspec.gamma} != n/d_l = {ratio}"
                )
        if isinstance(self.data, EquicorrelatedData) and self.d0 != self.n:
            raise ValueError("equicorrelated data needs d0 = n")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)


# ---------------------------------------------------------------------------
# Forward pass and kernels


def forward_layer(x, spec: LayerSpec, d_prev: int, rngs) -> np.ndarray:
    """One layer: f(W x / sqrt(d_prev) + B) + D.

    rngs supplies the (W, B, D) substreams.  The output width is fixed
    by the layer's shape ratio, d_out = n / gamma.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("x must be a matrix")
    if x.shape[0] != d_prev:
        raise ValueError(f"x has {x.shape[0]} rows, expected d_prev = {d_prev}")
    n = x.shape[1]
    d_out_f = n / spec.gamma
    d_out = int(round(d_out_f))
    if d_out < 1 or abs(d_out_f - d_out) > 1e-9:
        raise ValueError(f"n/gamma = {d_out_f} is not a positive integer width")
    rng_w, rng_b, rng_d = rngs
    w = sample_gaussian(d_out, d_prev, spec.sigma_w2, rng_w)
    b = sample_gaussian(d_out, n, spec.sigma_b2, rng_b)
    d = sample_gaussian(d_out, n, spec.sigma_d2, rng_d)
    return spec.f(w @ x / math.sqrt(d_prev) + b) + d


def conjugate_kernel(y, d: int) -> np.ndarray:
    """K = Y^T Y / d, symmetrized against roundoff."""
    if d < 1:
        raise ValueError("d must be >= 1")
    y = np.asarray(y, dtype=float)
    k = y.T @ y / d
    return 0.5 * (k + k.T)


class SpectralFactory:
    """One eigendecomposition of a symmetric matrix, reused for all z."""

    def __init__(self, k):
        k = np.asarray(k, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError("need a square matrix")
        self.eigenvalues, self._vectors = np.linalg.eigh(0.5 * (k + k.T))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def stieltjes(self, z: complex) -> complex:
        z = complex(z)
        if z.imag <= 0:
            raise ValueError("z must lie in the open upper half-plane")
        return complex(np.mean(1.0 / (self.eigenvalues - z)))

    def resolvent(self, z: complex) -> np.ndarray:
        z = complex(z)
        if z.imag <= 0:
            raise ValueError("z must lie in the open upper half-plane")
        core = 1.0 / (self.eigenvalues - z)
        return (self._vectors * core) @ self._vectors.T


def empirical_stieltjes(k, z: complex) -> complex:
    """g_K(z) = mean of 1/(lambda_i - z) over the spectrum of K."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the open upper half-plane")
    lam = np.linalg.eigvalsh(np.asarray(k, dtype=float))
    return complex(np.mean(1.0 / (lam - z)))


def resolvent(k, z: complex) -> np.ndarray:
    """(K - z I)^{-1} assembled from the eigendecomposition."""
    return SpectralFactory(k).resolvent(z)


class OrthoStats(NamedTuple):
    max_dev: float
    diag_norm: float
    spec_norm: float


def orthogonality_stats(k, sigma2: float) -> OrthoStats:
    """Deviation of K from sigma2 * I: entrywise max, diagonal 2-norm, |K|."""
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("K must be square")
    delta = k - sigma2 * np.eye(k.shape[0])
    return OrthoStats(
        max_dev=float(np.max(np.abs(delta))),
        diag_norm=float(np.linalg.norm(np.diag(delta))),
        spec_norm=float(np.linalg.norm(k, 2)),
    )


# ---------------------------------------------------------------------------
# Full runs


@dataclass(frozen=True)
class SimResult:
    """Everything one sampled network exposes to the comparison layer.

    Index 0 of the per-layer tuples is the input kernel K_X; index l is
    the conjugate kernel after layer l.
    """

    seed: int
    z_grid: tuple
    kernels: tuple
    eigenvalues: tuple
    resolvents: tuple
    stats: tuple

    def __post_init__(self):
        n = self.kernels[0].shape[0]
        for lam in self.eigenvalues:
            if lam.size != n:
                raise ValueError("eigenvalue count must equal n at every layer")
            if lam[0] < -1e-8:
                raise ValueError(f"kernel has eigenvalue {lam[0]:.3e} < -1e-8")

    @property
    def depth(self) -> int:
        return len(self.kernels) - 1


def _output_variance(lspec: LayerSpec, sigma_x2: float, rule) -> float:
    st2 = lspec.sigma_w2 * sigma_x2 + lspec.sigma_b2
    ft = lspec.f.scaled(math.sqrt(st2))
    return gaussian_norm_sq(ft, rule) + lspec.sigma_d2


def run_network(spec: NetworkSpec, z_grid, seed: int) -> SimResult:
    """Sample one network and collect kernels, spectra, and stats.

    z_grid lists the points where resolvent snapshots are stored; pass
    an empty sequence to skip them (eigenvalues are always computed).
    """
    rule = default_rule()
    z_grid = tuple(complex(z) for z in z_grid)
    x = spec.data.materialize(spec.d0, spec.n, stream(seed, 0, "X"))
    kernels = [conjugate_kernel(x, spec.d0)]
    sigma2s = [spec.data.input_variance()]
    d_prev = spec.d0
    for i, lspec in enumerate(spec.layers, start=1):
        rngs = (stream(seed, i, "W"), stream(seed, i, "B"), stream(seed, i, "D"))
        x = forward_layer(x, lspec, d_prev, rngs)
        d_prev = spec.dims[i - 1]
        kernels.append(conjugate_kernel(x, d_prev))
        sigma2s.append(_output_variance(lspec, sigma2s[-1], rule))
    eigenvalues = []
    resolvents = []
    stats = []
    for k, s2 in zip(kernels, sigma2s):
        fac = SpectralFactory(k)
        eigenvalues.append(fac.eigenvalues)
        resolvents.append(tuple(fac.resolvent(z) for z in z_grid))
        stats.append(orthogonality_stats(k, s2))
    return SimResult(
        seed=int(seed),
        z_grid=z_grid,
        kernels=tuple(kernels),
        eigenvalues=tuple(eigenvalues),
        resolvents=tuple(resolvents),
        stats=tuple(stats),
    )


# ---------------------------------------------------------------------------
# CSV export


def write_eigenvalues_csv(result: SimResult, path) -> None:
    """One row per eigenvalue: (seed, layer, index, eigenvalue)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "layer", "index", "eigenvalue"])
        for layer, lam in enumerate(result.eigenvalues):
            for idx, v in enumerate(lam):
                w.writerow([result.seed, layer, idx, repr(float(v))])


def write_stats_csv(result: SimResult, path) -> None:
    """One row per layer: the orthogonality statistics."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "layer", "max_dev", "diag_norm", "spec_norm"])
        for layer, st in enumerate(result.stats):
            w.writerow([result.seed, layer, repr(st.max_dev), repr(st.diag_norm), repr(st.spec_norm)])
