"""Spectral measures and their transforms.

A measure is represented structurally: a finite atomic measure
(:class:`DiscreteMeasure`), an affine pushforward t -> a + b t of another
measure (:class:`AffinePush`), the companion mixture
(1 - gamma) delta_0 + gamma inner (:class:`AtomMix`, a signed measure when
gamma > 1), or a multiplicative Marchenko-Pastur convolution
MP(gamma) (x) base evaluated through the fixed-point solver
(:class:`MpBoxtimes`).

Every variant exposes a vectorized Stieltjes transform
g(z) = integral of 1 / (t - z), defined off the real axis, which maps the
upper half-plane into itself for genuine probability measures.  Densities
and distribution functions of solver-backed measures are recovered by
Stieltjes inversion at a small imaginary offset eta: the density estimate is
Im g(x + i eta) / pi, and the distribution function integrates it on a grid
of step eta / 3, with any atom at zero split off explicitly and the
continuous part renormalized to the remaining mass (this removes the
O(eta) tail bias of the Poisson kernel).
"""

from __future__ import annotations

import csv
import math
import threading

import numpy as np

from .freeconv import DEFAULT_CONFIG, FixedPointConfig, solve_l_grid

DEFAULT_ETA = 1e-3

_CHUNK = 1 << 21


class SignedMeasureError(ValueError):
    """Operation requires a probability measure but the input is signed."""


def _as_z(z):
    z = np.asarray(z, dtype=complex)
    return z, z.shape == ()


def _herglotz_check(g, z, probability: bool):
    if not probability:
        return
    gi = np.atleast_1d(np.asarray(g).imag)
    zi = np.atleast_1d(np.asarray(z).imag)
    assert np.all(gi[zi > 0] > 0), "Stieltjes transform left the upper half-plane"


class Measure:
    """Common interface; concrete variants implement the hooks."""

    is_probability: bool = True

    # -- hooks ------------------------------------------------------------
    def stieltjes(self, z):
        raise NotImplementedError

    def support_min(self) -> float:
        raise NotImplementedError

    def support_max(self) -> float:
        raise NotImplementedError

    def atom_points(self) -> np.ndarray:
        return np.empty(0)

    def atom_mass(self, t):
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape)

    def cdf(self, t, eta: float = DEFAULT_ETA):
        raise NotImplementedError

    # -- shared -----------------------------------------------------------
    def cdf_left(self, t, eta: float = DEFAULT_ETA):
        """Left limit of the distribution function."""
        return self.cdf(t, eta) - self.atom_mass(t)

    def density(self, x, eta: float = DEFAULT_ETA):
        return density_from_stieltjes(self, x, eta)


class DiscreteMeasure(Measure):
    """Finite atomic probability measure with sorted atoms."""

    def __init__(self, atoms, weights):
        atoms = np.asarray(atoms, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if atoms.shape != weights.shape or atoms.size == 0:
            raise ValueError("atoms and weights must be aligned, nonempty 1-d arrays")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        order = np.argsort(atoms, kind="stable")
        self.atoms = atoms[order]
        self.weights = weights[order]
        self._cum = np.cumsum(self.weights)

    def __repr__(self):
        return f"DiscreteMeasure({self.atoms.size} atoms on [{self.atoms[0]:g}, {self.atoms[-1]:g}])"

    def stieltjes(self, z):
        z, scalar = _as_z(z)
        flat = z.ravel()
        out = np.empty(flat.shape, dtype=complex)
        block = max(1, _CHUNK // self.atoms.size)
        for i in range(0, flat.size, block):
            part = flat[i : i + block]
            out[i : i + block] = self.weights @ (1.0 / (self.atoms[:, None] - part[None, :]))
        out = out.reshape(z.shape)
        _herglotz_check(out, z, True)
        return complex(out) if scalar else out

    def support_min(self) -> float:
        return float(self.atoms[0])

    def support_max(self) -> float:
        return float(self.atoms[-1])

    def atom_points(self) -> np.ndarray:
        return self.atoms.copy()

    def atom_mass(self, t):
        t = np.asarray(t, dtype=float)
        tol = 1e-12 * np.maximum(1.0, np.abs(t))
        lo = np.searchsorted(self.atoms, t - tol, side="left")
        hi = np.searchsorted(self.atoms, t + tol, side="right")
        cum = np.concatenate([[0.0], self._cum])
        out = cum[hi] - cum[lo]
        return float(out) if t.shape == () else out

    def cdf(self, t, eta: float = DEFAULT_ETA):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.atoms, t, side="right")
        cum = np.concatenate([[0.0], self._cum])
        out = cum[idx]
        return float(out) if t.shape == () else out

    def cdf_left(self, t, eta: float = DEFAULT_ETA):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.atoms, t, side="left")
        cum = np.concatenate([[0.0], self._cum])
        out = cum[idx]
        return float(out) if t.shape == () else out

    def second_moment(self) -> float:
        return float(self.weights @ self.atoms**2)


def dirac(a: float) -> DiscreteMeasure:
    return DiscreteMeasure([float(a)], [1.0])


def esd_from_eigenvalues(eigenvalues) -> DiscreteMeasure:
    """Empirical spectral distribution with near-duplicate atoms merged.

    Eigenvalues closer than 1e-12 * max(1, |lambda|) collapse into a single
    atom at their mean, with summed weight.
    """
    ev = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
    if ev.size == 0:
        raise ValueError("need at least one eigenvalue")
    tol = 1e-12 * np.maximum(1.0, np.abs(ev[1:]))
    breaks = np.nonzero(np.diff(ev) > tol)[0] + 1
    starts = np.concatenate([[0], breaks])
    stops = np.concatenate([breaks, [ev.size]])
    atoms = np.array([ev[a:b].mean() for a, b in zip(starts, stops)])
    weights = (stops - starts) / ev.size
    return DiscreteMeasure(atoms, weights)


class AffinePush(Measure):
    """Pushforward of ``inner`` under t -> a + b t."""

    def __init__(self, a: float, b: float, inner: Measure):
        self.a = float(a)
        self.b = float(b)
        self.inner = inner
        self.is_probability = inner.is_probability

    def __repr__(self):
        return f"AffinePush({self.a:g} + {self.b:g} t, {self.inner!r})"

    def stieltjes(self, z):
        z, scalar = _as_z(z)
        if self.b == 0.0:
            out = 1.0 / (self.a - z)
        elif self.b > 0.0:
            out = self.inner.stieltjes((z - self.a) / self.b) / self.b
        else:
            # (z - a) / b lands in the lower half-plane; use g(conj w) = conj g(w)
            w = (z - self.a) / self.b
            out = np.conj(self.inner.stieltjes(np.conj(w))) / self.b
        _herglotz_check(out, z, self.is_probability)
        return complex(out) if scalar else out

    def support_min(self) -> float:
        if self.b == 0.0:
            return self.a
        lo, hi = self.inner.support_min(), self.inner.support_max()
        return self.a + (self.b * lo if self.b > 0 else self.b * hi)

    def support_max(self) -> float:
        if self.b == 0.0:
            return self.a
        lo, hi = self.inner.support_min(), self.inner.support_max()
        return self.a + (self.b * hi if self.b > 0 else self.b * lo)

    def atom_points(self) -> np.ndarray:
        if self.b == 0.0:
            return np.array([self.a])
        return np.sort(self.a + self.b * self.inner.atom_points())

    def atom_mass(self, t):
        t = np.asarray(t, dtype=float)
        if self.b == 0.0:
            out = np.where(np.abs(t - self.a) <= 1e-12 * np.maximum(1, np.abs(t)), 1.0, 0.0)
        else:
            out = self.inner.atom_mass((t - self.a) / self.b)
        return float(out) if t.shape == () else out

    def cdf(self, t, eta: float = DEFAULT_ETA):
        t = np.asarray(t, dtype=float)
        if self.b == 0.0:
            out = np.where(t >= self.a, 1.0, 0.0)
        elif self.b > 0.0:
            out = self.inner.cdf((t - self.a) / self.b, eta / self.b)
        else:
            raise ValueError("cdf of a negative-scale pushforward is not supported")
        return float(out) if t.shape == () else out


class AtomMix(Measure):
    """(1 - gamma) delta_0 + gamma inner; signed when gamma > 1."""

    def __init__(self, gamma: float, inner: Measure):
        gamma = float(gamma)
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.gamma = gamma
        self.inner = inner
        self.is_probability = gamma <= 1.0 and inner.is_probability

    def __repr__(self):
        return f"AtomMix(gamma={self.gamma:g}, {self.inner!r})"

    def stieltjes(self, z):
        z, scalar = _as_z(z)
        out = (self.gamma - 1.0) / z + self.gamma * self.inner.stieltjes(z)
        _herglotz_check(out, z, self.is_probability)
        return complex(out) if scalar else out

    def support_min(self) -> float:
        return min(0.0, self.inner.support_min())

    def support_max(self) -> float:
        return max(0.0, self.inner.support_max())

    def atom_points(self) -> np.ndarray:
        return np.union1d([0.0], self.inner.atom_points())

    def atom_mass(self, t):
        t = np.asarray(t, dtype=float)
        at0 = np.where(np.abs(t) <= 1e-12, 1.0 - self.gamma, 0.0)
        out = at0 + self.gamma * self.inner.atom_mass(t)
        return float(out) if t.shape == () else out

    def cdf(self, t, eta: float = DEFAULT_ETA):
        if not self.is_probability:
            raise SignedMeasureError("cdf undefined for a signed companion measure")
        t = np.asarray(t, dtype=float)
        out = (1.0 - self.gamma) * (t >= 0.0) + self.gamma * self.inner.cdf(t, eta)
        return float(out) if t.shape == () else out


class MpBoxtimes(Measure):
    """MP(gamma) (x) base, with transforms evaluated by the fixed point.

    Holds an internal, lock-guarded warm-start table (last solution per
    argument shape); warm starts only change iteration counts, never the
    converged values beyond solver tolerance.
    """

    def __init__(self, gamma: float, base: Measure, solver: FixedPointConfig = DEFAULT_CONFIG):
        gamma = float(gamma)
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if base.support_min() < -1e-12:
            raise ValueError("base measure must be supported on the nonnegative reals")
        if not base.is_probability:
            raise SignedMeasureError("MP convolution needs a probability base measure")
        self.gamma = gamma
        self.base = base
        self.solver = solver
        self._lock = threading.Lock()
        self._warm: dict = {}
        self._tables: dict = {}

    def __repr__(self):
        return f"MpBoxtimes(gamma={self.gamma:g}, {self.base!r})"

    def _solve(self, z):
        with self._lock:
            l0 = self._warm.get(z.shape)
        l, _, _ = solve_l_grid(self.base, self.gamma, z, self.solver, l0=l0)
        with self._lock:
            self._warm[z.shape] = l
        return l

    def stieltjes(self, z):
        z, scalar = _as_z(z)
        neg = z.imag < 0
        if np.any(neg):
            zz = np.where(neg, np.conj(z), z)
        else:
            zz = z
        l = self._solve(zz)
        g = (-1.0 / l - (self.gamma - 1.0) / zz) / self.gamma
        if np.any(neg):
            g = np.where(neg, np.conj(g), g)
        _herglotz_check(g, z, True)
        return complex(g) if scalar else g

    def companion_l(self, z):
        """Reciprocal transform l(z) = -1 / g_companion(z), vectorized."""
        z, scalar = _as_z(z)
        if np.any(z.imag <= 0):
            raise ValueError("z must lie in the open upper half-plane")
        l = self._solve(z)
        return complex(l) if scalar else l

    def stieltjes_checked(self, z):
        """Stieltjes transform with per-point convergence flags.

        Returns ``(g, ok)`` where ok is a boolean mask shaped like z; entries
        with ok False did not meet the solver tolerance and carry the last
        iterate rather than a trusted value.  Unlike ``stieltjes`` this never
        raises on divergence, so callers can flag bad grid points and move on.
        """
        z, scalar = _as_z(z)
        neg = z.imag < 0
        zz = np.where(neg, np.conj(z), z) if np.any(neg) else z
        with self._lock:
            l0 = self._warm.get(zz.shape)
        l, _, res = solve_l_grid(
            self.base, self.gamma, zz, self.solver, l0=l0, raise_on_fail=False
        )
        ok = res <= self.solver.tol * np.maximum(1.0, np.abs(l))
        if np.all(ok):
            with self._lock:
                self._warm[zz.shape] = l
        g = (-1.0 / l - (self.gamma - 1.0) / zz) / self.gamma
        if np.any(neg):
            g = np.where(neg, np.conj(g), g)
        if scalar:
            return complex(g), bool(np.all(ok))
        return g, np.asarray(ok, dtype=bool)

    def support_min(self) -> float:
        return 0.0

    def support_max(self) -> float:
        edge = (1.0 + math.sqrt(self.gamma)) ** 2
        return self.base.support_max() * edge

    def _atom0(self) -> float:
        p0 = float(self.base.atom_mass(0.0))
        return max(p0, 1.0 - 1.0 / self.gamma, 0.0)

    def atom_points(self) -> np.ndarray:
        return np.array([0.0]) if self._atom0() > 0 else np.empty(0)

    def atom_mass(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(np.abs(t) <= 1e-12, self._atom0(), 0.0)
        return float(out) if t.shape == () else out

    def _cdf_table(self, eta: float):
        key = float(eta)
        with self._lock:
            cached = self._tables.get(key)
        if cached is not None:
            return cached
        m0 = self._atom0()
        pad = max(0.5, 300.0 * eta)
        hi = self.support_max() + pad
        lo = -pad
        step = eta / 3.0
        xs = np.linspace(lo, hi, int(np.ceil((hi - lo) / step)) + 1)
        g = self.stieltjes(xs + 1j * eta)
        dens = g.imag / np.pi
        if m0 > 0.0:
            dens = dens - m0 * (eta / np.pi) / (xs**2 + eta**2)
        dens = np.maximum(dens, 0.0)
        widths = np.diff(xs)
        cells = 0.5 * (dens[1:] + dens[:-1]) * widths
        cont = np.concatenate([[0.0], np.cumsum(cells)])
        total = cont[-1]
        if total > 0 and m0 < 1.0:
            cont *= (1.0 - m0) / total
        table = (xs, cont)
        with self._lock:
            self._tables[key] = table
        return table

    def cdf(self, t, eta: float = DEFAULT_ETA):
        # the atom at zero enters as an exact step, only the continuous part
        # comes from the interpolation table
        if eta <= 0:
            raise ValueError("eta must be positive")
        t = np.asarray(t, dtype=float)
        xs, cont = self._cdf_table(eta)
        out = np.interp(t, xs, cont, left=0.0, right=float(cont[-1]))
        out = out + self._atom0() * (t >= 0.0)
        return float(out) if t.shape == () else out


# ---------------------------------------------------------------------------
# Module-level operations


def stieltjes(m: Measure, z):
    return m.stieltjes(z)


def cdf(m: Measure, t, eta: float = DEFAULT_ETA):
    return m.cdf(t, eta)


def density_from_stieltjes(m: Measure, x, eta: float = DEFAULT_ETA):
    """Density estimate Im g(x + i eta) / pi, clamped at zero."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    x = np.asarray(x, dtype=float)
    g = m.stieltjes(x + 1j * eta)
    out = np.maximum(np.asarray(g).imag / np.pi, 0.0)
    return float(out) if x.shape == () else out


def kolmogorov_distance(a: Measure, b: Measure, grid, eta: float = DEFAULT_ETA) -> float:
    """sup_t |F_a(t) - F_b(t)| over the grid, atoms and their left limits.

    The supplied grid is augmented with every atom of either measure, and
    both one-sided values are compared at each point, so the distance is
    exact when both measures are discrete.
    """
    if not (a.is_probability and b.is_probability):
        raise SignedMeasureError("Kolmogorov distance needs probability measures")
    pts = np.unique(np.concatenate([
        np.asarray(grid, dtype=float).ravel(),
        a.atom_points(),
        b.atom_points(),
    ]))
    if pts.size == 0:
        raise ValueError("empty evaluation grid")
    right = np.abs(a.cdf(pts, eta) - b.cdf(pts, eta))
    left = np.abs(a.cdf_left(pts, eta) - b.cdf_left(pts, eta))
    return float(max(right.max(), left.max()))


def write_discrete_csv(m: DiscreteMeasure, path) -> None:
    """Serialize a discrete measure as (atom, weight) rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["atom", "weight"])
        for a, p in zip(m.atoms, m.weights):
            w.writerow([repr(float(a)), repr(float(p))])


def read_discrete_csv(path) -> DiscreteMeasure:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["atom", "weight"]:
        raise ValueError(f"{path}: expected header 'atom,weight'")
    data = np.array([[float(a), float(p)] for a, p in rows[1:]])
    if data.size == 0:
        raise ValueError(f"{path}: no atoms")
    return DiscreteMeasure(data[:, 0], data[:, 1])
