"""Top-level acceptance checks, one test per numbered criterion.

Each test is self-contained, prints the quantities it measured, and
asserts a wall-clock budget alongside the accuracy thresholds, so a
plain ``pytest -v tests/test_acceptance.py`` reads as a checklist.
"""

import math
import time

import numpy as np
import pytest

from ckequiv.detequiv import (
    LayerSpec,
    build_chain,
    equicorrelated_equivalent,
    equicorrelated_stieltjes,
    gbox_composed,
    gbox_from_sigma,
    layer_constants,
)
from ckequiv.freeconv import mp_stieltjes_closed
from ckequiv.gauss_cov import CovModel, sigma_approx, sigma_expansion, sigma_mc_oracle
from ckequiv.hermite import (
    Activation,
    coeff_vector,
    hermite_normalized,
    make_rule,
    psi,
    tanh_activation,
)
from ckequiv.measures import (
    DiscreteMeasure,
    MpBoxtimes,
    dirac,
    esd_from_eigenvalues,
    kolmogorov_distance,
)
from ckequiv.netsim import EquicorrelatedData, IidData, NetworkSpec, run_network

TANH_LAYER = LayerSpec(1.0, 1.0, 1.0, tanh_activation(), 1.0)


def near_identity_cov(n, scale, seed):
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-1.0, 1.0, size=(n, n))
    delta = 0.5 * (delta + delta.T)
    np.fill_diagonal(delta, 0.0)
    return np.eye(n) + scale * delta


def polynomial_activation():
    """Degree-4 polynomial with an exactly finite Hermite expansion."""

    def fn(t):
        return (
            hermite_normalized(1, t)
            + hermite_normalized(2, t) / 2.0
            + hermite_normalized(3, t) / 3.0
            + hermite_normalized(4, t) / 4.0
        )

    return Activation("poly4", fn, 30.0)


def test_criterion_1_hermite_suite():
    start = time.perf_counter()
    rule = make_rule(128)

    h = np.array([hermite_normalized(r, rule.nodes) for r in range(9)])
    gram = (h * rule.weights) @ h.T
    ortho_err = float(np.max(np.abs(gram - np.eye(9))))
    assert ortho_err < 1e-9

    # E[h_r(X) h_s(Y)] = rho^r delta_rs for jointly Gaussian (X, Y)
    pair_err = 0.0
    u = rule.nodes[:, None]
    v = rule.nodes[None, :]
    w2 = rule.weights[:, None] * rule.weights[None, :]
    for rho in (-0.5, 0.0, 0.3, 0.9):
        y = rho * u + math.sqrt(1.0 - rho * rho) * v
        for r in range(7):
            hr = hermite_normalized(r, u)
            for s in range(7):
                val = float(np.sum(w2 * hr * hermite_normalized(s, y)))
                want = rho**r if r == s else 0.0
                pair_err = max(pair_err, abs(val - want))
    assert pair_err < 1e-7

    # d/dsigma Psi_r(sigma) = sigma * Psi_{r+2}(sigma)
    bent = Activation("bent", lambda t: np.tanh(t + 0.5), 1.0)
    step = 1e-3
    deriv_err = 0.0
    for f, orders in ((bent, (0, 1, 2, 3)), (tanh_activation(), (1, 3))):
        for sigma in (0.9, 1.1):
            for r in orders:
                num = (psi(f, r, sigma + step, rule) - psi(f, r, sigma - step, rule)) / (2 * step)
                want = sigma * psi(f, r + 2, sigma, rule)
                deriv_err = max(deriv_err, abs(num - want) / abs(want))
    assert deriv_err < 1e-4

    elapsed = time.perf_counter() - start
    print(
        f"criterion 1: orthonormality {ortho_err:.2e}, pair {pair_err:.2e}, "
        f"derivative rel {deriv_err:.2e}, {elapsed:.2f}s"
    )
    assert elapsed < 1.0


def test_criterion_2_fixed_point_matches_closed_form():
    start = time.perf_counter()
    worst = 0.0
    for gamma in (0.5, 1.0, 2.0):
        law = MpBoxtimes(gamma, dirac(1.0))
        for re in np.linspace(-2.0, 6.0, 20):
            for im in (1e-2, 1e-1, 1.0, 10.0):
                z = complex(re, im)
                worst = max(worst, abs(law.stieltjes(z) - mp_stieltjes_closed(gamma, z)))
    assert worst <= 1e-10
    elapsed = time.perf_counter() - start
    print(f"criterion 2: worst gap {worst:.2e} over 240 points, {elapsed:.2f}s")
    assert elapsed < 1.0


def test_criterion_3_covariance_expansion_vs_monte_carlo():
    start = time.perf_counter()
    model = CovModel(near_identity_cov(4, 0.1, seed=0), tanh_activation())
    est, se = sigma_mc_oracle(model, 10_000_000, seed=123, return_se=True)
    dev = np.abs(sigma_approx(model) - est) / se
    worst_se = float(np.max(dev))
    assert worst_se <= 3.0

    poly = polynomial_activation()
    scales = np.array([1 / 50, 1 / 100, 1 / 200])
    gaps = []
    for s in scales:
        m = CovModel(near_identity_cov(6, s, seed=1), poly)
        gaps.append(float(np.max(np.abs(sigma_approx(m) - sigma_expansion(m, r_max=8)))))
    slope = float(np.polyfit(np.log(scales), np.log(gaps), 1)[0])
    assert slope >= 0.9

    elapsed = time.perf_counter() - start
    print(
        f"criterion 3: worst deviation {worst_se:.2f} standard errors, "
        f"gap slope {slope:.3f} over scales {scales.tolist()}, {elapsed:.1f}s"
    )
    assert elapsed < 120.0


def test_criterion_4_composed_route_matches_direct_route():
    start = time.perf_counter()
    n = 200
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        m = rng.standard_normal((n, 2 * n))
        kx = m @ m.T / (2 * n)
        lam, vec = np.linalg.eigh(kx)
        tau = esd_from_eigenvalues(lam)
        a = float(rng.uniform(0.0, 2.0))
        b = float(rng.uniform(0.05, 1.5))
        gamma = float(rng.uniform(0.3, 3.0))
        z = complex(rng.uniform(-2.0, 4.0), rng.uniform(0.05, 2.0))

        def resolvent(w, lam=lam, vec=vec):
            return (vec * (1.0 / (lam - w))) @ vec.T

        left = gbox_composed(resolvent, tau, a, b, gamma, z)
        right = gbox_from_sigma(a * np.eye(n) + b * kx, gamma, z)
        worst = max(worst, float(np.linalg.norm(left - right, 2)))
    assert worst < 1e-8
    elapsed = time.perf_counter() - start
    print(f"criterion 4: worst spectral gap {worst:.2e} over 50 cases, {elapsed:.1f}s")
    assert elapsed < 30.0


def test_criterion_5_equicorrelated_closed_form():
    start = time.perf_counter()
    c = layer_constants(TANH_LAYER, 1.0)
    a, b = float(c.a), float(c.b)
    worst = 0.0
    for n in (100, 1000):
        sigma = np.full((n, n), b / n)
        np.fill_diagonal(sigma, a + b)
        for z in (1j, 1.5 + 0.3j):
            _, g_mat = equicorrelated_equivalent(n, a, b, z)
            worst = max(worst, float(np.linalg.norm(g_mat - gbox_from_sigma(sigma, 1.0, z), 2)))
    assert worst < 1e-9

    g_inf = mp_stieltjes_closed(1.0, 1j / (a + b)) / (a + b)
    ns = np.array([100, 1000, 10000])
    gaps = np.array([abs(equicorrelated_stieltjes(n, a, b, 1j) - g_inf) for n in ns])
    slope = float(np.polyfit(np.log(ns), np.log(gaps), 1)[0])
    assert abs(slope - (-1.0)) < 0.2

    elapsed = time.perf_counter() - start
    print(
        f"criterion 5: worst closed-vs-generic gap {worst:.2e}, "
        f"finite-size decay slope {slope:.3f}, {elapsed:.1f}s"
    )
    assert elapsed < 120.0


def test_criterion_6_single_layer_end_to_end():
    start = time.perf_counter()
    n = 1000
    c = layer_constants(TANH_LAYER, 1.0)
    a, b = float(c.a), float(c.b)
    z = 1j
    g_det = equicorrelated_stieltjes(n, a, b, z)
    _, g_mat = equicorrelated_equivalent(n, a, b, z)
    alpha = a + b - b / n
    chi = MpBoxtimes(1.0, DiscreteMeasure([alpha, alpha + b], [(n - 1) / n, 1.0 / n]))
    spec = NetworkSpec(n=n, d0=n, dims=(n,), data=EquicorrelatedData(), layers=(TANH_LAYER,))

    dgs, kss, gaps = [], [], []
    for seed in (0, 1, 2):
        res = run_network(spec, (z,), seed)
        lam = res.eigenvalues[1]
        g_sim = complex(np.mean(1.0 / (lam - z)))
        dgs.append(abs(g_sim - g_det))
        grid = np.linspace(lam[0] - 0.5, lam[-1] + 0.5, 801)
        kss.append(kolmogorov_distance(esd_from_eigenvalues(lam), chi, grid))
        gaps.append(float(np.max(np.abs(res.resolvents[1][0] - g_mat))))
    assert max(dgs) < 0.02
    assert max(kss) < 0.05
    assert max(gaps) < 0.1
    elapsed = time.perf_counter() - start
    print(
        f"criterion 6: |dg| max {max(dgs):.2e}, Kolmogorov max {max(kss):.4f}, "
        f"entry gap max {max(gaps):.4f} over 3 seeds, {elapsed:.1f}s"
    )
    assert elapsed < 300.0


def test_criterion_7_three_layer_network():
    start = time.perf_counter()
    z = 1j

    def spec_for(n):
        return NetworkSpec(
            n=n, d0=n, dims=(n, n, n), data=IidData(1.0), layers=(TANH_LAYER,) * 3
        )

    n = 1000
    spec = spec_for(n)
    chi0 = MpBoxtimes(1.0, dirac(1.0))
    chain = build_chain(spec, chi0, lambda w: chi0.stieltjes(w) * np.eye(n), 1.0)
    g_det = [layer.chi.stieltjes(z) for layer in chain.layers]

    dgs = np.zeros((3, 3))
    kss = np.zeros((3, 3))
    for si, seed in enumerate((0, 1, 2)):
        res = run_network(spec, (), seed)
        for li in range(3):
            lam = res.eigenvalues[li + 1]
            g_sim = complex(np.mean(1.0 / (lam - z)))
            dgs[si, li] = abs(g_sim - g_det[li])
            grid = np.linspace(lam[0] - 0.5, lam[-1] + 0.5, 801)
            kss[si, li] = kolmogorov_distance(
                esd_from_eigenvalues(lam), chain.layers[li].chi, grid
            )
    assert np.max(dgs) < 0.03
    assert np.max(kss) < 0.07

    # the entrywise deviation from sigma_y2 * I shrinks with width
    avg_dev = {}
    for m in (250, 500, 1000):
        stats = [run_network(spec_for(m), (), seed).stats for seed in (0, 1, 2)]
        avg_dev[m] = np.array([np.mean([s[li + 1].max_dev for s in stats]) for li in range(3)])
    for li in range(3):
        assert avg_dev[250][li] > avg_dev[500][li] > avg_dev[1000][li]

    elapsed = time.perf_counter() - start
    print(
        f"criterion 7: |dg| max {np.max(dgs):.2e}, Kolmogorov max {np.max(kss):.4f}, "
        f"max-dev by n {{250: {np.round(avg_dev[250], 4).tolist()}, "
        f"500: {np.round(avg_dev[500], 4).tolist()}, "
        f"1000: {np.round(avg_dev[1000], 4).tolist()}}}, {elapsed:.1f}s"
    )
    assert elapsed < 900.0


def test_criterion_8_trace_identity_and_resolvent_bound():
    n = 80
    rng = np.random.default_rng(11)
    m = rng.standard_normal((n, 2 * n))
    kx = m @ m.T / (2 * n)
    lam, vec = np.linalg.eigh(kx)
    tau = esd_from_eigenvalues(lam)

    def resolvent(w):
        return (vec * (1.0 / (lam - w))) @ vec.T

    c = layer_constants(TANH_LAYER, 1.0)
    a, b = float(c.a), float(c.b)
    chi_sigma = MpBoxtimes(1.3, esd_from_eigenvalues(np.linalg.eigvalsh(a * np.eye(n) + b * kx)))

    chain_net = NetworkSpec(n=n, d0=n, dims=(n, n), data=IidData(1.0), layers=(TANH_LAYER,) * 2)
    chi0 = MpBoxtimes(1.0, dirac(1.0))
    chain = build_chain(chain_net, chi0, lambda w: chi0.stieltjes(w) * np.eye(n), 1.0)

    worst_trace = 0.0
    worst_norm_excess = -np.inf
    for z in (0.3 + 0.05j, 1j, 2.0 + 0.5j, -1.0 + 1.0j):
        cases = [
            (gbox_from_sigma(a * np.eye(n) + b * kx, 1.3, z), chi_sigma.stieltjes(z)),
            (gbox_composed(resolvent, tau, a, b, 1.3, z), chi_sigma.stieltjes(z)),
            equicorrelated_equivalent(n, a, b, z)[::-1],
            (chain.layers[1].gbuilder(z), chain.layers[1].chi.stieltjes(z)),
        ]
        for g_mat, g in cases:
            worst_trace = max(worst_trace, abs(np.trace(g_mat) - n * g))
            worst_norm_excess = max(
                worst_norm_excess, float(np.linalg.norm(g_mat, 2)) - 1.0 / z.imag
            )
    assert worst_trace <= 1e-9 * n
    assert worst_norm_excess <= 1e-12
    print(
        f"criterion 8: worst trace gap {worst_trace:.2e} (budget {1e-9 * n:.1e}), "
        f"worst norm excess {worst_norm_excess:.2e}"
    )
