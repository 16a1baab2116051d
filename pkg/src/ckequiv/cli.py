"""Batch experiment driver for spectra of random-feature kernels.

Subcommands
-----------
coeffs     Hermite coefficient table and layer constants for one activation.
density    Density and CDF of the deepest layer's limiting spectral measure.
simulate   Sample networks; write per-seed eigenvalue and statistics tables.
compare    Simulated spectra and resolvents against deterministic equivalents.
example55  Equicorrelated closed form against the generic resolvent builder.

Configuration is a single JSON tree (see ``parse_config``); unknown keys
anywhere in the tree are errors, not warnings.  Tables are written as CSV
and/or JSON with complex columns split into ``_re``/``_im`` pairs and floats
rendered with ``repr`` so identical runs produce identical bytes.  The first
CSV line is a ``# generated <timestamp>`` comment unless ``--no-timestamp``
is given.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence
(output files are still written, with the bad grid points flagged),
4 I/O error.  The worker pool size is taken from the ``CKEQUIV_WORKERS``
environment variable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import _pool
from .freeconv import DEFAULT_CONFIG, DivergenceError, FixedPointConfig, mp_stieltjes_closed
from .hermite import activation_by_name, coeff_vector, default_rule, gaussian_norm_sq
from .measures import (
    DiscreteMeasure,
    MpBoxtimes,
    dirac,
    esd_from_eigenvalues,
    kolmogorov_distance,
)
from .detequiv import (
    B_ZERO_TOL,
    LayerSpec,
    build_chain,
    equicorrelated_equivalent,
    equicorrelated_stieltjes,
    gbox_from_sigma,
    layer_constants,
)
from .netsim import (
    EquicorrelatedData,
    ExplicitData,
    IidData,
    NetworkSpec,
    SpectralFactory,
    conjugate_kernel,
    run_network,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class ConfigError(Exception):
    """Invalid configuration content (maps to exit code 2)."""


# ---------------------------------------------------------------------------
# Configuration tree


@dataclass(frozen=True)
class LayerConfig:
    sigma_w2: float
    sigma_b2: float
    sigma_d2: float
    activation: str
    gamma: float


@dataclass(frozen=True)
class DataConfig:
    kind: str
    sigma_x2: float = 1.0
    path: str | None = None


@dataclass(frozen=True)
class NetworkConfig:
    n: int
    d0: int
    dims: tuple
    data: DataConfig
    layers: tuple


@dataclass(frozen=True)
class ZGridConfig:
    x_min: float = -1.0
    x_max: float = 5.0
    step: float = 0.25
    eta: tuple = (0.1,)

    def points(self) -> np.ndarray:
        count = int(math.floor((self.x_max - self.x_min) / self.step + 1e-9)) + 1
        return self.x_min + self.step * np.arange(count)


@dataclass(frozen=True)
class SimConfig:
    seeds: tuple = (0, 1, 2)
    replicas: int = 3


@dataclass(frozen=True)
class SolverConfig:
    tol: float = DEFAULT_CONFIG.tol
    max_iter: int = DEFAULT_CONFIG.max_iter
    damping: float = DEFAULT_CONFIG.damping

    def fixed_point(self) -> FixedPointConfig:
        try:
            return FixedPointConfig(self.tol, self.max_iter, self.damping)
        except ValueError as ex:
            raise ConfigError(f"solver: {ex}") from None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig | None = None
    z_grid: ZGridConfig = ZGridConfig()
    sim: SimConfig = SimConfig()
    solver: SolverConfig = SolverConfig()
    output: OutputConfig = OutputConfig()


def _check_keys(tree: dict, allowed, where: str) -> None:
    if not isinstance(tree, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(tree).__name__}")
    unknown = sorted(set(tree) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _num_item(v, where: str, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number")
    if kind is int and int(v) != v:
        raise ConfigError(f"{where} must be an integer")
    return kind(v)


def _number(tree: dict, key: str, where: str, default=None, kind=float):
    if key not in tree:
        if default is None:
            raise ConfigError(f"{where}.{key} is required")
        return default
    return _num_item(tree[key], f"{where}.{key}", kind)


def _parse_layer(tree: dict, where: str) -> LayerConfig:
    _check_keys(tree, {"sigma_w2", "sigma_b2", "sigma_d2", "activation", "gamma"}, where)
    act = tree.get("activation")
    if not isinstance(act, str):
        raise ConfigError(f"{where}.activation must be a string")
    return LayerConfig(
        sigma_w2=_number(tree, "sigma_w2", where),
        sigma_b2=_number(tree, "sigma_b2", where, default=0.0),
        sigma_d2=_number(tree, "sigma_d2", where, default=0.0),
        activation=act,
        gamma=_number(tree, "gamma", where),
    )


def _parse_data(tree: dict, where: str) -> DataConfig:
    _check_keys(tree, {"kind", "sigma_x2", "path"}, where)
    kind = tree.get("kind")
    if kind not in ("iid", "equicorrelated", "explicit"):
        raise ConfigError(f"{where}.kind must be one of iid, equicorrelated, explicit")
    if kind == "iid":
        if "path" in tree:
            raise ConfigError(f"{where}.path only applies to explicit data")
        return DataConfig(kind="iid", sigma_x2=_number(tree, "sigma_x2", where, default=1.0))
    if kind == "equicorrelated":
        if "sigma_x2" in tree or "path" in tree:
            raise ConfigError(f"{where}: equicorrelated data takes no parameters")
        return DataConfig(kind="equicorrelated")
    if "sigma_x2" in tree:
        raise ConfigError(f"{where}.sigma_x2 only applies to iid data")
    path = tree.get("path")
    if not isinstance(path, str) or not path:
        raise ConfigError(f"{where}.path is required for explicit data")
    return DataConfig(kind="explicit", path=path)


def _parse_network(tree: dict) -> NetworkConfig:
    _check_keys(tree, {"n", "d0", "dims", "data", "layers"}, "network")
    n = _number(tree, "n", "network", kind=int)
    d0 = _number(tree, "d0", "network", kind=int)
    dims = tree.get("dims")
    if not isinstance(dims, list) or not dims:
        raise ConfigError("network.dims must be a nonempty list of widths")
    dims = tuple(_num_item(d, f"network.dims[{i}]", kind=int) for i, d in enumerate(dims))
    layers = tree.get("layers")
    if not isinstance(layers, list) or not layers:
        raise ConfigError("network.layers must be a nonempty list")
    if len(layers) != len(dims):
        raise ConfigError("network.layers and network.dims must have the same length")
    parsed = tuple(_parse_layer(t, f"network.layers[{i}]") for i, t in enumerate(layers))
    if "data" not in tree:
        raise ConfigError("network.data is required")
    return NetworkConfig(n=n, d0=d0, dims=dims, data=_parse_data(tree["data"], "network.data"), layers=parsed)


def _parse_zgrid(tree: dict) -> ZGridConfig:
    _check_keys(tree, {"x_min", "x_max", "step", "eta"}, "z_grid")
    d = ZGridConfig()
    eta = tree.get("eta", list(d.eta))
    if not isinstance(eta, list) or not eta:
        raise ConfigError("z_grid.eta must be a nonempty list")
    eta = tuple(_num_item(e, f"z_grid.eta[{i}]") for i, e in enumerate(eta))
    if any(e <= 0 for e in eta):
        raise ConfigError("z_grid.eta values must be positive")
    g = ZGridConfig(
        x_min=_number(tree, "x_min", "z_grid", default=d.x_min),
        x_max=_number(tree, "x_max", "z_grid", default=d.x_max),
        step=_number(tree, "step", "z_grid", default=d.step),
        eta=eta,
    )
    if g.step <= 0:
        raise ConfigError("z_grid.step must be positive")
    if g.x_max < g.x_min:
        raise ConfigError("z_grid range is empty")
    return g


def _parse_sim(tree: dict) -> SimConfig:
    _check_keys(tree, {"seeds", "replicas"}, "sim")
    seeds = tree.get("seeds", list(SimConfig().seeds))
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("sim.seeds must be a nonempty list")
    seeds = tuple(_num_item(s, f"sim.seeds[{i}]", kind=int) for i, s in enumerate(seeds))
    replicas = _number(tree, "replicas", "sim", default=len(seeds), kind=int)
    if replicas != len(seeds):
        raise ConfigError("sim.replicas must equal the number of seeds")
    return SimConfig(seeds=seeds, replicas=replicas)


def _parse_solver(tree: dict) -> SolverConfig:
    _check_keys(tree, {"tol", "max_iter", "damping"}, "solver")
    d = SolverConfig()
    out = SolverConfig(
        tol=_number(tree, "tol", "solver", default=d.tol),
        max_iter=_number(tree, "max_iter", "solver", default=d.max_iter, kind=int),
        damping=_number(tree, "damping", "solver", default=d.damping),
    )
    out.fixed_point()
    return out


def _parse_output(tree: dict) -> OutputConfig:
    _check_keys(tree, {"directory", "formats"}, "output")
    d = OutputConfig()
    directory = tree.get("directory", d.directory)
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory must be a nonempty string")
    formats = tree.get("formats", list(d.formats))
    if not isinstance(formats, list) or not formats:
        raise ConfigError("output.formats must be a nonempty list")
    bad = sorted(set(formats) - {"csv", "json"})
    if bad:
        raise ConfigError(f"output.formats entries must be csv or json, got {bad}")
    return OutputConfig(directory=directory, formats=tuple(dict.fromkeys(formats)))


def parse_config(tree: dict) -> ExperimentConfig:
    """Strictly validate a JSON-style config tree (unknown keys are errors)."""
    _check_keys(tree, {"network", "z_grid", "sim", "solver", "output"}, "config")
    return ExperimentConfig(
        network=_parse_network(tree["network"]) if "network" in tree else None,
        z_grid=_parse_zgrid(tree.get("z_grid", {})),
        sim=_parse_sim(tree.get("sim", {})),
        solver=_parse_solver(tree.get("solver", {})),
        output=_parse_output(tree.get("output", {})),
    )


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Inverse of parse_config: parse(serialize(c)) == c."""
    tree: dict = {}
    if cfg.network is not None:
        net = cfg.network
        data = {"kind": net.data.kind}
        if net.data.kind == "iid":
            data["sigma_x2"] = net.data.sigma_x2
        elif net.data.kind == "explicit":
            data["path"] = net.data.path
        tree["network"] = {
            "n": net.n,
            "d0": net.d0,
            "dims": list(net.dims),
            "data": data,
            "layers": [dataclasses.asdict(l) for l in net.layers],
        }
    tree["z_grid"] = {
        "x_min": cfg.z_grid.x_min,
        "x_max": cfg.z_grid.x_max,
        "step": cfg.z_grid.step,
        "eta": list(cfg.z_grid.eta),
    }
    tree["sim"] = {"seeds": list(cfg.sim.seeds), "replicas": cfg.sim.replicas}
    tree["solver"] = dataclasses.asdict(cfg.solver)
    tree["output"] = {
        "directory": cfg.output.directory,
        "formats": list(cfg.output.formats),
    }
    return tree


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    with open(path, "r") as fh:
        try:
            tree = json.load(fh)
        except json.JSONDecodeError as ex:
            raise ConfigError(f"{path}: {ex}") from None
    return parse_config(tree)


# ---------------------------------------------------------------------------
# Heavy objects from config


def to_network_spec(cfg: ExperimentConfig) -> NetworkSpec:
    net = cfg.network
    if net is None:
        raise ConfigError("this command needs a network section in the config")
    if net.data.kind == "iid":
        data = IidData(sigma_x2=net.data.sigma_x2)
    elif net.data.kind == "equicorrelated":
        data = EquicorrelatedData()
    else:
        try:
            x0 = np.load(net.data.path)
        except ValueError as ex:
            raise ConfigError(f"network.data.path: {ex}") from None
        try:
            data = ExplicitData(x0=np.asarray(x0, dtype=float))
        except ValueError as ex:
            raise ConfigError(f"network.data: {ex}") from None
    try:
        layers = tuple(
            LayerSpec(
                sigma_w2=lc.sigma_w2,
                sigma_b2=lc.sigma_b2,
                sigma_d2=lc.sigma_d2,
                f=activation_by_name(lc.activation),
                gamma=lc.gamma,
            )
            for lc in net.layers
        )
        return NetworkSpec(n=net.n, d0=net.d0, dims=net.dims, data=data, layers=layers)
    except ValueError as ex:
        raise ConfigError(str(ex)) from None


def chain_inputs(cfg: ExperimentConfig, spec: NetworkSpec, solver: FixedPointConfig):
    """Input-kernel law chi0, resolvent map G0 and entry variance per data kind.

    iid data uses the limiting law (a scaled MP of aspect ratio n/d0) so the
    deterministic side is seed-free; equicorrelated inputs have an exact
    two-atom spectrum and a rank-one-correction resolvent; explicit data uses
    its empirical spectrum.
    """
    n = spec.n
    kind = cfg.network.data.kind
    if kind == "iid":
        chi0 = MpBoxtimes(n / spec.d0, dirac(spec.data.sigma_x2), solver=solver)

        def g0(w):
            return chi0.stieltjes(complex(w)) * np.eye(n)

        return chi0, g0, spec.data.sigma_x2
    if kind == "equicorrelated":
        alpha = 1.0 - 1.0 / n
        chi0 = DiscreteMeasure([alpha, alpha + 1.0], [(n - 1) / n, 1.0 / n])

        def g0(w):
            w = complex(w)
            out = np.full((n, n), -1.0 / (n * (alpha - w) * (alpha + 1.0 - w)), dtype=complex)
            np.fill_diagonal(out, np.diag(out) + 1.0 / (alpha - w))
            return out

        return chi0, g0, 1.0
    x0 = spec.data.x0
    fac = SpectralFactory(conjugate_kernel(x0, spec.d0))
    return esd_from_eigenvalues(fac.eigenvalues), fac.resolvent, spec.data.input_variance()


def _build_chain(cfg: ExperimentConfig, spec: NetworkSpec):
    solver = cfg.solver.fixed_point()
    chi0, g0, sx2 = chain_inputs(cfg, spec, solver)
    try:
        return build_chain(spec, chi0, g0, sx2, cfg=solver)
    except ValueError as ex:
        raise ConfigError(str(ex)) from None


# ---------------------------------------------------------------------------
# Table output


def _stamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return str(v)


def write_table(outdir, name, header, rows, formats, stamp=None) -> list:
    """Write one table in every requested format; returns the paths written.

    stamp=None suppresses the generated-at line (CSV) / key (JSON).
    """
    paths = []
    for fmt in formats:
        path = os.path.join(outdir, f"{name}.{fmt}")
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                if stamp is not None:
                    fh.write(f"# generated {stamp}\n")
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows([[_csv_cell(v) for v in row] for row in rows])
        else:
            doc: dict = {}
            if stamp is not None:
                doc["generated"] = stamp
            doc["columns"] = list(header)
            doc["rows"] = [[_json_cell(v) for v in row] for row in rows]
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=1)
                fh.write("\n")
        paths.append(path)
    return paths


def _print_table(header, rows, file=sys.stdout) -> None:
    cells = [[str(_csv_cell(v)) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(), file=file)
    for row in cells:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip(), file=file)


def _ensure_outdir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def _eta_tag(eta: float) -> str:
    return f"{eta:g}"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_coeffs(args) -> int:
    try:
        f = activation_by_name(args.activation)
    except ValueError as ex:
        raise ConfigError(str(ex)) from None
    if args.r_max < 1:
        raise ConfigError("--r-max must be >= 1")
    if args.sigma_tilde2 is not None:
        sw2, sx2, sb2 = args.sigma_tilde2, 1.0, 0.0
    else:
        sw2, sx2, sb2 = args.sigma_w2, args.sigma_x2, args.sigma_b2
    sd2 = args.sigma_d2
    st2 = sw2 * sx2 + sb2
    if st2 <= 0 or sw2 < 0 or sx2 < 0 or sb2 < 0 or sd2 < 0:
        raise ConfigError("variances must be nonnegative with sigma_w2*sigma_x2 + sigma_b2 > 0")
    rule = default_rule()
    ft = f.scaled(math.sqrt(st2))
    zeta = coeff_vector(ft, args.r_max, rule)
    norm2 = gaussian_norm_sq(ft, rule)
    # constants computed arithmetically, with no zero-mean gate: this table
    # is diagnostic and should also show activations that need recentering
    b = zeta[1] ** 2 * sw2 / st2
    if b < B_ZERO_TOL:
        b = 0.0
    a = norm2 - (sw2 * sx2 / st2) * zeta[1] ** 2 + sd2
    coeff_rows = [(r, zeta[r], abs(zeta[r]) < 1e-10) for r in range(args.r_max + 1)]
    summary_rows = [
        ("sigma_w2", sw2),
        ("sigma_x2", sx2),
        ("sigma_b2", sb2),
        ("sigma_d2", sd2),
        ("sigma_tilde2", st2),
        ("norm_sq", norm2),
        ("tail", norm2 - float(zeta @ zeta)),
        ("a", a),
        ("b", b),
        ("sigma_y2", norm2 + sd2),
    ]
    coeff_header = ["r", "zeta", "is_zero"]
    summary_header = ["quantity", "value"]
    print(f"activation {f.name!r} rescaled to input variance {st2!r}")
    _print_table(coeff_header, coeff_rows)
    print()
    _print_table(summary_header, summary_rows)
    if args.out is not None:
        _ensure_outdir(args.out)
        stamp = None if args.no_timestamp else _stamp()
        write_table(args.out, "coeffs", coeff_header, coeff_rows, args.formats, stamp)
        write_table(args.out, "coeffs_summary", summary_header, summary_rows, args.formats, stamp)
    return EXIT_OK


def cmd_density(cfg: ExperimentConfig, args) -> int:
    spec = to_network_spec(cfg)
    chain = _build_chain(cfg, spec)
    chi = chain.layers[-1].chi
    xs = cfg.z_grid.points()
    etas = cfg.z_grid.eta

    def one_eta(eta):
        # nested input measures solve their own fixed points inside this
        # call, so divergence can surface as an exception rather than a
        # cleared flag; either way the whole table is still written
        try:
            g, ok = chi.stieltjes_checked(xs + 1j * eta)
            dens = np.where(ok, np.maximum(g.imag, 0.0) / math.pi, np.nan)
        except DivergenceError:
            dens = np.full(xs.shape, np.nan)
            ok = np.zeros(xs.shape, dtype=bool)
        try:
            cdf = chi.cdf(xs, eta)
            cdf_ok = True
        except DivergenceError:
            cdf = np.full(xs.shape, np.nan)
            cdf_ok = False
        return dens, cdf, ok, cdf_ok

    per_eta = _pool.pmap(one_eta, etas)
    header = ["x"]
    for eta in etas:
        t = _eta_tag(eta)
        header += [f"density_eta{t}", f"cdf_eta{t}", f"converged_eta{t}"]
    rows = []
    for i, x in enumerate(xs):
        row = [x]
        for dens, cdf, ok, cdf_ok in per_eta:
            row += [dens[i], cdf[i], bool(ok[i]) and cdf_ok]
        rows.append(row)
    outdir = args.out if args.out is not None else cfg.output.directory
    _ensure_outdir(outdir)
    stamp = None if args.no_timestamp else _stamp()
    formats = args.formats or cfg.output.formats
    paths = write_table(outdir, "density", header, rows, formats, stamp)
    bad = sum(int(np.sum(~ok)) + int(not cdf_ok) for _, _, ok, cdf_ok in per_eta)
    for p in paths:
        print(f"wrote {p}")
    if bad:
        print(f"{bad} grid point(s) did not converge; see converged_* columns", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _resolved_seeds(cfg: ExperimentConfig, args) -> tuple:
    if args.seed is not None:
        return (args.seed,)
    return cfg.sim.seeds


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    spec = to_network_spec(cfg)
    seeds = _resolved_seeds(cfg, args)
    results = _pool.pmap(lambda s: run_network(spec, (), s), seeds)
    eig_rows = []
    stat_rows = []
    for res in results:
        for layer, lam in enumerate(res.eigenvalues):
            eig_rows.extend(
                (res.seed, layer, idx, float(v)) for idx, v in enumerate(lam)
            )
        for layer, st in enumerate(res.stats):
            stat_rows.append((res.seed, layer, st.max_dev, st.diag_norm, st.spec_norm))
    outdir = args.out if args.out is not None else cfg.output.directory
    _ensure_outdir(outdir)
    stamp = None if args.no_timestamp else _stamp()
    formats = args.formats or cfg.output.formats
    paths = write_table(
        outdir, "simulate_eigenvalues", ["seed", "layer", "index", "eigenvalue"], eig_rows, formats, stamp
    )
    paths += write_table(
        outdir,
        "simulate_stats",
        ["seed", "layer", "max_dev", "diag_norm", "spec_norm"],
        stat_rows,
        formats,
        stamp,
    )
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    spec = to_network_spec(cfg)
    chain = _build_chain(cfg, spec)
    seeds = _resolved_seeds(cfg, args)
    xs = cfg.z_grid.points()
    zs = np.array([complex(x, eta) for eta in cfg.z_grid.eta for x in xs])
    results = _pool.pmap(lambda s: run_network(spec, (), s), seeds)
    n = spec.n
    rows = []
    layer_rows = []
    n_bad = 0
    for li, layer in enumerate(chain.layers, start=1):
        try:
            g_det, ok = layer.chi.stieltjes_checked(zs)
        except DivergenceError:
            g_det = np.full(zs.shape, np.nan, dtype=complex)
            ok = np.zeros(zs.shape, dtype=bool)
        factories = [SpectralFactory(res.kernels[li]) for res in results]
        g_sim = np.array([[fac.stieltjes(z) for z in zs] for fac in factories])
        g_mean = g_sim.mean(axis=0)
        g_std = g_sim.std(axis=0)
        for j, z in enumerate(zs):
            gap = np.nan
            if ok[j]:
                try:
                    g_eq = layer.gbuilder(complex(z))
                    gap = max(
                        float(np.max(np.abs(fac.resolvent(complex(z)) - g_eq)))
                        for fac in factories
                    )
                except (DivergenceError, ArithmeticError):
                    ok[j] = False
            if not ok[j]:
                n_bad += 1
            rows.append(
                (
                    li,
                    z.real,
                    z.imag,
                    g_mean[j].real,
                    g_mean[j].imag,
                    float(g_std[j]),
                    g_det[j].real if ok[j] else np.nan,
                    g_det[j].imag if ok[j] else np.nan,
                    abs(g_mean[j] - g_det[j]) if ok[j] else np.nan,
                    gap,
                    bool(ok[j]),
                )
            )
        lo = min(layer.chi.support_min(), min(float(r.eigenvalues[li][0]) for r in results))
        hi = max(layer.chi.support_max(), max(float(r.eigenvalues[li][-1]) for r in results))
        pad = 0.05 * max(hi - lo, 1.0)
        grid = np.linspace(lo - pad, hi + pad, 801)
        try:
            ks = float(
                np.mean(
                    [
                        kolmogorov_distance(esd_from_eigenvalues(r.eigenvalues[li]), layer.chi, grid)
                        for r in results
                    ]
                )
            )
        except DivergenceError:
            ks = np.nan
            n_bad += 1
        stats = np.array([results[k].stats[li] for k in range(len(results))])
        layer_rows.append((li, ks, *stats.mean(axis=0)))
    outdir = args.out if args.out is not None else cfg.output.directory
    _ensure_outdir(outdir)
    stamp = None if args.no_timestamp else _stamp()
    formats = args.formats or cfg.output.formats
    row_header = [
        "layer",
        "z_re",
        "z_im",
        "g_sim_mean_re",
        "g_sim_mean_im",
        "g_sim_std",
        "g_det_re",
        "g_det_im",
        "abs_dg",
        "max_entry_gap",
        "converged",
    ]
    paths = write_table(outdir, "compare_rows", row_header, rows, formats, stamp)
    paths += write_table(
        outdir,
        "compare_layers",
        ["layer", "kolmogorov", "max_dev", "diag_norm", "spec_norm"],
        layer_rows,
        formats,
        stamp,
    )
    for p in paths:
        print(f"wrote {p}")
    print(f"{len(seeds)} seed(s), {zs.size} grid point(s), {chain.depth} layer(s)")
    if n_bad:
        print(f"{n_bad} row(s) did not converge", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_example55(cfg: ExperimentConfig, args) -> int:
    if args.n < 2:
        raise ConfigError("--n must be >= 2")
    solver = cfg.solver.fixed_point()
    if args.a is None or args.b is None:
        const = layer_constants(
            LayerSpec(1.0, 1.0, 1.0, activation_by_name("tanh"), 1.0), 1.0
        )
        a = float(const.a) if args.a is None else args.a
        b = float(const.b) if args.b is None else args.b
    else:
        a, b = args.a, args.b
    if a < 0 or b < 0:
        raise ConfigError("a and b must be nonnegative")
    n = args.n
    sigma = np.full((n, n), b / n)
    np.fill_diagonal(sigma, a + b)
    xs = cfg.z_grid.points()
    zs = [complex(x, eta) for eta in cfg.z_grid.eta for x in xs]
    rows = []
    for z in zs:
        g, g_mat = equicorrelated_equivalent(n, a, b, z, solver)
        g_generic = gbox_from_sigma(sigma, 1.0, z, solver)
        agreement = float(np.linalg.norm(g_mat - g_generic, 2))
        trace_gap = abs(np.trace(g_mat) / n - g)
        rows.append((z.real, z.imag, g.real, g.imag, agreement, trace_gap))
    sweep_rows = []
    g_inf = mp_stieltjes_closed(1.0, 1j / (a + b)) / (a + b)
    for m in (100, 1000, 10000):
        gm = equicorrelated_stieltjes(m, a, b, 1j, solver)
        sweep_rows.append((m, abs(gm - g_inf)))
    grid_header = ["z_re", "z_im", "g_re", "g_im", "agreement", "trace_gap"]
    sweep_header = ["n", "abs_gap_at_i"]
    print(f"n={n}, a={a!r}, b={b!r}")
    _print_table(grid_header, rows)
    print()
    _print_table(sweep_header, sweep_rows)
    outdir = args.out if args.out is not None else cfg.output.directory
    _ensure_outdir(outdir)
    stamp = None if args.no_timestamp else _stamp()
    formats = args.formats or cfg.output.formats
    paths = write_table(outdir, "example55_grid", grid_header, rows, formats, stamp)
    paths += write_table(outdir, "example55_sweep", sweep_header, sweep_rows, formats, stamp)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckequiv",
        description="deterministic spectral equivalents of random-feature kernels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output_flags(p):
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument(
            "--format",
            dest="formats",
            action="append",
            choices=("csv", "json"),
            default=None,
            help="output format; repeat for several (overrides config)",
        )
        p.add_argument(
            "--no-timestamp",
            action="store_true",
            help="omit the generated-at line so identical runs are byte-identical",
        )

    p = sub.add_parser("coeffs", help="Hermite coefficients and layer constants")
    p.add_argument("activation", help="activation name (see hermite.ACTIVATIONS)")
    p.add_argument("--r-max", type=int, default=20)
    p.add_argument("--sigma-tilde2", type=float, default=None, help="set the rescaling variance directly (implies sigma_w2=sigma_tilde2, sigma_x2=1, sigma_b2=0)")
    p.add_argument("--sigma-w2", type=float, default=1.0)
    p.add_argument("--sigma-x2", type=float, default=1.0)
    p.add_argument("--sigma-b2", type=float, default=0.0)
    p.add_argument("--sigma-d2", type=float, default=0.0)
    add_output_flags(p)

    for name, needs_seed in (("density", False), ("simulate", True), ("compare", True)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        if needs_seed:
            p.add_argument("--seed", type=int, default=None, help="single-seed override of sim.seeds")
        add_output_flags(p)

    p = sub.add_parser("example55", help="equicorrelated closed form vs generic builder")
    p.add_argument("--config", default=None, help="optional config for z grid / solver / output")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--a", type=float, default=None, help="linear-term offset (default: tanh layer)")
    p.add_argument("--b", type=float, default=None, help="linear-term weight (default: tanh layer)")
    add_output_flags(p)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "coeffs":
            args.formats = tuple(args.formats) if args.formats else ("csv",)
            return cmd_coeffs(args)
        if args.command == "example55":
            cfg = load_config(args.config) if args.config else ExperimentConfig()
            args.formats = tuple(args.formats) if args.formats else None
            return cmd_example55(cfg, args)
        cfg = load_config(args.config)
        args.formats = tuple(args.formats) if args.formats else None
        if args.command == "density":
            return cmd_density(cfg, args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        return cmd_compare(cfg, args)
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, ArithmeticError) as ex:
        print(f"numerical divergence: {ex}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as ex:
        print(f"i/o error: {ex}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
