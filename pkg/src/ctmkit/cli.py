"""Command-line front end: ``ctm scatter | evolve | decompose | verify``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.  ``verify``
exits with the number of failed verdicts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core_grid import SpatialGrid, default_grid
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
log = logging.getLogger("ctmkit")


# ---------------------------------------------------------------------------
# input parsing

def load_config(path):
    """(config, grid) from a JSON file; raises ConfigError with a location on failure."""
    from .potentials import ChargeTransferConfig

    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    config = ChargeTransferConfig.from_dict(doc)
    g = doc.get("grid", {})
    if not isinstance(g, dict):
        raise ConfigError(f"{path}: grid: expected an object")
    try:
        grid = default_grid(int(g.get("n", 4096)), float(g.get("half_width", 64.0 * np.pi)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: grid: {exc}") from None
    return config, grid


def _kv(spec: str) -> dict:
    out = {}
    for part in filter(None, spec.split(",")):
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"{k}: not a number: {v!r}") from None
    return out


def read_field(path, grid: SpatialGrid, ncomp: int) -> np.ndarray:
    """Field from CSV columns x, re_psi1, im_psi1[, re_psi2, im_psi2]."""
    try:
        a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot read field ({exc})") from None
    if a.shape[0] != grid.n or a.shape[1] < 1 + 2 * ncomp:
        raise ConfigError(f"{path}: expected {grid.n} rows and {1 + 2 * ncomp} columns, got {a.shape}")
    if np.max(np.abs(a[:, 0] - grid.x)) > 1e-6 * grid.dx + 1e-9:
        raise ConfigError(f"{path}: x column does not match the configured grid")
    f = np.stack([a[:, 1 + 2 * c] + 1j * a[:, 2 + 2 * c] for c in range(ncomp)])
    return f[0] if ncomp == 1 else f


def initial_field(spec: str, config, grid: SpatialGrid) -> np.ndarray:
    """``gaussian:x0=..,width=..,k0=..``, ``mode:center=..,index=..`` or a CSV path."""
    from .dispersive_map import mode_catalog, mode_field

    ncomp = 2 if config.model == "matrix" else 1
    name, _, rest = spec.partition(":")
    if name == "gaussian":
        p = {"x0": 0.0, "width": 1.0, "k0": 0.0, **_kv(rest)}
        g = np.exp(-((grid.x - p["x0"]) ** 2) / (2 * p["width"] ** 2) + 1j * p["k0"] * grid.x)
        return g if ncomp == 1 else np.stack([g, np.zeros_like(g)])
    if name == "mode":
        p = {"center": 1, "index": 0, **_kv(rest)}
        for ref in mode_catalog(config):
            if ref.center == int(p["center"]) and ref.index == int(p["index"]):
                return mode_field(config, ref, 0.0, grid)
        raise ConfigError(f"no discrete mode with center={int(p['center'])}, index={int(p['index'])}")
    if Path(spec).is_file():
        return read_field(spec, grid, ncomp)
    raise ConfigError(f"--psi0: unknown field spec {spec!r}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_scatter(args) -> int:
    from .spectral import detect_threshold_resonance, discrete_spectrum, scattering_coefficients

    config, _ = load_config(args.config)
    k = np.linspace(-args.k_max, args.k_max, args.nk)
    rows, spectra, res = [], [], []
    for i, p in enumerate(config.potentials):
        d = scattering_coefficients(p, k, check=False)
        rows.append((i + 1, d))
        spectra.append({"center": i + 1, **discrete_spectrum(p).to_dict()} if not p.is_zero
                       else {"center": i + 1, "eigenvalues": [], "counts": {}})
        res.append({"center": i + 1, **detect_threshold_resonance(p).to_dict()})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scattering.csv", "w") as fh:
        fh.write("center,k,re_r,im_r,re_s,im_s\n")
        for c, d in rows:
            for row in zip(d.k, d.r.real, d.r.imag, d.s.real, d.s.imag):
                fh.write(f"{c}," + ",".join(f"{v:.17g}" for v in row) + "\n")
    (out / "spectrum.json").write_text(json.dumps({"centers": spectra}, indent=2, sort_keys=True) + "\n")
    (out / "resonance.json").write_text(json.dumps({"centers": res}, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_evolve(args) -> int:
    from .evolution import propagate

    config, grid = load_config(args.config)
    psi0 = initial_field(args.psi0, config, grid)
    traj = propagate(config, psi0, args.t_final, args.dt, grid, n_samples=args.samples)
    traj.to_csv(args.out)
    return EXIT_OK


def cmd_decompose(args) -> int:
    from .dispersive_map import decompose

    config, grid = load_config(args.config)
    f = read_field(args.field, grid, 2 if config.model == "matrix" else 1)
    dec = decompose(f, config, grid, args.t, param_band=args.param_band)
    dec.to_json(args.out)
    return EXIT_OK


def _config_suite(args):
    from . import harness
    from .dispersive_map import bump_profile, build_profile_sequence, domain_exclusions, evaluate_S

    config, grid = load_config(args.config)
    ex = domain_exclusions(config, grid)
    rng = np.random.default_rng(args.seed)
    phi = np.zeros(grid.n, complex)
    for k0 in (-1.0, 1.0):
        if all(abs(k0 - a) > w + 0.6 for a, w in ex):
            phi += bump_profile(grid, k0, 0.6, rng.uniform(-3, 3))
    nc = 2 if config.model == "matrix" else 1
    psi0 = np.atleast_2d(evaluate_S(build_profile_sequence(np.atleast_2d(phi).repeat(nc, 0), config, grid),
                                    config, 0.0, grid))
    big = grid.resized(4)
    psi0 = harness.embed(psi0, grid, big)
    traj = harness.decay_run(config, psi0, big, dt=args.dt)
    return [harness.decay_linfty_experiment(config, psi0, big, trajectory=traj),
            harness.decay_weighted_experiment(config, psi0, big, trajectory=traj)]


def cmd_verify(args) -> int:
    from . import harness

    if args.suite == "config":
        if not args.config:
            raise ConfigError("--suite config needs --config")
        results = _config_suite(args)
        for r in results:
            r.write(args.out)
            print(r.line())
    else:
        if args.suite not in harness.SUITES:
            raise ConfigError(f"unknown suite {args.suite!r}; choose from {sorted(harness.SUITES) + ['config']}")
        results = harness.run_suite(args.suite, args.out)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} verdicts passed")
    return failed


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctm", description="Charge-transfer model toolkit")
    ap.add_argument("--threads", type=int, default=None, help="worker threads for compiled kernels")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scatter", help="scattering data, discrete spectra and resonance reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k-max", type=float, default=20.0)
    p.add_argument("--nk", type=int, default=801)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("evolve", help="time integration with trajectory export")
    p.add_argument("--config", required=True)
    p.add_argument("--psi0", required=True, help="gaussian:x0=..,width=..,k0=.. | mode:center=..,index=.. | CSV path")
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--samples", type=int, default=11)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("decompose", help="split a field into S(phi) and traveling modes")
    p.add_argument("--config", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--param-band", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="run a verification suite; exit code = failed verdicts")
    p.add_argument("--suite", default="acceptance")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
        try:
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        except ImportError:
            pass
    try:
        return int(args.func(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
