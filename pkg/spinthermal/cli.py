"""Command-line front end: one subcommand per pipeline, CSV output plus a JSON manifest."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from spinthermal.config import Settings, load_config_file, resolve_options
from spinthermal.effective_fit import FitConfig
from spinthermal.ensemble import (
    PRNG_NAME,
    PRNG_VERSION,
    EnsembleConfig,
    common_energy_range,
    distance_sweep,
    energy_threshold,
    eof_at_energy,
    realization_seed,
    run_ensemble,
    run_realization,
    two_spin_phase_map,
)
from spinthermal.entanglement import threshold_beta, threshold_beta_deltaE
from spinthermal.errors import (
    IndeterminateThresholdError,
    SpinThermalError,
    UndefinedCouplingError,
    ValidationError,
)
from spinthermal.hamiltonians import PairSpec
from spinthermal.output import write_manifest, write_table
from spinthermal.version import __version__

logger = logging.getLogger(__name__)

CHAIN_DEFAULTS = {
    "L": 12,
    "J": 1.0,
    "gamma": 0.4,
    "lambdas": [0.5, 4.0],
    "beta": [0.2, 1.0, 5.0],
    "seed": None,
    "threads": 1,
    "out": ".",
    "sites": None,
    "separation": [0],
}

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "two-spin": {
        "gamma": 0.4, "J": 1.0, "hsum": 0.0,
        "delta_h": ["0:3:0.1"], "beta": ["0:20:0.25"], "out": ".",
    },
    "threshold": {"gamma": [1.0], "J": [1.0], "hsum": 0.0, "delta_h": [0.0], "out": "."},
    "chain": dict(CHAIN_DEFAULTS),
    "fit": dict(CHAIN_DEFAULTS, lambdas=[0.3, 4.0], realizations=1, fit_config={}),
    "ensemble": dict(CHAIN_DEFAULTS, realizations=200, fit=False, fit_config={}),
    "distance": dict(CHAIN_DEFAULTS, lambdas=[4.0], realizations=200, separation=None),
}


def parse_grid(values, name: str) -> List[float]:
    """Flatten numbers and ``a:b:step`` ranges (b included when hit) into a list."""
    if values is None:
        return []
    if isinstance(values, (str, int, float)):
        values = [values]
    out: List[float] = []
    for v in values:
        if isinstance(v, str) and ":" in v:
            try:
                a, b, step = (float(x) for x in v.split(":"))
            except ValueError:
                raise ValidationError(f"--{name}: bad range {v!r}, expected a:b:step")
            if not step > 0:
                raise ValidationError(f"--{name}: range step must be positive in {v!r}")
            n = math.floor((b - a) / step + 1e-9)
            out.extend(float(x) for x in np.round(a + step * np.arange(n + 1), 12))
        else:
            try:
                out.append(float(v))
            except (TypeError, ValueError):
                raise ValidationError(f"--{name}: not a number: {v!r}")
    return out


def _require(values: Sequence, name: str):
    if not values:
        raise ValidationError(f"--{name}: empty grid")


@contextmanager
def _progress(total: int, label: str):
    bar = tqdm(total=total, desc=label, file=sys.stderr, disable=None, leave=False)
    last = [0]

    def update(done, _total):
        bar.update(done - last[0])
        last[0] = done

    try:
        yield update
    finally:
        bar.close()


def _ensemble_config(opts: Dict[str, Any], realizations: int, fit: bool) -> EnsembleConfig:
    betas = parse_grid(opts["beta"], "beta")
    _require(betas, "beta")
    separations = opts.get("separation")
    if separations is None:
        separations = list(range(0, min(opts["L"] - 2, 6) + 1))
    sites = opts.get("sites")
    return EnsembleConfig(
        n_sites=int(opts["L"]),
        J=float(opts["J"]),
        gamma=float(opts["gamma"]),
        lambdas=tuple(float(x) for x in opts["lambdas"]),
        betas=tuple(betas),
        realizations=int(realizations),
        master_seed=int(opts["seed"]),
        pair=tuple(int(s) for s in sites) if sites else None,
        separations=tuple(int(n) for n in separations),
        fit_enabled=fit,
        fit=FitConfig.from_mapping(opts.get("fit_config") or {}),
    )


def _header(command: str, opts: Dict[str, Any], **extra) -> Dict[str, Any]:
    header = {"command": command, "version": __version__}
    header.update({k: v for k, v in sorted(opts.items()) if k not in ("out", "threads")})
    header.update(extra)
    return header


def cmd_two_spin(opts: Dict[str, Any], out: Path) -> List[Path]:
    """Analytic concurrence and EoF over the (delta_h, beta) grid."""
    delta_h = parse_grid(opts["delta_h"], "delta-h")
    betas = parse_grid(opts["beta"], "beta")
    _require(delta_h, "delta-h")
    _require(betas, "beta")
    pm = two_spin_phase_map(float(opts["gamma"]), float(opts["hsum"]), delta_h, betas, J=float(opts["J"]))
    rows = (
        (dh, beta, pm.concurrence[a, b], pm.eof[a, b])
        for a, dh in enumerate(delta_h)
        for b, beta in enumerate(betas)
    )
    path = write_table(out / "two_spin.csv", _header("two-spin", opts),
                       ["delta_h", "beta", "concurrence", "eof"], rows)
    return [path]


def _threshold_row(gamma: float, J: float, hsum: float, dh: float):
    try:
        spec = PairSpec.from_field_sum(J=J, gamma=gamma, h_sum=hsum, delta_h=dh)
        result = threshold_beta(spec)
    except UndefinedCouplingError:
        return [gamma, J, hsum, dh, "undefined", None, None, None, None, None]
    except IndeterminateThresholdError as e:
        logger.warning("gamma=%g J=%g delta_h=%g: %s", gamma, J, dh, e.message)
        return [gamma, J, hsum, dh, "indeterminate", None, None, None, None, None]

    row = [gamma, J, hsum, dh, result.kind, result.beta_c, result.residual]
    if hsum == 0 and J > 0:
        try:
            de = threshold_beta_deltaE(gamma, dh)
            row += [de.value, de.consistent, de.in_validity_range]
        except IndeterminateThresholdError as e:
            logger.warning("gamma=%g delta_h=%g: %s", gamma, dh, e.message)
            row += [None, None, None]
    else:
        row += [None, None, None]
    return row


def cmd_threshold(opts: Dict[str, Any], out: Path) -> List[Path]:
    """Threshold betas over the (gamma, J, delta_h) grid."""
    gammas = parse_grid(opts["gamma"], "gamma")
    couplings = parse_grid(opts["J"], "J")
    delta_h = parse_grid(opts["delta_h"], "delta-h")
    for values, name in ((gammas, "gamma"), (couplings, "J"), (delta_h, "delta-h")):
        _require(values, name)
    hsum = float(opts["hsum"])
    rows = [
        _threshold_row(g, J, hsum, dh)
        for g in gammas for J in couplings for dh in delta_h
    ]
    columns = ["gamma", "J", "hsum", "delta_h", "status", "beta_c", "residual",
               "beta_delta_e_c", "delta_e_consistent", "delta_e_in_range"]
    return [write_table(out / "threshold.csv", _header("threshold", opts), columns, rows)]


def cmd_chain(opts: Dict[str, Any], out: Path) -> List[Path]:
    """Induced-pair observables of a single disorder realization."""
    config = _ensemble_config(opts, realizations=1, fit=False)
    settings = Settings.from_env()
    config.validate(settings)
    seed = realization_seed(config.master_seed, 0)
    record = run_realization(config, seed, 0, settings)
    rows = (
        (record.seed, o.lam, o.beta, o.separation, o.sites[0], o.sites[1], o.concurrence, o.eof,
         o.purity, o.E0, o.Einf, o.Ebar, o.normalized_energy)
        for o in record.observations
    )
    columns = ["seed", "lambda", "beta", "separation", "site_i", "site_j", "concurrence", "eof",
               "purity", "E0", "Einf", "Ebar", "normalized_energy"]
    header = _header("chain", opts, fields=list(record.fields))
    return [write_table(out / "chain.csv", header, columns, rows)]


def _run(config: EnsembleConfig, opts: Dict[str, Any], label: str):
    with _progress(config.realizations, label) as update:
        result = run_ensemble(config, workers=int(opts["threads"]), progress=update)
    if not result.records:
        raise SpinThermalError(f"all {config.realizations} realizations failed")
    return result


def cmd_fit(opts: Dict[str, Any], out: Path) -> List[Path]:
    """Effective two-spin fits of adjacent induced pairs."""
    opts = dict(opts, separation=[0])
    config = _ensemble_config(opts, realizations=opts["realizations"], fit=True)
    result = _run(config, opts, "fit")
    rows = []
    for r in result.records:
        for o in r.observations:
            if o.fit is None:
                continue
            f = o.fit
            rows.append((r.index, r.seed, o.lam, o.beta, o.sites[0], o.sites[1], f.D_unfitted,
                         f.D_fitted, f.alpha1, f.alpha2, f.alpha0, f.iterations, f.converged,
                         o.eof, o.fit_normalized_energy))
    columns = ["realization", "seed", "lambda", "beta", "site_i", "site_j", "D_unfitted",
               "D_fitted", "alpha1", "alpha2", "alpha0", "iterations", "converged", "eof",
               "fit_normalized_energy"]
    header = _header("fit", opts, prng=PRNG_NAME, failures=len(result.failures))
    return [write_table(out / "fit.csv", header, columns, rows)]


def _record_rows(result):
    for r in result.records:
        for o in r.observations:
            fit = o.fit
            yield (r.index, r.seed, o.lam, o.beta, o.separation, o.sites[0], o.sites[1],
                   o.concurrence, o.eof, o.purity, o.normalized_energy,
                   fit.D_unfitted if fit else None, fit.D_fitted if fit else None)


def cmd_ensemble(opts: Dict[str, Any], out: Path) -> List[Path]:
    """Per-realization records and disorder-averaged statistics."""
    config = _ensemble_config(opts, realizations=opts["realizations"], fit=bool(opts["fit"]))
    result = _run(config, opts, "ensemble")
    header = _header("ensemble", opts, prng=PRNG_NAME, failures=len(result.failures))

    records = write_table(
        out / "ensemble_records.csv", header,
        ["realization", "seed", "lambda", "beta", "separation", "site_i", "site_j",
         "concurrence", "eof", "purity", "normalized_energy", "D_unfitted", "D_fitted"],
        _record_rows(result),
    )

    stats = result.stats
    thresholds = {
        f"energy_threshold[lambda={lam!r}]": energy_threshold(stats, lam) for lam in config.lambdas
    }
    matched = {}
    span = common_energy_range(stats, config.lambdas)
    if len(config.lambdas) > 1 and span is not None:
        # Coldest energy reached by every lambda; value is "mean stderr".
        matched["matched_energy"] = span[0]
        for lam in config.lambdas:
            m = eof_at_energy(stats, lam, span[0])
            matched[f"eof_at_matched_energy[lambda={lam!r}]"] = [m.mean_eof, m.stderr_eof]
    rows = (
        (lam, beta, n, c.count, c.mean_eof, c.var_eof, c.stderr_eof, c.mean_concurrence,
         c.mean_normalized_energy, c.mean_fit_normalized_energy)
        for (lam, beta, n), c in stats.cells.items()
    )
    stats_path = write_table(
        out / "ensemble_stats.csv", dict(header, **thresholds, **matched),
        ["lambda", "beta", "separation", "count", "mean_eof", "var_eof", "stderr_eof",
         "mean_concurrence", "mean_normalized_energy", "mean_fit_normalized_energy"],
        rows,
    )
    return [records, stats_path]


def cmd_distance(opts: Dict[str, Any], out: Path) -> List[Path]:
    """Mean EoF against pair separation, with n* and decay length."""
    config = _ensemble_config(dict(opts, sites=None), realizations=opts["realizations"], fit=False)
    table = distance_sweep(config, result=_run(config, opts, "distance"))
    header = _header("distance", opts, prng=PRNG_NAME, failures=len(table.result.failures))
    stats_path = write_table(
        out / "distance_stats.csv", header,
        ["lambda", "beta", "separation", "site_i", "site_j", "count", "mean_eof", "var_eof"],
        ((r.lam, r.beta, r.separation, r.sites[0], r.sites[1], r.count, r.mean_eof, r.var_eof)
         for r in table.rows),
    )
    summary_path = write_table(
        out / "distance_summary.csv", header,
        ["lambda", "beta", "n_star", "decay_length"],
        ((s.lam, s.beta, s.n_star, s.decay_length) for s in table.summaries),
    )
    return [stats_path, summary_path]


COMMANDS: Dict[str, Callable[[Dict[str, Any], Path], List[Path]]] = {
    "two-spin": cmd_two_spin,
    "threshold": cmd_threshold,
    "chain": cmd_chain,
    "fit": cmd_fit,
    "ensemble": cmd_ensemble,
    "distance": cmd_distance,
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", metavar="DIR", help="output directory (default: current)")
    p.add_argument("--config", metavar="FILE", help="JSON config file or a previous manifest.json")


def _add_chain_options(p: argparse.ArgumentParser, realizations: bool = True):
    p.add_argument("--L", type=int, help="number of sites")
    p.add_argument("--J", type=float, help="coupling energy")
    p.add_argument("--gamma", type=float, help="z anisotropy")
    p.add_argument("--lambda", dest="lambdas", type=float, action="append",
                   help="disorder intensity (repeatable)")
    p.add_argument("--beta", action="append", help="inverse temperature, repeatable or a:b:step")
    p.add_argument("--seed", type=int, help="master seed (random when omitted, always recorded)")
    p.add_argument("--threads", type=int, help="worker threads for realizations")
    p.add_argument("--sites", type=int, nargs=2, metavar=("I", "J"), help="explicit pair of sites")
    p.add_argument("--separation", type=int, action="append",
                   help="spins between the pair (repeatable)")
    if realizations:
        p.add_argument("--realizations", type=int, help="number of disorder realizations")
    _add_common(p)


def _add_fit_options(p: argparse.ArgumentParser):
    p.add_argument("--fit-option", dest="fit_option", action="append", metavar="KEY=VALUE",
                   help="fit setting such as grid_step=0.05 or grid_lo=-0.5,-0.9 (repeatable)")


def _parse_fit_options(values: Sequence[str]) -> Dict[str, str]:
    parsed = {}
    for v in values:
        key, sep, value = v.partition("=")
        if not sep or not key.strip():
            raise ValidationError(f"--fit-option: expected KEY=VALUE, got {v!r}")
        parsed[key.strip()] = value.strip()
    return parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinthermal",
        description="Thermal entanglement of two spins, alone and inside disordered XXZ chains.",
    )
    parser.add_argument("--version", action="version", version=f"spinthermal {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("two-spin", help="analytic EoF over a (delta_h, beta) grid")
    p.add_argument("--gamma", type=float)
    p.add_argument("--J", type=float)
    p.add_argument("--hsum", type=float, help="h1 + h2")
    p.add_argument("--delta-h", dest="delta_h", action="append", help="(h1-h2)/J, repeatable or a:b:step")
    p.add_argument("--beta", action="append", help="repeatable or a:b:step")
    _add_common(p)

    p = sub.add_parser("threshold", help="threshold inverse temperatures")
    p.add_argument("--gamma", action="append", help="repeatable or a:b:step")
    p.add_argument("--J", action="append", help="repeatable")
    p.add_argument("--hsum", type=float)
    p.add_argument("--delta-h", dest="delta_h", action="append", help="repeatable or a:b:step")
    _add_common(p)

    _add_chain_options(sub.add_parser("chain", help="one disorder realization"), realizations=False)
    p = sub.add_parser("fit", help="effective two-spin fits of induced states")
    _add_chain_options(p)
    _add_fit_options(p)
    p = sub.add_parser("ensemble", help="disorder-averaged entanglement")
    _add_chain_options(p)
    p.add_argument("--fit", action=argparse.BooleanOptionalAction, default=None,
                   help="also fit the effective two-spin Hamiltonian")
    _add_fit_options(p)
    _add_chain_options(sub.add_parser("distance", help="entanglement against pair separation"))
    return parser


def _resolve(command: str, args: argparse.Namespace) -> Dict[str, Any]:
    file_options = load_config_file(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    fit_flags = flags.pop("fit_option", None)
    opts = resolve_options(DEFAULTS[command], file_options, flags)
    if "fit_config" in opts:
        if not isinstance(opts["fit_config"], dict):
            raise ValidationError("fit_config must be a JSON object")
        merged = dict(opts["fit_config"], **_parse_fit_options(fit_flags or []))
        opts["fit_config"] = dict(sorted(merged.items()))
    if "seed" in opts and opts["seed"] is None:
        opts["seed"] = int(np.random.SeedSequence().entropy % (1 << 63))
    if "threads" in opts and int(opts["threads"]) < 1:
        raise ValidationError("--threads must be >= 1")
    return opts


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        opts = _resolve(args.command, args)
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command](opts, out)
        extra = {"prng": {"name": PRNG_NAME, "version": PRNG_VERSION}}
        write_manifest(out, args.command, opts, opts.get("seed"), files, extra=extra)
    except ValidationError as e:
        parser.print_usage(sys.stderr)
        print(f"spinthermal {args.command}: error: {e.message}", file=sys.stderr)
        return e.code
    except SpinThermalError as e:
        print(f"spinthermal {args.command}: {e.message}", file=sys.stderr)
        return e.code
    return 0
