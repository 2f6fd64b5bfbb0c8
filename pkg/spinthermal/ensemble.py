"""Disorder sampling, per-realization pipelines and disorder-averaged statistics."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from spinthermal.config import Settings
from spinthermal.effective_fit import FitConfig, FitResult, effective_energy, fit_alphas
from spinthermal.entanglement import analytic_concurrence, concurrence, eof, threshold_beta
from spinthermal.errors import (
    IndeterminateThresholdError,
    RealizationError,
    SpinThermalError,
    ValidationError,
)
from spinthermal.hamiltonians import ChainSpec, PairSpec, chain_hamiltonian, check_pair_sites, pair_sites
from spinthermal.thermal import diagonalize, energy_scales, partial_trace_pair, thermal_state

logger = logging.getLogger(__name__)

# Disorder stream: numpy Philox (counter-based) keyed by a SeedSequence child per realization.
PRNG_NAME = "numpy.random.Philox"
PRNG_VERSION = 1
ZERO_CONCURRENCE = 1e-12

ProgressCallback = Callable[[int, int], None]


@dataclass(frozen=True)
class EnsembleConfig:
    """Parameters of a disorder-averaged run.

    ``pair`` selects explicit sites; when None the pairs are the centered ones for each
    entry of ``separations`` (0 is the middle pair).
    """
    n_sites: int = 12
    J: float = 1.0
    gamma: float = 0.4
    lambdas: Tuple[float, ...] = (0.5, 4.0)
    betas: Tuple[float, ...] = (0.2, 1.0, 5.0)
    realizations: int = 200
    master_seed: int = 0
    pair: Optional[Tuple[int, int]] = None
    separations: Tuple[int, ...] = (0,)
    fit_enabled: bool = False
    fit: FitConfig = field(default_factory=FitConfig)

    def validate(self, settings: Optional[Settings] = None):
        settings = settings or Settings.from_env()
        if self.n_sites < 2:
            raise ValidationError(f"chain needs L >= 2, got {self.n_sites}")
        settings.check_sites(self.n_sites)
        if self.realizations < 1:
            raise ValidationError("realization count must be >= 1")
        if not self.lambdas or not self.betas:
            raise ValidationError("need at least one lambda and one beta")
        if any(lam < 0 or not math.isfinite(lam) for lam in self.lambdas):
            raise ValidationError("lambda values must be finite and >= 0")
        if any(math.isnan(b) or b < 0 for b in self.betas):
            raise ValidationError("beta values must be >= 0")
        if self.master_seed < 0:
            raise ValidationError("master seed must be >= 0")
        for i, j in self.pairs():
            check_pair_sites(self.n_sites, i, j)
        if self.fit_enabled:
            self.fit.validate()

    def pairs(self) -> List[Tuple[int, int]]:
        if self.pair is not None:
            return [tuple(self.pair)]
        if not self.separations:
            raise ValidationError("need at least one separation")
        return [pair_sites(self.n_sites, n) for n in self.separations]


@dataclass(frozen=True)
class PairObservation:
    lam: float
    beta: float
    separation: int
    sites: Tuple[int, int]
    concurrence: float
    eof: float
    purity: float
    E0: float
    Einf: float
    Ebar: float
    normalized_energy: float
    fit: Optional[FitResult] = None
    fit_normalized_energy: Optional[float] = None


@dataclass(frozen=True)
class RealizationRecord:
    index: int
    seed: int
    fields: Tuple[float, ...]
    observations: Tuple[PairObservation, ...]

    def get(self, lam: float, beta: float, separation: int) -> PairObservation:
        for obs in self.observations:
            if obs.lam == lam and obs.beta == beta and obs.separation == separation:
                return obs
        raise KeyError((lam, beta, separation))


@dataclass(frozen=True)
class RealizationFailure:
    index: int
    seed: int
    message: str


@dataclass(frozen=True)
class CellStats:
    mean_eof: float
    var_eof: float
    stderr_eof: float
    min_eof: float
    max_eof: float
    mean_concurrence: float
    mean_normalized_energy: float
    mean_fit_normalized_energy: Optional[float]
    count: int


@dataclass(frozen=True)
class EnsembleStats:
    """Disorder averages keyed by (lambda, beta, separation). Variances divide by N."""
    cells: Dict[Tuple[float, float, int], CellStats]
    realizations: int
    failures: int

    def cell(self, lam: float, beta: float, separation: int = 0) -> CellStats:
        return self.cells[(lam, beta, separation)]


@dataclass(frozen=True)
class EnsembleResult:
    config: EnsembleConfig
    stats: EnsembleStats
    records: Tuple[RealizationRecord, ...]
    failures: Tuple[RealizationFailure, ...]


@dataclass(frozen=True)
class MatchedEoF:
    lam: float
    energy: float
    mean_eof: float
    stderr_eof: float


@dataclass(frozen=True)
class DistanceRow:
    lam: float
    beta: float
    separation: int
    sites: Tuple[int, int]
    mean_eof: float
    var_eof: float
    count: int


@dataclass(frozen=True)
class DistanceSummary:
    lam: float
    beta: float
    n_star: Optional[int]
    decay_length: Optional[float]


@dataclass(frozen=True)
class DistanceTable:
    rows: Tuple[DistanceRow, ...]
    summaries: Tuple[DistanceSummary, ...]
    result: EnsembleResult


@dataclass(frozen=True)
class PhaseMap:
    gamma: float
    h_sum: float
    J: float
    delta_h: np.ndarray
    betas: np.ndarray
    concurrence: np.ndarray
    eof: np.ndarray
    thresholds: Tuple[Optional[float], ...]


def realization_seed(master_seed: int, index: int) -> int:
    """64-bit seed of realization ``index``, split from the master seed."""
    child = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(child.generate_state(1, dtype=np.uint64)[0])


def sample_disorder(seed: int, n_sites: int) -> np.ndarray:
    """n_sites fields i.i.d. uniform on [-1, 1]."""
    if n_sites < 2:
        raise ValidationError(f"chain needs L >= 2, got {n_sites}")
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.uniform(-1.0, 1.0, size=n_sites)


def _eof_of(C: float) -> float:
    return 0.0 if C < ZERO_CONCURRENCE else eof(C)


def run_realization(config: EnsembleConfig, seed: int, index: int = 0,
                    settings: Optional[Settings] = None) -> RealizationRecord:
    """Build, diagonalize and analyse one disorder realization for every lambda in the config."""
    settings = settings or Settings.from_env()
    try:
        fields = sample_disorder(seed, config.n_sites)
        pairs = config.pairs()
        observations = []
        for lam in config.lambdas:
            spec = ChainSpec(config.n_sites, config.J, config.gamma, lam, tuple(fields))
            decomp = diagonalize(chain_hamiltonian(spec, settings))
            for beta in config.betas:
                state = thermal_state(decomp, beta)
                scales = energy_scales(decomp, beta)
                for sites in pairs:
                    induced = partial_trace_pair(state, sites)
                    C = concurrence(induced).C
                    separation = sites[1] - sites[0] - 1
                    fit = fit_energy = None
                    if config.fit_enabled and separation == 0:
                        base = spec.pair_spec(*sites)
                        fit = fit_alphas(induced, base, beta, config.fit)
                        fit_energy = effective_energy(base, fit.alpha1, fit.alpha2, beta).normalized_energy
                    observations.append(PairObservation(
                        lam=lam, beta=beta, separation=separation, sites=tuple(sites),
                        concurrence=C, eof=_eof_of(C), purity=induced.purity,
                        E0=scales.E0, Einf=scales.Einf, Ebar=scales.Ebar,
                        normalized_energy=scales.normalized_energy,
                        fit=fit, fit_normalized_energy=fit_energy,
                    ))
    except SpinThermalError as e:
        raise RealizationError(e.message, seed)
    except Exception as e:
        logger.exception("realization %d (seed %d) raised unexpectedly", index, seed)
        raise RealizationError(f"{type(e).__name__}: {e}", seed) from e
    return RealizationRecord(index=index, seed=seed, fields=tuple(float(h) for h in fields),
                             observations=tuple(observations))


def _aggregate(config: EnsembleConfig, records: Sequence[RealizationRecord], failures: int) -> EnsembleStats:
    cells = {}
    if not records:
        return EnsembleStats(cells=cells, realizations=0, failures=failures)
    keys = [(o.lam, o.beta, o.separation) for o in records[0].observations]
    for key in keys:
        obs = [r.get(*key) for r in records]
        e = np.array([o.eof for o in obs])
        mean = float(np.mean(e))
        var = float(np.mean((e - mean) ** 2))
        fit_energies = [o.fit_normalized_energy for o in obs if o.fit_normalized_energy is not None]
        cells[key] = CellStats(
            mean_eof=mean,
            var_eof=var,
            stderr_eof=math.sqrt(var / len(e)),
            min_eof=float(e.min()),
            max_eof=float(e.max()),
            mean_concurrence=float(np.mean([o.concurrence for o in obs])),
            mean_normalized_energy=float(np.mean([o.normalized_energy for o in obs])),
            mean_fit_normalized_energy=float(np.mean(fit_energies)) if fit_energies else None,
            count=len(obs),
        )
    return EnsembleStats(cells=cells, realizations=len(records), failures=failures)


def run_ensemble(config: EnsembleConfig, workers: int = 1,
                 progress: Optional[ProgressCallback] = None,
                 settings: Optional[Settings] = None) -> EnsembleResult:
    """Run every realization (possibly on a thread pool) and aggregate by realization index.

    Results do not depend on ``workers`` or on completion order. Failed realizations are
    collected and left out of the statistics.
    """
    settings = settings or Settings.from_env()
    config.validate(settings)
    seeds = [realization_seed(config.master_seed, i) for i in range(config.realizations)]
    logger.info("running %d realizations of L=%d on %d worker(s)", len(seeds), config.n_sites, workers)

    records: Dict[int, RealizationRecord] = {}
    failures: Dict[int, RealizationFailure] = {}
    done = 0

    def finish(index, record=None, error=None):
        nonlocal done
        if error is None:
            records[index] = record
        else:
            logger.warning("realization %d failed: %s", index, error)
            failures[index] = RealizationFailure(index, seeds[index], str(error))
        done += 1
        if progress:
            progress(done, len(seeds))

    if workers <= 1:
        for i, seed in enumerate(seeds):
            try:
                finish(i, record=run_realization(config, seed, i, settings))
            except RealizationError as e:
                finish(i, error=e)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(run_realization, config, seed, i, settings): i
                for i, seed in enumerate(seeds)
            }
            for future in as_completed(futures):
                i = futures[future]
                try:
                    finish(i, record=future.result())
                except RealizationError as e:
                    finish(i, error=e)

    ordered = tuple(records[i] for i in sorted(records))
    failed = tuple(failures[i] for i in sorted(failures))
    if failed:
        logger.info("%d of %d realizations failed", len(failed), len(seeds))
    stats = _aggregate(config, ordered, len(failed))
    return EnsembleResult(config=config, stats=stats, records=ordered, failures=failed)


def energy_threshold(stats: EnsembleStats, lam: float, separation: int = 0) -> Optional[float]:
    """Normalized energy at which mean EoF first reaches zero going from cold to hot.

    The line through the last two entangled points is continued to EoF = 0 and clamped to
    the interval between the last entangled and the first separable energy. None when the
    scan never crosses zero.
    """
    cells = [
        cell for _, cell in sorted(
            ((beta, cell) for (l, beta, n), cell in stats.cells.items() if l == lam and n == separation),
            key=lambda item: -item[0],
        )
    ]
    for k in range(1, len(cells)):
        cold, hot = cells[k - 1], cells[k]
        if not (cold.mean_eof > 0 and hot.mean_eof == 0):
            continue
        e_cold, e_hot = cold.mean_normalized_energy, hot.mean_normalized_energy
        if k < 2 or cells[k - 2].mean_eof <= 0:
            return e_hot
        # Extend the line through the last two entangled points to EoF = 0.
        colder = cells[k - 2]
        de = e_cold - colder.mean_normalized_energy
        slope = (cold.mean_eof - colder.mean_eof) / de if de != 0 else 0.0
        if slope >= 0:
            return e_hot
        crossing = e_cold - cold.mean_eof / slope
        return float(min(max(crossing, e_cold), e_hot))
    return None


def eof_at_energy(stats: EnsembleStats, lam: float, energy: float,
                  separation: int = 0) -> Optional[MatchedEoF]:
    """Mean EoF of one lambda interpolated to a given normalized energy.

    Cells are ordered by mean normalized energy and both the mean and its standard error
    are interpolated linearly. None when ``energy`` lies outside the sampled range.
    """
    cells = sorted(
        (cell for (l, _, n), cell in stats.cells.items() if l == lam and n == separation),
        key=lambda cell: cell.mean_normalized_energy,
    )
    if not cells:
        raise ValidationError(f"no statistics for lambda={lam!r}, separation={separation}")
    energies = np.array([c.mean_normalized_energy for c in cells])
    if not energies[0] <= energy <= energies[-1]:
        return None
    mean = np.interp(energy, energies, [c.mean_eof for c in cells])
    stderr = np.interp(energy, energies, [c.stderr_eof for c in cells])
    return MatchedEoF(lam, float(energy), float(mean), float(stderr))


def common_energy_range(stats: EnsembleStats, lambdas: Sequence[float],
                        separation: int = 0) -> Optional[Tuple[float, float]]:
    """Normalized-energy interval sampled by every lambda, or None if they do not overlap."""
    lo, hi = -math.inf, math.inf
    for lam in lambdas:
        energies = [c.mean_normalized_energy for (l, _, n), c in stats.cells.items()
                    if l == lam and n == separation]
        if not energies:
            return None
        lo, hi = max(lo, min(energies)), min(hi, max(energies))
    return (lo, hi) if lo <= hi else None


def _decay_length(separations: Sequence[int], means: Sequence[float]) -> Optional[float]:
    points = [(n, m) for n, m in zip(separations, means) if m > 0]
    if len(points) < 2:
        return None
    n, m = zip(*points)
    slope, _ = np.polyfit(np.asarray(n, dtype=float), np.log(m), 1)
    if slope >= 0:
        return None
    return float(-1.0 / slope)


def distance_sweep(config: EnsembleConfig, workers: int = 1,
                   progress: Optional[ProgressCallback] = None,
                   settings: Optional[Settings] = None,
                   result: Optional[EnsembleResult] = None) -> DistanceTable:
    """Mean EoF against separation n for every (lambda, beta), with the vanishing point n*.

    n* is the smallest separation from which the mean EoF is zero for all larger
    separations in the sweep.
    """
    if config.pair is not None:
        raise ValidationError("distance sweeps use centered pairs; drop the explicit pair")
    if result is None:
        result = run_ensemble(config, workers=workers, progress=progress, settings=settings)
    stats = result.stats
    separations = sorted(config.separations)

    rows, summaries = [], []
    for lam in config.lambdas:
        for beta in config.betas:
            means = []
            for n in separations:
                cell = stats.cell(lam, beta, n)
                means.append(cell.mean_eof)
                rows.append(DistanceRow(lam, beta, n, pair_sites(config.n_sites, n),
                                        cell.mean_eof, cell.var_eof, cell.count))
            n_star = None
            for n, mean in reversed(list(zip(separations, means))):
                if mean != 0.0:
                    break
                n_star = n
            summaries.append(DistanceSummary(lam, beta, n_star, _decay_length(separations, means)))
    return DistanceTable(rows=tuple(rows), summaries=tuple(summaries), result=result)


def two_spin_phase_map(gamma: float, h_sum: float, delta_h: Sequence[float],
                       betas: Sequence[float], J: float = 1.0) -> PhaseMap:
    """Analytic concurrence and EoF over a (delta_h, beta) grid with thresholds per delta_h."""
    if J == 0:
        raise ValidationError("phase map needs J != 0")
    delta_h = np.asarray(delta_h, dtype=float)
    betas = np.asarray(betas, dtype=float)
    C = np.zeros((len(delta_h), len(betas)))
    E = np.zeros_like(C)
    thresholds = []
    for a, dh in enumerate(delta_h):
        spec = PairSpec.from_field_sum(J=J, gamma=gamma, h_sum=h_sum, delta_h=float(dh))
        for b, beta in enumerate(betas):
            C[a, b] = analytic_concurrence(spec, float(beta))
            E[a, b] = _eof_of(C[a, b])
        try:
            result = threshold_beta(spec)
        except IndeterminateThresholdError as e:
            logger.warning("no threshold for delta_h=%g: %s", dh, e.message)
            result = None
        thresholds.append(result.beta_c if result is not None and result.is_finite else None)
    return PhaseMap(gamma, h_sum, J, delta_h, betas, C, E, tuple(thresholds))
