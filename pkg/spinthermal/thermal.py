"""Spectral decompositions, Gibbs states and two-spin reduced density matrices."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg

from spinthermal.config import Settings
from spinthermal.errors import (
    EigensolverError,
    UndefinedCouplingError,
    ValidationError,
)
from spinthermal.hamiltonians import PairSpec, SectorBlocks, check_pair_sites, is_symmetric

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-12
GROUND_WINDOW = 1e-10
DENSE_TAG = -1


@dataclass(frozen=True)
class SectorSpectrum:
    """Eigenpairs of one block. ``vectors`` columns live on ``basis``."""
    tag: int
    basis: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order with the sector each one came from."""
    eigenvalues: np.ndarray
    sector_tags: np.ndarray
    sectors: Tuple[SectorSpectrum, ...]
    dimension: int

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max_energy(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def n_sites(self) -> int:
        return int(round(math.log2(self.dimension)))

    def dense_eigenvectors(self, settings: Optional[Settings] = None) -> np.ndarray:
        """Eigenvectors as full-space columns, ordered like ``eigenvalues``."""
        if self.dimension > 4:
            (settings or Settings.from_env()).check_sites(self.n_sites, dense=True)
        columns = []
        for s in self.sectors:
            cols = np.zeros((self.dimension, len(s.energies)), dtype=s.vectors.dtype)
            cols[s.basis, :] = s.vectors
            columns.append(cols)
        V = np.hstack(columns)
        energies = np.concatenate([s.energies for s in self.sectors])
        return V[:, np.argsort(energies, kind="stable")]


@dataclass(frozen=True)
class ThermalState:
    """Gibbs state kept as eigenvectors and Boltzmann weights, sector by sector.

    ``log_z`` is the shifted log partition function log sum exp(-beta (e - e_min)).
    """
    decomposition: SpectralDecomposition
    beta: float
    weights: Tuple[np.ndarray, ...]
    log_z: float

    def mean_energy(self) -> float:
        return float(sum(np.dot(w, s.energies) for w, s in zip(self.weights, self.decomposition.sectors)))

    def purity(self) -> float:
        """tr(rho^2) of the full state."""
        return float(sum(np.dot(w, w) for w in self.weights))


@dataclass(frozen=True)
class DensityMatrix4:
    """Two-qubit density matrix in the basis {|dd>, |ud>, |du>, |uu>}."""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValidationError(f"two-qubit density matrix must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("density matrix has non-finite entries")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"density matrix is not Hermitian (deviation {herm:.3g})")
        trace = np.trace(m).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {trace!r}, expected 1")
        lowest = np.linalg.eigvalsh(m)[0]
        if lowest < -PSD_TOL:
            raise ValidationError(f"density matrix has negative eigenvalue {lowest:.3g}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def coerce(cls, rho) -> "DensityMatrix4":
        return rho if isinstance(rho, cls) else cls(rho)

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def is_x_state(self, tol: float = 1e-10) -> bool:
        """Zero everywhere except the diagonal and the (|ud>, |du>) coherence."""
        mask = np.ones((4, 4), dtype=bool)
        np.fill_diagonal(mask, False)
        mask[1, 2] = mask[2, 1] = False
        return bool(np.max(np.abs(self.matrix[mask])) < tol)


@dataclass(frozen=True)
class GibbsElements:
    """Nonzero entries of the two-spin Gibbs state: u, v on the corners, w, w' and z in the middle."""
    u: float
    v: float
    w: float
    w_prime: float
    z: float

    def matrix(self) -> np.ndarray:
        m = np.diag([self.u, self.w, self.w_prime, self.v]).astype(complex)
        m[1, 2] = m[2, 1] = self.z
        return m


@dataclass(frozen=True)
class EnergyScales:
    E0: float
    Emax: float
    Einf: float
    Ebar: float
    DeltaE: float

    @property
    def normalized_energy(self) -> float:
        """Ebar / (Einf - E0); -1 in the ground state, 0 at infinite temperature."""
        span = self.Einf - self.E0
        if span <= 0:
            return 0.0
        return self.Ebar / span


def _eigh_block(tag, basis, matrix) -> SectorSpectrum:
    try:
        energies, vectors = scipy.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(str(e), block=tag)
    logger.debug("diagonalized block %s (dimension %d)", tag, len(basis))
    return SectorSpectrum(tag=tag, basis=basis, energies=energies, vectors=vectors)


def diagonalize(hamiltonian: Union[SectorBlocks, np.ndarray], workers: int = 1) -> SpectralDecomposition:
    """Diagonalize a dense symmetric matrix or every block of a sector-blocked Hamiltonian.

    Blocks are independent, so ``workers > 1`` solves them on a thread pool; the merged
    spectrum does not depend on the worker count.
    """
    if isinstance(hamiltonian, SectorBlocks):
        jobs = [(b.magnetization, b.basis, b.matrix) for b in hamiltonian.blocks]
        dimension = hamiltonian.dimension
    else:
        matrix = np.asarray(hamiltonian)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("Hamiltonian has non-finite entries")
        dimension = matrix.shape[0]
        jobs = [(DENSE_TAG, np.arange(dimension, dtype=np.int64), matrix)]

    for tag, _, matrix in jobs:
        if not is_symmetric(matrix):
            raise ValidationError(f"block {tag} is not symmetric")

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            sectors = list(executor.map(lambda job: _eigh_block(*job), jobs))
    else:
        sectors = [_eigh_block(*job) for job in jobs]

    energies = np.concatenate([s.energies for s in sectors])
    tags = np.concatenate([np.full(len(s.energies), s.tag) for s in sectors])
    order = np.argsort(energies, kind="stable")
    return SpectralDecomposition(
        eigenvalues=energies[order],
        sector_tags=tags[order],
        sectors=tuple(sectors),
        dimension=dimension,
    )


def _check_beta(beta: float, allow_infinite: bool = True):
    if math.isnan(beta) or beta < 0:
        raise ValidationError(f"beta must be >= 0, got {beta!r}")
    if math.isinf(beta) and not allow_infinite:
        raise ValidationError("beta must be finite here")


def thermal_state(decomp: SpectralDecomposition, beta: float) -> ThermalState:
    """Boltzmann weights of every eigenstate; beta = inf mixes the ground space uniformly."""
    _check_beta(beta)
    e_min = decomp.ground_energy

    if math.isinf(beta):
        window = GROUND_WINDOW * max(1.0, abs(e_min))
        masks = [s.energies <= e_min + window for s in decomp.sectors]
        count = sum(int(m.sum()) for m in masks)
        weights = tuple(m / count for m in masks)
        return ThermalState(decomp, beta, weights, math.log(count))

    raw = [np.exp(-beta * (s.energies - e_min)) for s in decomp.sectors]
    total = float(sum(r.sum() for r in raw))
    weights = tuple(r / total for r in raw)
    return ThermalState(decomp, beta, weights, math.log(total))


def gibbs_state(decomp: SpectralDecomposition, beta: float,
                settings: Optional[Settings] = None) -> np.ndarray:
    """Full density matrix e^{-beta H} / Z (dense path, dimension <= 2^12)."""
    state = thermal_state(decomp, beta)
    if decomp.dimension > 4:
        (settings or Settings.from_env()).check_sites(decomp.n_sites, dense=True)
    rho = np.zeros((decomp.dimension, decomp.dimension))
    for w, s in zip(state.weights, decomp.sectors):
        keep = w > 0
        V = s.vectors[:, keep]
        rho[np.ix_(s.basis, s.basis)] = (V * w[keep]) @ V.conj().T
    return rho


def scaled_gibbs_terms(spec: PairSpec, beta: float):
    """Pieces of the closed-form two-spin Gibbs state, all multiplied by e^{-M}."""
    if spec.J == 0:
        raise UndefinedCouplingError("the closed-form two-spin Gibbs state")
    _check_beta(beta, allow_infinite=False)
    xi = spec.xi
    g = spec.gamma * beta * spec.J / 2
    x = abs(xi * beta * spec.J)
    s = spec.h_sum * beta / 2
    M = max(g + x, abs(s))
    up, down = math.exp(g + x - M), math.exp(g - x - M)
    return {
        "xi": xi,
        "sign": math.copysign(1.0, spec.J),
        "cosh": 0.5 * (up + down),
        "sinh": 0.5 * (up - down),
        "field_plus": math.exp(s - M),
        "field_minus": math.exp(-s - M),
        "unit": math.exp(-M),
    }


def two_spin_gibbs_elements(spec: PairSpec, beta: float) -> GibbsElements:
    """Closed-form entries of the two-spin Gibbs state.

    With D = e^{gamma beta J/2} cosh(xi beta J) + cosh((h1+h2) beta/2):
    u = e^{beta(h1+h2)/2}/(2D), v = e^{-beta(h1+h2)/2}/(2D),
    z = -e^{gamma beta J/2} sinh(xi beta J)/(4 xi D) and
    w, w' = e^{gamma beta J/2}[cosh(xi beta J) -/+ (delta_h/(2 xi)) sinh(xi beta J)]/(2D).
    """
    t = scaled_gibbs_terms(spec, beta)
    xi, sign = t["xi"], t["sign"]
    denom = t["cosh"] + 0.5 * (t["field_plus"] + t["field_minus"])
    tilt = spec.delta_h / (2 * xi) * sign * t["sinh"]
    return GibbsElements(
        u=t["field_plus"] / (2 * denom),
        v=t["field_minus"] / (2 * denom),
        w=(t["cosh"] - tilt) / (2 * denom),
        w_prime=(t["cosh"] + tilt) / (2 * denom),
        z=-sign * t["sinh"] / (4 * xi * denom),
    )


def _reduce_sector(basis: np.ndarray, scaled_vectors: np.ndarray, i: int, j: int, out: np.ndarray):
    mask = (1 << (i - 1)) | (1 << (j - 1))
    pair = ((basis >> (i - 1)) & 1) + 2 * ((basis >> (j - 1)) & 1)
    rest = basis & ~mask
    groups = {}
    for p in range(4):
        rows = np.nonzero(pair == p)[0]
        if len(rows):
            groups[p] = (rows, rest[rows])

    for p, (rows_p, rest_p) in groups.items():
        for q, (rows_q, rest_q) in groups.items():
            # rest_* are sorted because basis is sorted and the pair bits are fixed.
            _, ip, iq = np.intersect1d(rest_p, rest_q, assume_unique=True, return_indices=True)
            if len(ip) == 0:
                continue
            a = scaled_vectors[rows_p[ip]]
            b = scaled_vectors[rows_q[iq]]
            out[p, q] += np.sum(a * b.conj())


def partial_trace_pair(state: Union[ThermalState, np.ndarray], sites: Tuple[int, int]) -> DensityMatrix4:
    """Reduced state of sites (i, j) (1-based), everything else traced out.

    ``state`` is either a full density matrix or a ThermalState; the latter is reduced
    sector by sector without building the 2^L x 2^L matrix.
    """
    i, j = sites
    out = np.zeros((4, 4), dtype=complex)

    if isinstance(state, ThermalState):
        n_sites = state.decomposition.n_sites
        check_pair_sites(n_sites, i, j)
        for w, s in zip(state.weights, state.decomposition.sectors):
            keep = w > 0
            if not keep.any():
                continue
            scaled = s.vectors[:, keep] * np.sqrt(w[keep])
            _reduce_sector(s.basis, scaled, i, j, out)
    else:
        rho = np.asarray(state)
        dim = rho.shape[0]
        n_sites = int(round(math.log2(dim)))
        if rho.shape != (dim, dim) or (1 << n_sites) != dim:
            raise ValidationError(f"full density matrix must be 2^L square, got {rho.shape}")
        check_pair_sites(n_sites, i, j)
        # Tensor axis 0 is site L (most significant bit).
        axis_i, axis_j = n_sites - i, n_sites - j
        others = [a for a in range(n_sites) if a not in (axis_i, axis_j)]
        perm = others + [axis_j, axis_i]
        t = rho.reshape([2] * (2 * n_sites))
        t = t.transpose(perm + [n_sites + a for a in perm])
        rest = 1 << (n_sites - 2)
        out = np.einsum("rarb->ab", t.reshape(rest, 4, rest, 4)).astype(complex)

    return DensityMatrix4(out)


def energy_scales(decomp: SpectralDecomposition, beta: float) -> EnergyScales:
    """Ground, infinite-temperature and thermal mean energies of the spectrum at beta."""
    state = thermal_state(decomp, beta)
    E0, Emax = decomp.ground_energy, decomp.max_energy
    Einf = float(np.mean(decomp.eigenvalues))
    Ebar = Einf if beta == 0 else min(max(state.mean_energy(), E0), Emax)
    return EnergyScales(E0=E0, Emax=Emax, Einf=Einf, Ebar=Ebar, DeltaE=(Emax - E0) / 3)
