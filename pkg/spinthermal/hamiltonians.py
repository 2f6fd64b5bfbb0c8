"""Hamiltonians of two XXZ spins, the disordered XXZ chain and the fitted two-spin model.

Basis convention (used everywhere in the package): site 1 is the least significant bit of a
basis integer and bit value 1 means spin up. For two spins this gives the ordering
``{|dd>, |ud>, |du>, |uu>} = {0b00, 0b01, 0b10, 0b11}``, where the first letter is site 1.
Spin operators are S = sigma / 2 and k_B = 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from spinthermal.config import Settings
from spinthermal.errors import ValidationError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12


def _check_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class PairSpec:
    """Two spins: H = J(SxSx + SySy + gamma SzSz) + h1 Sz1 + h2 Sz2."""
    J: float
    gamma: float
    h1: float
    h2: float

    def __post_init__(self):
        _check_finite(J=self.J, gamma=self.gamma, h1=self.h1, h2=self.h2)

    @classmethod
    def from_field_sum(cls, J: float, gamma: float, h_sum: float, delta_h: float) -> "PairSpec":
        """Build from h1 + h2 and delta_h = (h1 - h2) / J."""
        diff = delta_h * J
        return cls(J=J, gamma=gamma, h1=(h_sum + diff) / 2, h2=(h_sum - diff) / 2)

    @property
    def h_sum(self) -> float:
        return self.h1 + self.h2

    @property
    def delta_h(self) -> float:
        if self.J == 0:
            raise ValidationError("delta_h = (h1 - h2) / J is undefined for J = 0")
        return (self.h1 - self.h2) / self.J

    @property
    def xi(self) -> float:
        return math.sqrt(1.0 + self.delta_h ** 2) / 2


@dataclass(frozen=True)
class ChainSpec:
    """Open XXZ chain with random longitudinal fields, lambda * h_i in [-lambda, lambda]."""
    n_sites: int
    J: float
    gamma: float
    lam: float
    fields: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(float(h) for h in self.fields))
        if self.n_sites < 2:
            raise ValidationError(f"chain needs L >= 2, got {self.n_sites}")
        if len(self.fields) != self.n_sites:
            raise ValidationError(
                f"expected {self.n_sites} fields, got {len(self.fields)}"
            )
        _check_finite(J=self.J, gamma=self.gamma, lam=self.lam)
        if self.lam < 0:
            raise ValidationError(f"disorder intensity must be >= 0, got {self.lam}")
        for i, h in enumerate(self.fields, start=1):
            if not (-1.0 <= h <= 1.0):
                raise ValidationError(f"field h_{i} = {h} outside [-1, 1]")

    @property
    def scaled_fields(self) -> np.ndarray:
        return self.lam * np.asarray(self.fields, dtype=float)

    def pair_spec(self, i: int, j: int) -> PairSpec:
        """Two-spin parameters seen by sites i, j (1-based) with their lambda-scaled fields."""
        check_pair_sites(self.n_sites, i, j)
        h = self.scaled_fields
        return PairSpec(J=self.J, gamma=self.gamma, h1=float(h[i - 1]), h2=float(h[j - 1]))


@dataclass(frozen=True)
class EffectiveSpec:
    """Two-spin model with coupling scaled by 1 + alpha0 and fields by 1 + alpha1, 1 + alpha2.

    alpha0 is not a free parameter: it is always (alpha1 + alpha2) / 2.
    """
    base: PairSpec
    alpha1: float = 0.0
    alpha2: float = 0.0

    def __post_init__(self):
        _check_finite(alpha1=self.alpha1, alpha2=self.alpha2)

    @property
    def alpha0(self) -> float:
        return (self.alpha1 + self.alpha2) / 2

    def scaled_pair(self) -> PairSpec:
        b = self.base
        return PairSpec(
            J=(1.0 + self.alpha0) * b.J,
            gamma=b.gamma,
            h1=(1.0 + self.alpha1) * b.h1,
            h2=(1.0 + self.alpha2) * b.h2,
        )


@dataclass(frozen=True)
class SectorBlock:
    magnetization: int
    basis: np.ndarray
    matrix: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class SectorBlocks:
    """Chain Hamiltonian split by number of up spins."""
    n_sites: int
    blocks: Tuple[SectorBlock, ...] = field(default_factory=tuple)

    @property
    def dimension(self) -> int:
        return 1 << self.n_sites

    def block(self, magnetization: int) -> SectorBlock:
        for b in self.blocks:
            if b.magnetization == magnetization:
                return b
        raise KeyError(magnetization)

    def to_dense(self, settings: Optional[Settings] = None) -> np.ndarray:
        """Reassemble the full matrix in computational-basis order."""
        (settings or Settings.from_env()).check_sites(self.n_sites, dense=True)
        full = np.zeros((self.dimension, self.dimension))
        for b in self.blocks:
            full[np.ix_(b.basis, b.basis)] = b.matrix
        return full


def check_pair_sites(n_sites: int, i: int, j: int):
    """Reject pairs that are not 1 <= i < j <= n_sites."""
    if not (1 <= i < j <= n_sites):
        raise ValidationError(f"sites ({i}, {j}) must satisfy 1 <= i < j <= {n_sites}")


def pair_sites(n_sites: int, separation: int = 0) -> Tuple[int, int]:
    """Sites of a pair with ``separation`` spins between them, centered in the chain.

    separation = 0 gives the middle pair (L/2, L/2 + 1) for even L.
    """
    if separation < 0 or separation > n_sites - 2:
        raise ValidationError(
            f"separation {separation} does not fit in a chain of {n_sites} sites"
        )
    i = -(-(n_sites - separation) // 2)
    return i, i + separation + 1


def two_spin_hamiltonian(spec: PairSpec) -> np.ndarray:
    """4x4 XXZ pair Hamiltonian in the basis (down-down, up-down, down-up, up-up)."""
    J, g, h1, h2 = spec.J, spec.gamma, spec.h1, spec.h2
    hs, hd = (h1 + h2) / 2, (h1 - h2) / 2
    H = np.diag([g * J / 4 - hs, -g * J / 4 + hd, -g * J / 4 - hd, g * J / 4 + hs])
    H[1, 2] = H[2, 1] = J / 2
    return H


def effective_hamiltonian(spec: EffectiveSpec) -> np.ndarray:
    """Pair Hamiltonian with coupling and fields scaled by (1 + alpha)."""
    return two_spin_hamiltonian(spec.scaled_pair())


def _popcount(states: np.ndarray, n_sites: int) -> np.ndarray:
    counts = np.zeros_like(states)
    for k in range(n_sites):
        counts += (states >> k) & 1
    return counts


def sz_sector_index(n_sites: int, settings: Optional[Settings] = None) -> Dict[int, np.ndarray]:
    """Sorted basis integers of each up-spin count m = 0..L."""
    if n_sites < 2:
        raise ValidationError(f"chain needs L >= 2, got {n_sites}")
    (settings or Settings.from_env()).check_sites(n_sites)
    states = np.arange(1 << n_sites, dtype=np.int64)
    counts = _popcount(states, n_sites)
    return {m: states[counts == m] for m in range(n_sites + 1)}


def _sector_matrix(spec: ChainSpec, basis: np.ndarray) -> np.ndarray:
    n = len(basis)
    H = np.zeros((n, n))
    h = spec.scaled_fields
    rows = np.arange(n)
    diag = np.zeros(n)

    for k in range(spec.n_sites):
        diag += h[k] * (((basis >> k) & 1) - 0.5)

    for k in range(spec.n_sites - 1):
        bi = (basis >> k) & 1
        bj = (basis >> (k + 1)) & 1
        diag += spec.J * spec.gamma * (bi - 0.5) * (bj - 0.5)
        flip = bi != bj
        if spec.J != 0 and flip.any():
            targets = basis[flip] ^ (3 << k)
            cols = np.searchsorted(basis, targets)
            H[rows[flip], cols] = spec.J / 2

    H[rows, rows] = diag
    return H


def chain_hamiltonian(spec: ChainSpec, settings: Optional[Settings] = None) -> SectorBlocks:
    """Sector-blocked Hamiltonian of the open disordered XXZ chain."""
    settings = settings or Settings.from_env()
    sectors = sz_sector_index(spec.n_sites, settings)
    blocks = []
    for m, basis in sectors.items():
        blocks.append(SectorBlock(magnetization=m, basis=basis, matrix=_sector_matrix(spec, basis)))
        logger.debug("assembled sector m=%d of dimension %d", m, len(basis))
    return SectorBlocks(n_sites=spec.n_sites, blocks=tuple(blocks))


_SZ = np.diag([-0.5, 0.5])
_SP = np.array([[0.0, 0.0], [1.0, 0.0]])
_SM = _SP.T


def _site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    # Kronecker order runs from site L (most significant bit) down to site 1.
    out = np.ones((1, 1))
    for s in range(n_sites, 0, -1):
        out = np.kron(out, op if s == site else np.eye(2))
    return out


def chain_hamiltonian_dense(spec: ChainSpec, settings: Optional[Settings] = None) -> np.ndarray:
    """Full 2^L matrix of the chain built from Kronecker products (L <= 12)."""
    (settings or Settings.from_env()).check_sites(spec.n_sites, dense=True)
    L = spec.n_sites
    h = spec.scaled_fields
    sz = [_site_operator(_SZ, s, L) for s in range(1, L + 1)]
    sp = [_site_operator(_SP, s, L) for s in range(1, L + 1)]
    sm = [_site_operator(_SM, s, L) for s in range(1, L + 1)]

    H = np.zeros((1 << L, 1 << L))
    for i in range(L - 1):
        flip_flop = (sp[i] @ sm[i + 1] + sm[i] @ sp[i + 1]) / 2
        H += spec.J * (flip_flop + spec.gamma * sz[i] @ sz[i + 1])
    for i in range(L):
        H += h[i] * sz[i]
    return H


def is_symmetric(matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    """True when the matrix equals its conjugate transpose to within tol."""
    return bool(np.max(np.abs(matrix - matrix.conj().T), initial=0.0) < tol)


def spin_sector_of(states: Sequence[int], n_sites: int) -> np.ndarray:
    """Up-spin count of each basis integer."""
    return _popcount(np.asarray(states, dtype=np.int64), n_sites)
