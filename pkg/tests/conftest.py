import numpy as np
import pytest

from spinthermal.config import MAX_SITES_ENV, Settings
from spinthermal.hamiltonians import ChainSpec


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv(MAX_SITES_ENV, raising=False)


@pytest.fixture
def settings():
    return Settings()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density_matrix(rng, rank=4):
    """Random two-qubit state rho = A A^dag / tr, A complex 4 x rank."""
    a = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = a @ a.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_chain(rng, n_sites, lam=1.0, J=1.0, gamma=0.4):
    fields = tuple(rng.uniform(-1.0, 1.0, size=n_sites))
    return ChainSpec(n_sites=n_sites, J=J, gamma=gamma, lam=lam, fields=fields)


def brute_force_partial_trace(rho, n_sites, i, j):
    """Index-sum oracle: rho_ij[p, q] = sum over the other bits r of rho[(p, r), (q, r)]."""
    dim = 1 << n_sites
    mask = (1 << (i - 1)) | (1 << (j - 1))
    out = np.zeros((4, 4), dtype=complex)
    for a in range(dim):
        for b in range(dim):
            if (a & ~mask) != (b & ~mask):
                continue
            p = ((a >> (i - 1)) & 1) + 2 * ((a >> (j - 1)) & 1)
            q = ((b >> (i - 1)) & 1) + 2 * ((b >> (j - 1)) & 1)
            out[p, q] += rho[a, b]
    return out
