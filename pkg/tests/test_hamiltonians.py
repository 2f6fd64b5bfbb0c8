import math

import numpy as np
import pytest

from conftest import random_chain
from spinthermal.config import Settings
from spinthermal.errors import ResourceLimitError, ValidationError
from spinthermal.hamiltonians import (
    ChainSpec,
    EffectiveSpec,
    PairSpec,
    chain_hamiltonian,
    chain_hamiltonian_dense,
    effective_hamiltonian,
    is_symmetric,
    pair_sites,
    spin_sector_of,
    sz_sector_index,
    two_spin_hamiltonian,
)


def test_xxx_pair_is_singlet_triplet():
    H = two_spin_hamiltonian(PairSpec(J=1.0, gamma=1.0, h1=0.0, h2=0.0))
    assert np.allclose(np.linalg.eigvalsh(H), [-0.75, 0.25, 0.25, 0.25], atol=1e-14)


def test_pair_basis_order():
    # |ud> (site 1 up) sees +h1/2 - h2/2 from the fields
    H = two_spin_hamiltonian(PairSpec(J=0.0, gamma=0.0, h1=1.0, h2=0.0))
    assert np.allclose(np.diag(H), [-0.5, 0.5, -0.5, 0.5])


@pytest.mark.parametrize("J,gamma,h1,h2", [
    (1.0, 0.4, 0.3, -0.7),
    (-1.0, 1.0, 0.0, 0.0),
    (2.0, -0.5, 1.0, 1.0),
])
def test_two_site_chain_matches_pair(J, gamma, h1, h2):
    chain = ChainSpec(n_sites=2, J=J, gamma=gamma, lam=1.0, fields=(h1, h2))
    pair = two_spin_hamiltonian(PairSpec(J=J, gamma=gamma, h1=h1, h2=h2))
    assert np.allclose(chain_hamiltonian_dense(chain), pair, atol=1e-14)
    assert np.allclose(chain_hamiltonian(chain).to_dense(), pair, atol=1e-14)


@pytest.mark.parametrize("n_sites", [3, 5, 6, 10])
def test_blocks_match_dense(rng, n_sites):
    spec = random_chain(rng, n_sites, lam=2.5)
    blocked = chain_hamiltonian(spec).to_dense()
    dense = chain_hamiltonian_dense(spec)
    assert np.allclose(blocked, dense, atol=1e-13)
    assert is_symmetric(dense)


def test_blocks_conserve_magnetization(rng):
    spec = random_chain(rng, 6)
    blocks = chain_hamiltonian(spec)
    assert sum(b.dimension for b in blocks.blocks) == 2 ** 6
    for b in blocks.blocks:
        assert b.dimension == math.comb(6, b.magnetization)
        assert np.all(spin_sector_of(b.basis, 6) == b.magnetization)
        assert is_symmetric(b.matrix)


def test_chain_is_traceless(rng):
    dense = chain_hamiltonian_dense(random_chain(rng, 5, lam=4.0))
    assert abs(np.trace(dense)) < 1e-12


def test_sector_index_sorted():
    sectors = sz_sector_index(4)
    for basis in sectors.values():
        assert np.all(np.diff(basis) > 0)


@pytest.mark.parametrize("n_sites,separation,expected", [
    (12, 0, (6, 7)),
    (6, 0, (3, 4)),
    (5, 0, (3, 4)),
    (6, 2, (2, 5)),
    (12, 4, (4, 9)),
    (4, 2, (1, 4)),
])
def test_pair_sites_centered(n_sites, separation, expected):
    assert pair_sites(n_sites, separation) == expected


@pytest.mark.parametrize("separation", [-1, 5])
def test_pair_sites_out_of_range(separation):
    with pytest.raises(ValidationError):
        pair_sites(5, separation)


def test_field_sum_parametrization():
    spec = PairSpec.from_field_sum(J=2.0, gamma=0.4, h_sum=0.6, delta_h=1.5)
    assert spec.h_sum == pytest.approx(0.6)
    assert spec.delta_h == pytest.approx(1.5)
    assert spec.xi == pytest.approx(math.sqrt(1 + 1.5 ** 2) / 2)


def test_delta_h_needs_coupling():
    with pytest.raises(ValidationError):
        PairSpec(J=0.0, gamma=1.0, h1=0.1, h2=0.0).delta_h


@pytest.mark.parametrize("kwargs", [
    dict(n_sites=3, J=1.0, gamma=0.4, lam=1.0, fields=(0.1, 0.2)),
    dict(n_sites=2, J=1.0, gamma=0.4, lam=1.0, fields=(0.1, 1.5)),
    dict(n_sites=2, J=1.0, gamma=0.4, lam=-0.1, fields=(0.1, 0.2)),
    dict(n_sites=1, J=1.0, gamma=0.4, lam=1.0, fields=(0.1,)),
    dict(n_sites=2, J=float("nan"), gamma=0.4, lam=1.0, fields=(0.1, 0.2)),
])
def test_chain_spec_rejects_bad_input(kwargs):
    with pytest.raises(ValidationError):
        ChainSpec(**kwargs)


def test_pair_spec_of_chain_uses_scaled_fields():
    chain = ChainSpec(n_sites=3, J=1.0, gamma=0.4, lam=4.0, fields=(0.5, -0.25, 1.0))
    pair = chain.pair_spec(2, 3)
    assert (pair.h1, pair.h2) == (-1.0, 4.0)
    with pytest.raises(ValidationError):
        chain.pair_spec(3, 2)


def test_effective_alpha0_is_mean():
    base = PairSpec(J=1.0, gamma=0.4, h1=0.5, h2=-0.3)
    eff = EffectiveSpec(base, alpha1=0.2, alpha2=-0.2)
    assert eff.alpha0 == 0.0
    scaled = eff.scaled_pair()
    assert scaled.J == 1.0
    assert scaled.h1 == pytest.approx(1.2 * 0.5)
    assert scaled.h2 == pytest.approx(0.8 * -0.3)


def test_effective_identity():
    base = PairSpec(J=1.0, gamma=0.4, h1=0.5, h2=-0.3)
    assert np.array_equal(effective_hamiltonian(EffectiveSpec(base)), two_spin_hamiltonian(base))


def test_size_caps(rng):
    with pytest.raises(ResourceLimitError):
        sz_sector_index(5, Settings(max_sites=4, full_matrix_max_sites=4))
    with pytest.raises(ResourceLimitError):
        chain_hamiltonian_dense(random_chain(rng, 13))
