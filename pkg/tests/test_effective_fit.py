import numpy as np
import pytest

import spinthermal.effective_fit as effective_fit
from conftest import random_chain
from spinthermal.effective_fit import (
    FitConfig,
    effective_energy,
    effective_state,
    fit_alphas,
    state_difference,
)
from spinthermal.errors import ValidationError
from spinthermal.hamiltonians import ChainSpec, PairSpec, chain_hamiltonian
from spinthermal.thermal import (
    diagonalize,
    partial_trace_pair,
    thermal_state,
    two_spin_gibbs_elements,
)


def test_state_difference_basics():
    rho = np.diag([0.1, 0.2, 0.3, 0.4])
    assert state_difference(rho, rho) == 0.0
    other = np.eye(4) / 4
    expected = np.linalg.norm(rho - other) / np.linalg.norm(rho)
    assert state_difference(rho, other) == pytest.approx(expected)
    assert state_difference(rho, other) != pytest.approx(state_difference(other, rho))


def test_effective_state_without_scaling_is_pair_state():
    base = PairSpec(J=1.0, gamma=0.4, h1=0.8, h2=-0.3)
    expected = two_spin_gibbs_elements(base, 2.0).matrix()
    assert np.allclose(effective_state(base, 0.0, 0.0, 2.0).matrix, expected, atol=1e-13)


@pytest.mark.parametrize("beta", [0.2, 1.0, 5.0])
def test_two_site_chain_fits_identity(beta):
    spec = ChainSpec(n_sites=2, J=1.0, gamma=0.4, lam=1.0, fields=(0.7, -0.4))
    induced = partial_trace_pair(thermal_state(diagonalize(chain_hamiltonian(spec)), beta), (1, 2))
    result = fit_alphas(induced, spec.pair_spec(1, 2), beta)
    assert result.D_fitted < 1e-8
    assert abs(result.alpha1) < 1e-3
    assert abs(result.alpha2) < 1e-3
    assert result.grid_alpha == (0.0, 0.0)


def test_recovers_known_scaling():
    base = PairSpec(J=1.0, gamma=0.4, h1=1.5, h2=-2.0)
    target = effective_state(base, 0.23, -0.31, 3.0)
    result = fit_alphas(target, base, 3.0)
    assert result.D_fitted < result.history[0] / 10
    assert result.alpha1 == pytest.approx(0.23, abs=1e-2)
    assert result.alpha2 == pytest.approx(-0.31, abs=1e-2)
    assert result.alpha0 == pytest.approx((result.alpha1 + result.alpha2) / 2)


def test_fit_never_worse_than_unfitted(rng):
    spec = random_chain(rng, 6, lam=4.0)
    decomp = diagonalize(chain_hamiltonian(spec))
    for beta in (0.2, 1.0, 5.0):
        induced = partial_trace_pair(thermal_state(decomp, beta), (3, 4))
        result = fit_alphas(induced, spec.pair_spec(3, 4), beta)
        assert result.D_fitted <= result.D_unfitted
        assert list(result.history) == sorted(result.history, reverse=True)


def test_effective_energy_is_normalized():
    base = PairSpec(J=1.0, gamma=0.4, h1=0.5, h2=-0.5)
    hot = effective_energy(base, 0.1, 0.2, 0.0)
    assert hot.normalized_energy == pytest.approx(0.0, abs=1e-12)
    cold = effective_energy(base, 0.1, 0.2, 200.0)
    assert cold.normalized_energy == pytest.approx(-1.0, abs=1e-9)


@pytest.mark.parametrize("kwargs", [
    dict(grid_step=(0.0, 0.1)),
    dict(grid_lo=(0.1, -0.9)),
    dict(grid_step=(0.35, 0.1)),
    dict(shrink=1.0),
    dict(descent_step=-0.1),
    dict(max_iterations=-1),
])
def test_fit_config_validation(kwargs):
    with pytest.raises(ValidationError):
        FitConfig(**kwargs).validate()


def test_grid_hits_zero_exactly():
    grid = FitConfig().grid(0)
    assert len(grid) == 19
    assert 0.0 in grid
    assert grid[0] == -0.9 and grid[-1] == 0.9


class _FourWells:
    def __init__(self, induced, base, beta):
        pass

    def __call__(self, alpha1, alpha2):
        return float((alpha1**2 - 0.25) ** 2 + (alpha2**2 - 0.25) ** 2)


def test_grid_ties_go_to_smallest_alphas(monkeypatch):
    monkeypatch.setattr(effective_fit, "_Objective", _FourWells)
    base = PairSpec(J=1.0, gamma=0.4, h1=0.3, h2=-0.2)
    result = fit_alphas(np.eye(4) / 4, base, 1.0, FitConfig(max_iterations=0))
    assert result.grid_alpha == (-0.5, -0.5)
    assert result.D_fitted == 0.0
    assert result.D_unfitted == pytest.approx(0.125)


@pytest.mark.parametrize("values,expected", [
    ({}, FitConfig()),
    ({"grid_step": "0.05"}, FitConfig(grid_step=(0.05, 0.05))),
    ({"grid_lo": [-0.5, -0.9], "max_iterations": "20"},
     FitConfig(grid_lo=(-0.5, -0.9), max_iterations=20)),
    ({"descent_step": 0.1, "grid_hi": "0.5,0.8"},
     FitConfig(descent_step=0.1, grid_hi=(0.5, 0.8))),
])
def test_fit_config_from_mapping(values, expected):
    assert FitConfig.from_mapping(values) == expected


@pytest.mark.parametrize("values", [
    {"grid_size": 3},
    {"grid_step": "fine"},
    {"grid_lo": [-0.5, -0.5, -0.5]},
    {"shrink": 2},
    {"grid_lo": 0.1},
])
def test_fit_config_from_mapping_rejects(values):
    with pytest.raises(ValidationError):
        FitConfig.from_mapping(values)
