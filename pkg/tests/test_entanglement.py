import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from conftest import random_density_matrix
from spinthermal.entanglement import (
    analytic_concurrence,
    concurrence,
    concurrence_x_state,
    entanglement_of_formation,
    eof,
    is_in_separable_ball,
    threshold_beta,
    threshold_beta_deltaE,
)
from spinthermal.errors import UndefinedCouplingError, ValidationError, XStateShapeError
from spinthermal.hamiltonians import PairSpec, two_spin_hamiltonian
from spinthermal.thermal import diagonalize, gibbs_state

S2 = 1 / math.sqrt(2)
BELL = {
    "phi+": np.array([S2, 0, 0, S2]),
    "phi-": np.array([S2, 0, 0, -S2]),
    "psi+": np.array([0, S2, S2, 0]),
    "psi-": np.array([0, S2, -S2, 0]),
}


def werner(p):
    psi = BELL["psi-"]
    return p * np.outer(psi, psi) + (1 - p) * np.eye(4) / 4


@pytest.mark.parametrize("name", sorted(BELL))
def test_bell_states_are_maximally_entangled(name):
    psi = BELL[name]
    rho = np.outer(psi, psi.conj())
    assert concurrence(rho).C == pytest.approx(1.0, abs=1e-12)
    assert entanglement_of_formation(rho) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.2, 1 / 3, 0.5, 0.8, 1.0])
def test_werner_family(p):
    expected = max(0.0, (3 * p - 1) / 2)
    assert abs(concurrence(werner(p)).C - expected) < 1e-12
    assert abs(concurrence_x_state(werner(p)).C - expected) < 1e-12


def test_product_state_is_separable():
    up = np.array([0, 1])
    plus = np.array([S2, S2])
    psi = np.kron(plus, up)
    assert concurrence(np.outer(psi, psi)).C < 1e-12


def test_local_unitary_invariance(rng):
    for _ in range(200):
        rho = random_density_matrix(rng, rank=int(rng.integers(1, 5)))
        U = np.kron(unitary_group.rvs(2, random_state=rng), unitary_group.rvs(2, random_state=rng))
        rotated = U @ rho @ U.conj().T
        rotated = (rotated + rotated.conj().T) / 2
        assert abs(concurrence(rho).C - concurrence(rotated).C) < 1e-10


def test_x_state_shortcut_agrees(rng):
    for _ in range(50):
        d = rng.uniform(0.05, 1.0, size=4)
        d /= d.sum()
        z = rng.uniform(0, 1) * math.sqrt(d[1] * d[2]) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        rho = np.diag(d).astype(complex)
        rho[1, 2], rho[2, 1] = z, np.conj(z)
        assert concurrence_x_state(rho).C == pytest.approx(concurrence(rho).C, abs=1e-12)


def test_x_state_shortcut_rejects_other_shapes():
    psi = BELL["phi+"]
    with pytest.raises(XStateShapeError):
        concurrence_x_state(np.outer(psi, psi))


def test_worked_thermal_value():
    spec = PairSpec.from_field_sum(J=1.0, gamma=0.4, h_sum=0.0, delta_h=0.0)
    expected = (math.exp(0.4) * math.sinh(1) - 1) / (math.exp(0.4) * math.cosh(1) + 1)
    C = analytic_concurrence(spec, 2.0)
    assert C == pytest.approx(expected, abs=1e-14)
    assert C == pytest.approx(0.2281, abs=1e-4)
    x = (1 + math.sqrt(1 - C**2)) / 2
    assert eof(C) == pytest.approx(-x * math.log2(x) - (1 - x) * math.log2(1 - x), abs=1e-12)
    assert eof(C) == pytest.approx(0.1012, abs=1e-4)


def test_analytic_matches_numeric(rng):
    for _ in range(1000):
        spec = PairSpec.from_field_sum(
            J=1.0,
            gamma=rng.uniform(-1.0, 1.5),
            h_sum=rng.uniform(-2.0, 2.0),
            delta_h=rng.uniform(0.0, 3.0),
        )
        beta = rng.uniform(0.01, 20.0)
        numeric = concurrence(gibbs_state(diagonalize(two_spin_hamiltonian(spec)), beta)).C
        assert abs(analytic_concurrence(spec, beta) - numeric) < 1e-10


def test_ground_state_limit():
    spec = PairSpec.from_field_sum(J=1.0, gamma=0.4, h_sum=0.0, delta_h=2.0)
    assert analytic_concurrence(spec, 60.0) == pytest.approx(1 / math.sqrt(5), abs=1e-10)


def test_analytic_needs_coupling():
    with pytest.raises(UndefinedCouplingError):
        analytic_concurrence(PairSpec(J=0.0, gamma=0.4, h1=0.0, h2=0.0), 1.0)


@pytest.mark.parametrize("C,expected", [(0.0, 0.0), (1.0, 1.0)])
def test_eof_endpoints(C, expected):
    assert eof(C) == pytest.approx(expected, abs=1e-15)


def test_eof_monotone_and_small_concurrence():
    values = [eof(c) for c in np.linspace(0, 1, 101)]
    assert all(a < b for a, b in zip(values, values[1:]))
    # h(x) ~ (C^2/4) log2(4 / C^2) for small C
    C = 1e-6
    approx = C ** 2 / 4 * (math.log2(4 / C ** 2) + 1 / math.log(2))
    assert eof(C) == pytest.approx(approx, rel=1e-6)


@pytest.mark.parametrize("C", [-0.1, 1.1, float("nan")])
def test_eof_rejects_out_of_range(C):
    with pytest.raises(ValidationError):
        eof(C)


def test_separable_ball(rng):
    assert is_in_separable_ball(np.eye(4) / 4)
    psi = BELL["psi-"]
    assert not is_in_separable_ball(np.outer(psi, psi))
    checked = 0
    for _ in range(10_000):
        rho = random_density_matrix(rng)
        mix = rng.uniform(0.0, 0.6)
        rho = mix * rho + (1 - mix) * np.eye(4) / 4
        if is_in_separable_ball(rho):
            checked += 1
            assert concurrence(rho).C < 1e-12
    assert checked > 1000


def test_xxx_antiferromagnet_threshold():
    result = threshold_beta(PairSpec.from_field_sum(J=1.0, gamma=1.0, h_sum=0.0, delta_h=0.0))
    assert result.is_finite
    assert abs(result.beta_c - math.log(3)) < 1e-9


def test_xxx_ferromagnet_has_no_threshold():
    result = threshold_beta(PairSpec.from_field_sum(J=-1.0, gamma=1.0, h_sum=0.0, delta_h=0.0))
    assert result.kind == "none"
    assert result.beta_c is None


def test_concurrence_vanishes_at_threshold():
    spec = PairSpec.from_field_sum(J=1.0, gamma=1.0, h_sum=0.0, delta_h=0.0)
    assert analytic_concurrence(spec, math.log(3)) < 1e-12


@pytest.mark.parametrize("gamma,delta_h,h_sum", [
    (0.4, 0.0, 0.0),
    (0.4, 1.0, 0.5),
    (-0.5, 2.0, 0.0),
    (1.2, 0.3, -1.0),
])
def test_threshold_separates_entangled_region(gamma, delta_h, h_sum):
    spec = PairSpec.from_field_sum(J=1.0, gamma=gamma, h_sum=h_sum, delta_h=delta_h)
    beta_c = threshold_beta(spec).beta_c
    assert analytic_concurrence(spec, beta_c * 0.99) == 0.0
    assert analytic_concurrence(spec, beta_c * 1.01) > 0.0
    assert analytic_concurrence(spec, beta_c * (1 - 1e-6)) == 0.0
    assert analytic_concurrence(spec, beta_c * (1 + 1e-3)) > 0.0


def test_threshold_known_value():
    spec = PairSpec.from_field_sum(J=1.0, gamma=0.4, h_sum=0.0, delta_h=0.0)
    beta_c = threshold_beta(spec).beta_c
    assert math.exp(0.2 * beta_c) * math.sinh(0.5 * beta_c) == pytest.approx(1.0, abs=1e-10)
    assert beta_c == pytest.approx(1.396, abs=1e-3)


def test_threshold_needs_coupling():
    with pytest.raises(UndefinedCouplingError):
        threshold_beta(PairSpec(J=0.0, gamma=1.0, h1=0.0, h2=0.0))


@pytest.mark.parametrize("gamma", [0.0, 0.4, 0.9])
def test_delta_e_form_is_consistent(gamma):
    values = []
    for delta_h in (0.0, 0.5, 1.0, 2.0):
        result = threshold_beta_deltaE(gamma, delta_h)
        assert result.kind == "finite"
        assert result.consistent
        assert result.in_validity_range
        assert abs(result.value - result.beta_c_times_delta_e) < 1e-8
        values.append(result.value)
    assert all(a < b for a, b in zip(values, values[1:]))


def test_delta_e_form_closed_cases():
    assert threshold_beta_deltaE(1.0, 0.0).value == pytest.approx(math.log(3) / 3, abs=1e-10)
    assert threshold_beta_deltaE(0.0, 0.0).value == pytest.approx(2 / 3 * math.asinh(1), abs=1e-10)


def test_delta_e_form_flags_validity_range():
    result = threshold_beta_deltaE(1.5, 0.0)
    assert not result.in_validity_range


def test_delta_e_threshold_rises_with_inhomogeneity():
    values = [threshold_beta_deltaE(0.4, 0.1 * k).value for k in range(31)]
    assert all(a < b for a, b in zip(values, values[1:]))
