"""Concurrence and entanglement of formation of two qubits, and thermal entanglement thresholds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.special

from spinthermal.errors import (
    IndeterminateThresholdError,
    UndefinedCouplingError,
    ValidationError,
    XStateShapeError,
)
from spinthermal.hamiltonians import PairSpec, two_spin_hamiltonian
from spinthermal.thermal import DensityMatrix4, diagonalize, energy_scales, scaled_gibbs_terms

logger = logging.getLogger(__name__)

SIGMA_YY = np.array(
    [[0, 0, 0, -1],
     [0, 0, 1, 0],
     [0, 1, 0, 0],
     [-1, 0, 0, 0]],
    dtype=complex,
)
EOF_SLACK = 1e-12
X_STATE_TOL = 1e-10
BISECT_RTOL = 1e-12
BISECT_MAXITER = 200
SCAN_LIMIT = 1e4
RATE_TOL = 1e-12
CONSISTENCY_TOL = 1e-8


@dataclass(frozen=True)
class ConcurrenceResult:
    C: float
    lambdas: Tuple[float, float, float, float]


@dataclass(frozen=True)
class ThresholdResult:
    """Inverse temperature above which (in beta) the state is entangled.

    ``kind`` is "finite" with ``beta_c`` set, or "none" when no finite threshold exists
    (the state is separable at every temperature).
    """
    kind: str
    beta_c: Optional[float] = None
    residual: Optional[float] = None
    iterations: int = 0

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"


@dataclass(frozen=True)
class DeltaEThresholdResult:
    """Root x = (beta DeltaE)_c of the h1 + h2 = 0 threshold equation.

    ``consistent`` records whether x equals beta_c * DeltaE from the two-spin spectrum;
    ``in_validity_range`` whether gamma <= 2 xi (the upper flip-flop level is E_max).
    """
    kind: str
    value: Optional[float]
    residual: Optional[float]
    beta_c_times_delta_e: Optional[float]
    consistent: bool
    in_validity_range: bool


def spin_flip(rho) -> np.ndarray:
    """(sigma_y x sigma_y) rho* (sigma_y x sigma_y)."""
    m = DensityMatrix4.coerce(rho).matrix
    return SIGMA_YY @ m.conj() @ SIGMA_YY


def concurrence(rho) -> ConcurrenceResult:
    """Wootters concurrence through the Hermitian product sqrt(rho) rho~ sqrt(rho).

    That product is A A^dag with A = sqrt(rho) sqrt(rho~), so the lambdas are the singular
    values of A.
    """
    state = DensityMatrix4.coerce(rho)
    evals, U = np.linalg.eigh(state.matrix)
    evals = np.clip(evals, 0.0, None)
    sqrt_rho = (U * np.sqrt(evals)) @ U.conj().T
    sqrt_flipped = SIGMA_YY @ sqrt_rho.conj() @ SIGMA_YY

    lambdas = scipy.linalg.svdvals(sqrt_rho @ sqrt_flipped)

    C = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]
    C = min(max(0.0, float(C)), 1.0)
    return ConcurrenceResult(C=C, lambdas=tuple(float(x) for x in lambdas))


def concurrence_x_state(rho) -> ConcurrenceResult:
    """C = 2 max(0, |z| - sqrt(uv)) for states with only the diagonal and rho_23 nonzero."""
    state = DensityMatrix4.coerce(rho)
    if not state.is_x_state(X_STATE_TOL):
        raise XStateShapeError(
            "state has coherences outside the (|ud>, |du>) block; use concurrence() instead"
        )
    m = state.matrix
    u, w, w_prime, v = (max(float(m[k, k].real), 0.0) for k in range(4))
    z = abs(m[1, 2])
    outer = math.sqrt(u * v)
    inner = math.sqrt(w * w_prime)
    lambdas = sorted([inner + z, abs(inner - z), outer, outer], reverse=True)
    C = min(2.0 * max(0.0, z - outer), 1.0)
    return ConcurrenceResult(C=C, lambdas=tuple(lambdas))


def _binary_entropy(x: float, one_minus_x: float) -> float:
    return float((scipy.special.entr(x) + scipy.special.entr(one_minus_x)) / math.log(2))


def eof(C: float) -> float:
    """Entanglement of formation h((1 + sqrt(1 - C^2)) / 2), h the binary entropy in bits."""
    if not (-EOF_SLACK <= C <= 1.0 + EOF_SLACK) or math.isnan(C):
        raise ValidationError(f"concurrence must lie in [0, 1], got {C!r}")
    C = min(max(C, 0.0), 1.0)
    if C == 0.0:
        return 0.0
    root = math.sqrt(1.0 - C * C)
    # 1 - x written without cancellation for small C.
    return _binary_entropy((1.0 + root) / 2, C * C / (2.0 * (1.0 + root)))


def entanglement_of_formation(rho) -> float:
    """EoF of a 4x4 density matrix."""
    return eof(concurrence(rho).C)


def is_in_separable_ball(rho) -> bool:
    """Purity at most 1/3 guarantees a separable two-qubit state."""
    return DensityMatrix4.coerce(rho).purity <= 1.0 / 3.0 + 1e-15


def analytic_concurrence(spec: PairSpec, beta: float) -> float:
    """Closed-form concurrence of the two-spin Gibbs state, max(0, chi)."""
    if spec.J == 0:
        raise UndefinedCouplingError("analytic_concurrence")
    t = scaled_gibbs_terms(spec, beta)
    numerator = t["sinh"] / (2 * t["xi"]) - t["unit"]
    denominator = t["cosh"] + 0.5 * (t["field_plus"] + t["field_minus"])
    return max(0.0, numerator / denominator)


def _log_exp_sinh(a: float, b: float, beta: float) -> float:
    # log(e^{a beta} sinh(b beta)) for b > 0, beta > 0
    return (a + b) * beta + math.log(-math.expm1(-2 * b * beta)) - math.log(2)


def _solve_exp_sinh(a: float, b: float, target: float, scale: float, label: str):
    """Smallest beta > 0 with e^{a beta} sinh(b beta) = target, or None.

    The left side starts at 0; when a + b <= 0 it stays below 1/2, so for target >= 1/2
    there is no root. Returns (beta, residual, iterations) or None.
    """
    log_target = math.log(target)

    def f(beta):
        return _log_exp_sinh(a, b, beta) - log_target

    hi = 1.0 / scale
    lo = None
    while f(hi) <= 0:
        if hi * scale >= SCAN_LIMIT:
            break
        lo, hi = hi, 2 * hi
        logger.debug("%s: expanding bracket to beta=%g", label, hi)
    else:
        if lo is None:
            lo = hi / 2
            while f(lo) >= 0:
                lo /= 2
        root, info = scipy.optimize.bisect(
            f, lo, hi, xtol=1e-300, rtol=BISECT_RTOL, maxiter=BISECT_MAXITER,
            full_output=True, disp=False,
        )
        residual = target * math.expm1(f(root))
        return root, residual, info.iterations

    rate = a + b
    if rate <= 0 and target >= 0.5:
        return None
    if abs(rate) <= RATE_TOL * scale:
        raise IndeterminateThresholdError(
            f"{label}: growth rate {rate:.3g} is zero within tolerance, cannot decide"
        )
    raise IndeterminateThresholdError(
        f"{label}: no sign change up to beta*scale = {SCAN_LIMIT:g} "
        f"although the left side grows at rate {rate:.3g}"
    )


def threshold_beta(spec: PairSpec) -> ThresholdResult:
    """Solve e^{gamma beta J/2} |sinh(xi beta J)| = 2 xi for the entanglement threshold."""
    if spec.J == 0:
        raise UndefinedCouplingError("threshold_beta")
    xi = spec.xi
    found = _solve_exp_sinh(
        a=spec.gamma * spec.J / 2, b=xi * abs(spec.J), target=2 * xi,
        scale=abs(spec.J), label="threshold_beta",
    )
    if found is None:
        return ThresholdResult(kind="none")
    beta_c, residual, iterations = found
    return ThresholdResult(kind="finite", beta_c=beta_c, residual=residual, iterations=iterations)


def threshold_beta_deltaE(gamma: float, delta_h: float) -> DeltaEThresholdResult:
    """Solve exp[3 gamma x / (4 xi)] sinh(3 x / 2) = 2 xi for x = (beta DeltaE)_c.

    This form holds for h1 + h2 = 0 (and J > 0) as long as gamma <= 2 xi. Each call
    cross-checks the root against beta_c * DeltaE of the two-spin spectrum.
    """
    if not (math.isfinite(gamma) and math.isfinite(delta_h)):
        raise ValidationError("gamma and delta_h must be finite")
    xi = math.sqrt(1.0 + delta_h ** 2) / 2
    found = _solve_exp_sinh(
        a=3 * gamma / (4 * xi), b=1.5, target=2 * xi, scale=1.0, label="threshold_beta_deltaE",
    )

    spec = PairSpec.from_field_sum(J=1.0, gamma=gamma, h_sum=0.0, delta_h=delta_h)
    delta_e = energy_scales(diagonalize(two_spin_hamiltonian(spec)), 0.0).DeltaE
    direct = threshold_beta(spec)
    cross = direct.beta_c * delta_e if direct.is_finite else None
    in_range = gamma <= 2 * xi

    if found is None:
        consistent = cross is None
        if not consistent:
            logger.warning("gamma=%g delta_h=%g: no DeltaE-form root but beta_c exists", gamma, delta_h)
        return DeltaEThresholdResult("none", None, None, cross, consistent, in_range)

    value, residual, _ = found
    consistent = cross is not None and abs(value - cross) <= CONSISTENCY_TOL
    if not consistent:
        logger.warning(
            "gamma=%g delta_h=%g: DeltaE-form root %.12g differs from beta_c*DeltaE %s",
            gamma, delta_h, value, cross,
        )
    return DeltaEThresholdResult("finite", value, residual, cross, consistent, in_range)
