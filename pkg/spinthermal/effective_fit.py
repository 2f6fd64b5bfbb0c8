"""Fit the two-spin Hamiltonian with scaled coupling and fields to an induced chain state."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from typing import Any, Mapping, Tuple

import numpy as np

from spinthermal.errors import ObjectiveError, SpinThermalError, ValidationError
from spinthermal.hamiltonians import EffectiveSpec, PairSpec, effective_hamiltonian
from spinthermal.thermal import DensityMatrix4, EnergyScales, diagonalize, energy_scales, gibbs_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    """Coarse grid over (alpha1, alpha2) followed by normalized-gradient descent.

    Grid bounds and steps are given per axis. The default range keeps 1 + alpha > 0 so
    no term of the Hamiltonian changes sign.
    """
    grid_lo: Tuple[float, float] = (-0.9, -0.9)
    grid_hi: Tuple[float, float] = (0.9, 0.9)
    grid_step: Tuple[float, float] = (0.1, 0.1)
    descent_step: float = 0.05
    shrink: float = 0.5
    gradient_step: float = 1e-5
    tolerance: float = 1e-12
    gradient_tolerance: float = 1e-10
    min_step: float = 1e-12
    max_iterations: int = 500

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "FitConfig":
        """Build from a config-file mapping or ``--fit-option`` strings.

        Grid entries take one value for both axes or a pair; strings may be "a,b".
        """
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValidationError(f"unknown fit options: {', '.join(sorted(unknown))}")
        kwargs = {}
        for name, value in values.items():
            try:
                if name.startswith("grid_"):
                    if isinstance(value, str):
                        value = value.split(",")
                    elif isinstance(value, (int, float)):
                        value = [value]
                    kwargs[name] = tuple(float(v) for v in value)
                elif name == "max_iterations":
                    kwargs[name] = int(value)
                else:
                    kwargs[name] = float(value)
            except (TypeError, ValueError):
                raise ValidationError(f"fit {name}: bad value {value!r}")
            if name.startswith("grid_"):
                if len(kwargs[name]) == 1:
                    kwargs[name] = kwargs[name] * 2
                if len(kwargs[name]) != 2:
                    raise ValidationError(f"fit {name} takes one or two values")
        config = cls(**kwargs)
        config.validate()
        return config

    def validate(self):
        for name in ("descent_step", "gradient_step", "tolerance", "gradient_tolerance", "min_step"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"fit {name} must be positive")
        if not 0 < self.shrink < 1:
            raise ValidationError("fit shrink factor must lie in (0, 1)")
        if self.max_iterations < 0:
            raise ValidationError("fit max_iterations must be >= 0")
        for axis in range(2):
            if self.grid_step[axis] <= 0:
                raise ValidationError(f"grid step of alpha{axis + 1} must be positive")
            if not self.grid_lo[axis] <= 0 <= self.grid_hi[axis]:
                raise ValidationError(f"grid of alpha{axis + 1} must contain 0")
            if 0.0 not in self.grid(axis):
                raise ValidationError(f"grid of alpha{axis + 1} does not hit 0 with its step")

    def grid(self, axis: int) -> np.ndarray:
        lo, hi, step = self.grid_lo[axis], self.grid_hi[axis], self.grid_step[axis]
        n = int(math.floor((hi - lo) / step + 1e-9))
        values = np.round(lo + step * np.arange(n + 1), 12)
        values[np.abs(values) < 1e-12] = 0.0
        return values


@dataclass(frozen=True)
class FitResult:
    alpha1: float
    alpha2: float
    D_unfitted: float
    D_fitted: float
    iterations: int
    converged: bool
    grid_alpha: Tuple[float, float]
    history: Tuple[float, ...] = ()

    @property
    def alpha0(self) -> float:
        return (self.alpha1 + self.alpha2) / 2


def state_difference(rho1, rho2) -> float:
    """D = ||rho1 - rho2||_F / ||rho1||_F. Not symmetric: the norm of rho1 sets the scale."""
    a = DensityMatrix4.coerce(rho1).matrix
    b = DensityMatrix4.coerce(rho2).matrix
    return float(np.linalg.norm(a - b) / np.linalg.norm(a))


def effective_state(base: PairSpec, alpha1: float, alpha2: float, beta: float) -> DensityMatrix4:
    """Gibbs state of the fitted two-spin Hamiltonian."""
    H = effective_hamiltonian(EffectiveSpec(base, alpha1, alpha2))
    return DensityMatrix4(gibbs_state(diagonalize(H), beta))


def effective_energy(base: PairSpec, alpha1: float, alpha2: float, beta: float) -> EnergyScales:
    """Energy scales of the fitted two-spin Hamiltonian at beta."""
    H = effective_hamiltonian(EffectiveSpec(base, alpha1, alpha2))
    return energy_scales(diagonalize(H), beta)


class _Objective:
    def __init__(self, induced: DensityMatrix4, base: PairSpec, beta: float):
        self.induced = induced
        self.base = base
        self.beta = beta

    def __call__(self, alpha1: float, alpha2: float) -> float:
        point = (float(alpha1), float(alpha2))
        try:
            value = state_difference(effective_state(self.base, alpha1, alpha2, self.beta), self.induced)
        except SpinThermalError as e:
            raise ObjectiveError(e.message, point)
        if not math.isfinite(value):
            raise ObjectiveError("difference is not finite", point)
        return value


def fit_alphas(induced, base: PairSpec, beta: float, config: FitConfig = FitConfig()) -> FitResult:
    """Minimize D(alpha1, alpha2) between the fitted two-spin Gibbs state and ``induced``.

    ``base`` carries J, gamma and the lambda-scaled fields of the two chain sites.
    """
    config.validate()
    induced = DensityMatrix4.coerce(induced)
    objective = _Objective(induced, base, beta)

    # Lexicographic scan with strict "<": ties go to the smallest (alpha1, alpha2).
    best, best_d, d_origin = None, math.inf, None
    for a1 in config.grid(0):
        for a2 in config.grid(1):
            d = objective(a1, a2)
            if a1 == 0.0 and a2 == 0.0:
                d_origin = d
            if d < best_d:
                best, best_d = (float(a1), float(a2)), d

    alpha = np.array(best)
    current = best_d
    history = [current]
    step = config.descent_step
    h = config.gradient_step
    iterations = 0
    converged = False

    while iterations < config.max_iterations:
        iterations += 1
        grad = np.array([
            (objective(alpha[0] + h, alpha[1]) - objective(alpha[0] - h, alpha[1])) / (2 * h),
            (objective(alpha[0], alpha[1] + h) - objective(alpha[0], alpha[1] - h)) / (2 * h),
        ])
        norm = float(np.linalg.norm(grad))
        if norm < config.gradient_tolerance:
            converged = True
            break

        candidate = alpha - step * grad / norm
        value = objective(*candidate)
        if value < current:
            improvement = current - value
            alpha, current = candidate, value
            history.append(current)
            logger.debug("descent step %d: D=%.3e step=%.3e", iterations, current, step)
            if improvement < config.tolerance:
                converged = True
                break
        else:
            step *= config.shrink
            if step < config.min_step:
                converged = True
                break

    if not converged:
        logger.info("fit stopped after %d iterations without converging (D=%.3e)", iterations, current)

    return FitResult(
        alpha1=float(alpha[0]),
        alpha2=float(alpha[1]),
        D_unfitted=d_origin,
        D_fitted=current,
        iterations=iterations,
        converged=converged,
        grid_alpha=best,
        history=tuple(history),
    )
