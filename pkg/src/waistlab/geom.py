"""Closed-form volumes of unit balls and unit spheres.

``unit_ball_volume(l)`` is the Lebesgue volume of the unit ball in R^l and
``sphere_measure(m)`` is the total surface measure of the unit sphere
S^m in R^(m+1).  Both are evaluated in log space so that dimensions of
several hundred remain representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

__all__ = [
    "log_gamma",
    "log_unit_ball_volume",
    "unit_ball_volume",
    "sphere_measure",
    "VolumeTable",
]

_LOG_PI = math.log(math.pi)


def _check_dim(value, name="dimension"):
    if isinstance(value, bool) or int(value) != value:
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


def log_gamma(x: float) -> float:
    """Natural logarithm of the Gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma is defined for x > 0, got {x!r}")
    return math.lgamma(x)


def log_unit_ball_volume(ell: int) -> float:
    ell = _check_dim(ell)
    return 0.5 * ell * _LOG_PI - log_gamma(0.5 * ell + 1.0)


def unit_ball_volume(ell: int) -> float:
    """Volume ``pi^(l/2) / Gamma(l/2 + 1)`` of the unit ball in R^l.

    >>> unit_ball_volume(0), unit_ball_volume(1)
    (1.0, 2.0)
    """
    ell = _check_dim(ell)
    # exact small cases keep the recurrences free of rounding at the base
    if ell == 0:
        return 1.0
    if ell == 1:
        return 2.0
    return math.exp(log_unit_ball_volume(ell))


def sphere_measure(m: int) -> float:
    """Total measure of S^m, equal to ``(m + 1) * unit_ball_volume(m + 1)``.

    S^0 is the two-point set, so ``sphere_measure(0) == 2``.
    """
    m = _check_dim(m)
    return (m + 1) * unit_ball_volume(m + 1)


@dataclass
class VolumeTable:
    """Tabulated ball volumes ``v_l`` and sphere measures ``s_m`` for l, m <= max_dim."""

    max_dim: int
    ball_volumes: Dict[int, float] = field(init=False)
    sphere_measures: Dict[int, float] = field(init=False)

    def __post_init__(self):
        self.max_dim = _check_dim(self.max_dim, "max_dim")
        self.ball_volumes = {ell: unit_ball_volume(ell) for ell in range(self.max_dim + 1)}
        self.sphere_measures = {m: sphere_measure(m) for m in range(self.max_dim + 1)}

    def recurrence_residuals(self) -> Dict[int, float]:
        """Relative residual of ``v_l = (2 pi / l) v_(l-2)`` for each l >= 2."""
        v = self.ball_volumes
        return {
            ell: abs(v[ell] - 2.0 * math.pi / ell * v[ell - 2]) / v[ell]
            for ell in range(2, self.max_dim + 1)
        }

    def archimedes_residuals(self) -> Dict[int, float]:
        """Relative residual of ``s_(n+1) = 2 pi v_n`` for each n with n+1 in the table."""
        s, v = self.sphere_measures, self.ball_volumes
        return {
            n: abs(s[n + 1] - 2.0 * math.pi * v[n]) / s[n + 1]
            for n in range(0, self.max_dim)
        }

    def rows(self):
        """Yield ``(l, v_l, s_l, recurrence_residual, archimedes_residual)``.

        Residuals that are undefined for a given l are reported as 0.
        """
        rec = self.recurrence_residuals()
        arch = self.archimedes_residuals()
        for ell in range(self.max_dim + 1):
            yield (
                ell,
                self.ball_volumes[ell],
                self.sphere_measures[ell],
                rec.get(ell, 0.0),
                arch.get(ell, 0.0),
            )
