"""Dimensionless two-phase constitutive relations.

Mobilities are normalised by the water viscosity (``mu_w = 1``, ``mu_o = M``),
so that for any fractional-flow curve ``F``::

    lambda_w = F / (M (1 - F) + F)
    lambda_o = (1 - F) / (M (1 - F) + F)
    lambda_T = 1 / (M (1 - F) + F)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FLUX_KINDS = ("quadratic", "linear", "s-shaped")


@dataclass(frozen=True)
class FluidModel:
    """Viscosity ratio ``M = mu_o / mu_w`` and the fractional-flow curve.

    ``flux_kind`` selects ``F``: ``"quadratic"`` (``S**2``, piston
    displacement), ``"linear"`` (``S``) or ``"s-shaped"``
    (``S**2 / (S**2 + (1 - S)**2)``, violates the chord condition).
    """

    M: float = 1.0
    flux_kind: str = "quadratic"

    def __post_init__(self) -> None:
        if not self.M > 0:
            raise ValueError(f"viscosity ratio must be positive, got {self.M}")
        if self.flux_kind not in FLUX_KINDS:
            raise ValueError(f"unknown flux kind {self.flux_kind!r}; expected one of {FLUX_KINDS}")

    def fractional_flow(self, S):
        S = np.asarray(S, dtype=float)
        if self.flux_kind == "quadratic":
            return S * S
        if self.flux_kind == "linear":
            return S.copy() if S.ndim else S + 0.0
        S2 = S * S
        return S2 / (S2 + (1.0 - S) ** 2)

    def dfds(self, S):
        S = np.asarray(S, dtype=float)
        if self.flux_kind == "quadratic":
            return 2.0 * S
        if self.flux_kind == "linear":
            return np.ones_like(S)
        d = S * S + (1.0 - S) ** 2
        return 2.0 * S * (1.0 - S) / (d * d)

    @property
    def max_dfds(self) -> float:
        """Largest ``|dF/dS|`` on ``[0, 1]``."""
        if self.flux_kind == "quadratic":
            return 2.0
        if self.flux_kind == "linear":
            return 1.0
        return 2.0  # attained at S = 1/2

    def _denominator(self, F):
        return self.M * (1.0 - F) + F

    def water_mobility(self, S):
        F = self.fractional_flow(S)
        return F / self._denominator(F)

    def oil_mobility(self, S):
        F = self.fractional_flow(S)
        return (1.0 - F) / self._denominator(F)

    def total_mobility(self, S):
        return 1.0 / self._denominator(self.fractional_flow(S))


def fractional_flow(S, model: FluidModel | None = None):
    return (model or FluidModel()).fractional_flow(S)


def total_mobility(S, model: FluidModel):
    return model.total_mobility(S)


def entropy_condition_check(
    model: FluidModel, S_u: float, S_d: float, n_samples: int = 1001, tol: float = 1e-12
) -> bool:
    """Chord test for an admissible single shock from ``S_u`` down to ``S_d``.

    Checks ``(F(S_u) - F(S)) / (S_u - S) >= (F(S_u) - F(S_d)) / (S_u - S_d)``
    at ``n_samples`` equally spaced saturations strictly between the states.
    """
    if S_u == S_d:
        raise ValueError("upstream and downstream saturations must differ")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    F = model.fractional_flow
    chord = (F(S_u) - F(S_d)) / (S_u - S_d)
    k = np.arange(1, n_samples + 1)
    S = S_d + (S_u - S_d) * k / (n_samples + 1)
    slopes = (F(S_u) - F(S)) / (S_u - S)
    return bool(np.all(slopes >= chord - tol))
