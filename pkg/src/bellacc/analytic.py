"""Coincidence-probability predictions for ideal polarization experiments.

Angles are in radians throughout this module. Polarizer axes are 180-degree
periodic, so axes and hidden polarization directions live on [0, pi).

Two closed forms are provided: the quantum prediction for same-channel
coincidences, ``cos(phi)**2 / 2``, and the classical pulsed-light model in
which both pulses share a polarization direction ``lam``, each detector
fires with Malus probability ``cos(lam - axis)**2``, and ``lam`` is uniform.
:func:`hv_coincidence_prob` integrates any factorable hidden-variable model
numerically, which for the default model must agree with the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidSpecError, PreconditionError
from .tables import CountsTable

DEFAULT_PANELS = 4096
# allowed slack on the weight's normalization and on response bounds
_RANGE_TOL = 1e-9
_NORM_TOL = 1e-6


def normalize_axis(theta: float) -> float:
    """Fold an axis angle into [0, pi)."""
    t = math.fmod(theta, math.pi)
    if t < 0:
        t += math.pi
    return 0.0 if t >= math.pi else t


@dataclass(frozen=True)
class Polarizer:
    """A polarizer in the beam with its transmission axis in radians."""

    axis: float

    def __post_init__(self):
        object.__setattr__(self, "axis", normalize_axis(float(self.axis)))

    @classmethod
    def at_degrees(cls, deg: float) -> "Polarizer":
        return cls(math.radians(deg))


# The absent polarizer (transmission 1 for every hidden state).
ABSENT = None

Setting = Optional[Polarizer]


def qt_coincidence_prob(phi):
    """Quantum same-channel coincidence probability, ``cos(phi)**2 / 2``."""
    return 0.5 * np.cos(phi) ** 2


def realist_coincidence_prob(phi):
    """Closed-form classical-pulse prediction, ``1/4 + cos(2 phi) / 8``.

    Equal to ``1/8 + cos(phi)**2 / 4``; ranges over [1/8, 3/8].
    """
    return 0.25 + 0.125 * np.cos(2.0 * phi)


def singles_prob(setting: Setting, lam):
    """Malus detection probability of one arm for hidden direction ``lam``."""
    if setting is ABSENT:
        return np.ones_like(np.asarray(lam, dtype=float))
    return np.cos(np.asarray(lam, dtype=float) - setting.axis) ** 2


def uniform_weight(lam):
    return np.full_like(np.asarray(lam, dtype=float), 1.0 / math.pi)


def malus_response(setting: Setting, lam):
    return singles_prob(setting, lam)


@dataclass(frozen=True)
class HVModelSpec:
    """A factorable hidden-variable model.

    ``weight(lam)`` is a density on [0, pi). ``response_a(setting, lam)`` and
    ``response_b(setting, lam)`` give each arm's detection probability; both
    receive ``ABSENT`` (``None``) when the polarizer is removed. All three
    must accept numpy arrays of ``lam``.
    """

    weight: Callable = uniform_weight
    response_a: Callable = malus_response
    response_b: Callable = malus_response


DEFAULT_HV = HVModelSpec()


def midpoint_nodes(panels: int):
    """Midpoint nodes on [0, pi) and the common panel width."""
    h = math.pi / panels
    return (np.arange(panels) + 0.5) * h, h


def hv_coincidence_prob(spec: HVModelSpec, setting_a: Setting, setting_b: Setting,
                        panels: int = DEFAULT_PANELS) -> float:
    """Average coincidence probability of a factorable model over ``lam``.

    Composite midpoint rule on [0, pi). The integrand is smooth and periodic,
    so the rule converges geometrically; for trigonometric integrands of low
    degree it is exact to rounding.
    """
    if panels < 16:
        raise PreconditionError(f"panels must be >= 16, got {panels}")
    lam, h = midpoint_nodes(panels)
    w = np.asarray(spec.weight(lam), dtype=float)
    ra = np.asarray(spec.response_a(setting_a, lam), dtype=float)
    rb = np.asarray(spec.response_b(setting_b, lam), dtype=float)

    if not np.all(np.isfinite(w)) or np.any(w < -_RANGE_TOL):
        raise InvalidSpecError("weight must be a nonnegative density")
    norm = float(np.sum(w) * h)
    if abs(norm - 1.0) > _NORM_TOL:
        raise InvalidSpecError(f"weight integrates to {norm:.9g}, expected 1")
    for name, r in (("response_a", ra), ("response_b", rb)):
        if not np.all(np.isfinite(r)) or np.any(r < -_RANGE_TOL) or np.any(r > 1 + _RANGE_TOL):
            raise InvalidSpecError(f"{name} must lie in [0, 1]")

    p = float(np.sum(w * ra * rb) * h)
    return min(max(p, 0.0), 1.0)


class PredictionModel:
    """Coincidence probability as a function of relative angle, plus the
    one-absent (``z``) and both-absent (``Z``) probabilities."""

    name = "model"

    def coincidence(self, phi: float) -> float:
        raise NotImplementedError

    def one_absent(self) -> float:
        raise NotImplementedError

    def both_absent(self) -> float:
        raise NotImplementedError


class QTModel(PredictionModel):
    name = "qt"

    def coincidence(self, phi):
        return float(qt_coincidence_prob(phi))

    def one_absent(self):
        return 0.5

    def both_absent(self):
        return 1.0


class RealistModel(PredictionModel):
    name = "realist"

    def coincidence(self, phi):
        return float(realist_coincidence_prob(phi))

    def one_absent(self):
        # mean of cos^2 over a uniform direction
        return 0.5

    def both_absent(self):
        return 1.0


class GeneralHVModel(PredictionModel):
    """Numerically integrated model; assumes rotational invariance, so the
    A axis is put at zero and B at ``phi``."""

    name = "hv"

    def __init__(self, spec: HVModelSpec = DEFAULT_HV, panels: int = DEFAULT_PANELS):
        self.spec = spec
        self.panels = panels

    def coincidence(self, phi):
        return hv_coincidence_prob(self.spec, Polarizer(0.0), Polarizer(phi), self.panels)

    def one_absent(self):
        return hv_coincidence_prob(self.spec, Polarizer(0.0), ABSENT, self.panels)

    def both_absent(self):
        return hv_coincidence_prob(self.spec, ABSENT, ABSENT, self.panels)


MODELS = {"qt": QTModel, "realist": RealistModel}


def model_counts_table(model: PredictionModel, angles_deg: Sequence[float]) -> CountsTable:
    """Evaluate ``model`` at relative angles (degrees) and at the absent settings."""
    if len(angles_deg) == 0:
        raise PreconditionError("need at least one angle")
    entries = {a: model.coincidence(math.radians(a)) for a in angles_deg}
    return CountsTable(entries=entries, z=model.one_absent(), Z=model.both_absent())
