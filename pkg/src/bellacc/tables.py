"""Coincidence count tables.

A table holds coincidence counts (or rates, or probabilities) keyed by the
relative polarizer angle in degrees, plus the two polarizer-absent
normalizers: ``z`` (one polarizer removed) and ``Z`` (both removed).
Accidental estimates and singles rates are optional side maps keyed the same
way, with ``"z"`` and ``"Z"`` as keys for the absent rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Union

from .errors import PreconditionError

Key = Union[float, str]
ABSENT_KEYS = ("z", "Z")


def angle_key(deg) -> float:
    """Canonical dict key for a relative angle in degrees."""
    return round(float(deg), 9) + 0.0


def _canon(key) -> Key:
    if key in ABSENT_KEYS:
        return key
    return angle_key(key)


def _canon_map(m):
    if m is None:
        return None
    return {_canon(k): float(v) for k, v in m.items()}


@dataclass(frozen=True)
class CountsTable:
    entries: Dict[float, float] = field(default_factory=dict)
    z: Optional[float] = None
    Z: Optional[float] = None
    accidentals: Optional[Dict[Key, float]] = None
    singlesA: Optional[Dict[Key, float]] = None
    singlesB: Optional[Dict[Key, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "entries", {angle_key(k): float(v) for k, v in self.entries.items()})
        for name in ("z", "Z"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, float(v))
        for name in ("accidentals", "singlesA", "singlesB"):
            object.__setattr__(self, name, _canon_map(getattr(self, name)))

        for key, value in self.items():
            if not value >= 0 or math.isinf(value):
                raise PreconditionError(f"count at {key} must be finite and >= 0, got {value}")
        for name in ("accidentals", "singlesA", "singlesB"):
            side = getattr(self, name)
            for key, value in (side or {}).items():
                if not value >= 0:
                    raise PreconditionError(f"{name} at {key} must be >= 0, got {value}")

    def get(self, key) -> Optional[float]:
        key = _canon(key)
        if key == "z":
            return self.z
        if key == "Z":
            return self.Z
        return self.entries.get(key)

    def keys(self) -> Iterator[Key]:
        yield from sorted(self.entries)
        for k in ABSENT_KEYS:
            if self.get(k) is not None:
                yield k

    def items(self):
        for k in self.keys():
            yield k, self.get(k)

    def scaled(self, factor: float) -> "CountsTable":
        """Every count, accidental and singles rate multiplied by ``factor``."""

        def mul(m):
            return None if m is None else {k: v * factor for k, v in m.items()}

        return CountsTable(
            entries=mul(self.entries),
            z=None if self.z is None else self.z * factor,
            Z=None if self.Z is None else self.Z * factor,
            accidentals=mul(self.accidentals),
            singlesA=mul(self.singlesA),
            singlesB=mul(self.singlesB),
        )

    def normalized(self) -> "CountsTable":
        """Counts divided by the both-absent rate ``Z``."""
        if not self.Z:
            raise PreconditionError("normalization needs Z > 0")
        return self.scaled(1.0 / self.Z)
