"""Bell test statistics for rotationally invariant, symmetric experiments.

The table statistics read ``x`` at 22.5 degrees and ``y`` at 67.5 degrees,
and normalize by the both-absent rate ``Z``. Counts, rates and probabilities
are all accepted; every statistic is invariant under a common rescaling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .errors import DegenerateInputError, MissingSettingError, NegativeResultError, PreconditionError
from .tables import CountsTable

X_ANGLE = 22.5
Y_ANGLE = 67.5


class Statistic(enum.Enum):
    STD = "std"
    VISIBILITY = "visibility"
    CHSH = "chsh"
    FREEDMAN = "freedman"


class Assumption(enum.Enum):
    FAIR_SAMPLING = "fair sampling"
    NO_ENHANCEMENT = "no enhancement"


LIMITS = {
    Statistic.STD: 2.0,
    Statistic.VISIBILITY: 1.0 / math.sqrt(2.0),
    Statistic.CHSH: 0.0,
    Statistic.FREEDMAN: 0.25,
}

ASSUMPTIONS = {
    Statistic.STD: Assumption.FAIR_SAMPLING,
    Statistic.VISIBILITY: Assumption.FAIR_SAMPLING,
    Statistic.CHSH: Assumption.NO_ENHANCEMENT,
    Statistic.FREEDMAN: Assumption.NO_ENHANCEMENT,
}


@dataclass(frozen=True)
class BellResult:
    statistic: Statistic
    value: float

    @property
    def limit(self) -> float:
        return LIMITS[self.statistic]

    @property
    def assumption(self) -> Assumption:
        return ASSUMPTIONS[self.statistic]

    @property
    def violated(self) -> bool:
        return self.value > self.limit


def s_std(x: float, y: float) -> BellResult:
    if x + y == 0:
        raise DegenerateInputError("x + y = 0")
    return BellResult(Statistic.STD, 4.0 * (x - y) / (x + y))


def s_visibility(max_: float, min_: float) -> BellResult:
    if min_ < 0 or max_ < min_:
        raise PreconditionError(f"need max >= min >= 0, got max={max_}, min={min_}")
    if max_ + min_ == 0:
        raise DegenerateInputError("max + min = 0")
    return BellResult(Statistic.VISIBILITY, (max_ - min_) / (max_ + min_))


def _require(table: CountsTable, key) -> float:
    v = table.get(key)
    if v is None:
        raise MissingSettingError(key if key in ("z", "Z") else f"phi={key:g}")
    return v


def _xyzZ(table: CountsTable):
    x = _require(table, X_ANGLE)
    y = _require(table, Y_ANGLE)
    z = _require(table, "z")
    Z = _require(table, "Z")
    if Z == 0:
        raise DegenerateInputError("Z = 0")
    return x, y, z, Z


def s_chsh(table: CountsTable) -> BellResult:
    x, y, z, Z = _xyzZ(table)
    return BellResult(Statistic.CHSH, (3.0 * x - y - 2.0 * z) / Z)


def s_freedman(table: CountsTable) -> BellResult:
    x, y, _, Z = _xyzZ(table)
    return BellResult(Statistic.FREEDMAN, (x - y) / Z)


def table_std(table: CountsTable) -> BellResult:
    return s_std(_require(table, X_ANGLE), _require(table, Y_ANGLE))


def table_visibility(table: CountsTable) -> BellResult:
    """Visibility from the extreme entries of the angle curve."""
    if not table.entries:
        raise MissingSettingError("phi", "table has no angle entries")
    values = list(table.entries.values())
    return s_visibility(max(values), min(values))


TABLE_TESTS = {
    "std": table_std,
    "visibility": table_visibility,
    "chsh": s_chsh,
    "freedman": s_freedman,
}


def subtract_accidentals(table: CountsTable) -> CountsTable:
    """Return a new table with each accidental estimate removed from its count.

    Entries without an accidental estimate are an error, as is any result
    below zero. Nothing is clamped.
    """
    acc = table.accidentals
    if acc is None:
        raise MissingSettingError("accidentals", "table has no accidental estimates")

    def adjusted(key, raw):
        if key not in acc:
            raise MissingSettingError(key, f"no accidental estimate for setting {key}")
        v = raw - acc[key]
        if v < 0:
            raise NegativeResultError(key, v)
        return v

    entries = {k: adjusted(k, v) for k, v in table.entries.items()}
    z = None if table.z is None else adjusted("z", table.z)
    Z = None if table.Z is None else adjusted("Z", table.Z)
    return CountsTable(entries=entries, z=z, Z=Z, accidentals=None,
                       singlesA=table.singlesA, singlesB=table.singlesB)


@dataclass(frozen=True)
class ProbabilityQuad:
    """Joint and single detection probabilities at settings a, a', b, b'.

    The ``*_inf`` fields are coincidence probabilities with one or both
    polarizers removed, needed only for the no-enhancement form.
    """

    p12_ab: float
    p12_abp: float
    p12_apb: float
    p12_apbp: float
    p1_ap: float = 0.0
    p2_b: float = 0.0
    p12_ap_inf: Optional[float] = None
    p12_inf_b: Optional[float] = None
    p12_inf_inf: Optional[float] = None

    def __post_init__(self):
        for name, v in vars(self).items():
            if v is not None and not 0.0 <= v <= 1.0:
                raise PreconditionError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def rotational(cls, p_phi: float, p_3phi: float, p1: float, p2: float,
                   p12_one_absent: Optional[float] = None,
                   p12_both_absent: Optional[float] = None) -> "ProbabilityQuad":
        """Quad for |a-b| = |a'-b| = |a'-b'| = phi and |a-b'| = 3 phi."""
        return cls(p_phi, p_3phi, p_phi, p_phi, p1, p2,
                   p12_one_absent, p12_one_absent, p12_both_absent)

    def chsh_combination(self) -> float:
        return self.p12_ab - self.p12_abp + self.p12_apb + self.p12_apbp


@dataclass(frozen=True)
class BoundsReport:
    value: float
    lower: float
    upper: float
    normalized: Optional[float] = None

    @property
    def satisfied(self) -> bool:
        return self.lower <= self.value <= self.upper

    @property
    def violates_upper(self) -> bool:
        return self.value > self.upper

    @property
    def violates_lower(self) -> bool:
        return self.value < self.lower


def check_min_assumption_chsh(q: ProbabilityQuad) -> BoundsReport:
    """-1 <= p12(a,b) - p12(a,b') + p12(a',b) + p12(a',b') - p1(a') - p2(b) <= 0."""
    t = q.chsh_combination() - q.p1_ap - q.p2_b
    return BoundsReport(t, -1.0, 0.0)


def check_no_enhancement_chsh(q: ProbabilityQuad) -> BoundsReport:
    """The same combination with p12(a',inf) and p12(inf,b) in place of the
    singles, bounded below by -p12(inf,inf). ``normalized`` is T / p12(inf,inf),
    which is the CHSH statistic for symmetric, rotationally invariant setups."""
    if q.p12_ap_inf is None or q.p12_inf_b is None or q.p12_inf_inf is None:
        raise PreconditionError("no-enhancement form needs the polarizer-absent probabilities")
    if q.p12_inf_inf == 0:
        raise DegenerateInputError("p12(inf, inf) = 0")
    t = q.chsh_combination() - q.p12_ap_inf - q.p12_inf_b
    return BoundsReport(t, -q.p12_inf_inf, 0.0, normalized=t / q.p12_inf_inf)


def ch_theorem_u(x1: float, x2: float, y1: float, y2: float, X: float, Y: float) -> float:
    """U = x1 y1 - x1 y2 + x2 y1 + x2 y2 - Y x2 - X y1, which lies in [-XY, 0]
    whenever 0 <= x1, x2 <= X and 0 <= y1, y2 <= Y."""
    for name, v, hi in (("x1", x1, X), ("x2", x2, X), ("y1", y1, Y), ("y2", y2, Y)):
        if not 0 <= v <= hi:
            raise PreconditionError(f"{name}={v} outside [0, {hi}]")
    u = x1 * y1 - x1 * y2 + x2 * y1 + x2 * y2 - Y * x2 - X * y1
    # rounding slack scaled to the terms involved
    eps = 1e-12 * max(1.0, X * Y)
    assert -X * Y - eps <= u <= eps, (x1, x2, y1, y2, X, Y, u)
    return u

