"""Event-level Monte Carlo of a pulsed classical-light Bell experiment.

A source emits pulse pairs sharing a random polarization direction ``lam``.
Each arm detects its pulse with probability ``efficiency * cos(lam - axis)**2``
(1 in place of the Malus factor when the polarizer is absent), independently
of the other arm for fixed ``lam``. Arm A registers at the emission time, arm
B after an exponential delay with mean ``pulse_lifetime``; both get Gaussian
jitter. Each detector adds its own Poisson dark counts.

All times are in seconds here. Coincidences are counted by greedy one-to-one
matching inside a window on ``tB - tA``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .analytic import ABSENT, Polarizer, Setting, singles_prob
from .errors import ConfigError, PreconditionError
from .tables import CountsTable

NOISE = -1
NS = 1e-9


@dataclass(frozen=True)
class SourceConfig:
    emission_rate: float = 1e6
    pulse_lifetime: float = 5 * NS
    min_gap: float = 0.0
    # "uniform" on [0, pi), or a density callable over arrays of lam
    lambda_distribution: Union[str, Callable] = "uniform"

    def __post_init__(self):
        if not self.emission_rate > 0:
            raise ConfigError("emission_rate", "must be > 0")
        if not self.pulse_lifetime >= 0:
            raise ConfigError("pulse_lifetime", "must be >= 0")
        if not self.min_gap >= 0:
            raise ConfigError("min_gap", "must be >= 0")
        if not (self.lambda_distribution == "uniform" or callable(self.lambda_distribution)):
            raise ConfigError("lambda_distribution", "must be 'uniform' or a density function")

    @property
    def effective_rate(self) -> float:
        """Mean emissions per second after dead-time thinning."""
        return self.emission_rate / (1.0 + self.emission_rate * self.min_gap)


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 1.0
    dark_rate: float = 0.0
    jitter_sigma: float = 0.0

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ConfigError("efficiency", "must lie in (0, 1]")
        if not self.dark_rate >= 0:
            raise ConfigError("dark_rate", "must be >= 0")
        if not self.jitter_sigma >= 0:
            raise ConfigError("jitter_sigma", "must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    armA: Setting = ABSENT
    armB: Setting = ABSENT
    duration: float = 1.0
    window_lo: float = -3 * NS
    window_hi: float = 17 * NS
    accidental_delay: float = 100 * NS
    master_seed: int = 0
    run_index: int = 0

    def __post_init__(self):
        if not self.duration >= 0:
            raise ConfigError("duration", "must be >= 0")
        if not self.window_lo < self.window_hi:
            raise ConfigError("window_hi", "must exceed window_lo")
        # delay must clear the window several times over
        if self.accidental_delay < 5 * (self.window_hi - self.window_lo) * (1 - 1e-12):
            raise ConfigError("accidental_delay", "must be at least 5 x the window width")
        if self.master_seed < 0:
            raise ConfigError("master_seed", "must be >= 0")
        if self.run_index < 0:
            raise ConfigError("run_index", "must be >= 0")

    @property
    def window_width(self) -> float:
        return self.window_hi - self.window_lo


@dataclass(frozen=True, eq=False)
class DetectionStream:
    """Sorted detection times with optional truth.

    ``emission_id`` is the source emission that produced each detection, or
    ``NOISE``; ``hidden`` is that emission's ``lam`` (NaN for noise).
    ``n_emissions`` counts emissions up to the last one that reached either
    detector, which equals the total when efficiencies are 1.
    """

    timestamps: np.ndarray
    emission_id: Optional[np.ndarray] = None
    hidden: Optional[np.ndarray] = None
    n_emissions: Optional[int] = None

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise PreconditionError("timestamps must be nondecreasing")
        object.__setattr__(self, "timestamps", t)

    def __len__(self):
        return self.timestamps.size

    def shifted(self, dt: float) -> "DetectionStream":
        return replace(self, timestamps=self.timestamps + dt)

    @property
    def has_truth(self) -> bool:
        return self.emission_id is not None

    def __eq__(self, other):
        if not isinstance(other, DetectionStream):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return np.array_equal(a, b, equal_nan=True)

        return (same(self.timestamps, other.timestamps)
                and same(self.emission_id, other.emission_id)
                and same(self.hidden, other.hidden)
                and self.n_emissions == other.n_emissions)


def run_rng(master_seed: int, run_index: int, setting_index: int = 0) -> np.random.Generator:
    """Private generator for one (seed, run, setting) job."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(run_index, setting_index))
    return np.random.default_rng(ss)


def _gated_emissions(rng, rate, min_gap, q, duration):
    """Times and ids of the emissions that pass at least one efficiency gate.

    Each emission passes with probability ``q``, independently. The gap
    between passing emissions spans G ~ Geometric(q) raw gaps, each
    ``min_gap + Exp(rate)``, so it is ``G*min_gap + Gamma(G, 1/rate)``.
    """
    mean_gap = (min_gap + 1.0 / rate) / q
    times, ids = [], []
    t0, id0 = 0.0, -1
    while True:
        n = int(duration / mean_gap + 6 * math.sqrt(duration / mean_gap + 1) + 64)
        g = rng.geometric(q, size=n)
        gaps = g * min_gap + rng.gamma(g, 1.0 / rate)
        t = t0 + np.cumsum(gaps)
        i = id0 + np.cumsum(g)
        keep = t < duration
        times.append(t[keep])
        ids.append(i[keep])
        if not keep[-1]:
            break
        t0, id0 = t[-1], int(i[-1])
    return np.concatenate(times), np.concatenate(ids)


def _sample_lambda(rng, dist, n):
    if dist == "uniform":
        return rng.uniform(0.0, math.pi, size=n)
    # inverse CDF on a fine midpoint grid
    grid = (np.arange(8192) + 0.5) * (math.pi / 8192)
    w = np.clip(np.asarray(dist(grid), dtype=float), 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    edges = np.linspace(0.0, math.pi, grid.size + 1)
    return np.interp(rng.random(n), cdf, edges)


def _dark_counts(rng, rate, duration):
    n = rng.poisson(rate * duration) if rate > 0 and duration > 0 else 0
    return rng.uniform(0.0, duration, size=n)


def _assemble(t_sig, id_sig, lam_sig, t_dark, n_emissions):
    t = np.concatenate([t_sig, t_dark])
    ids = np.concatenate([id_sig, np.full(t_dark.size, NOISE, dtype=np.int64)])
    lam = np.concatenate([lam_sig, np.full(t_dark.size, np.nan)])
    order = np.argsort(t, kind="stable")
    return DetectionStream(t[order], ids[order], lam[order], n_emissions)


def simulate_run(source: SourceConfig, detA: DetectorConfig, detB: DetectorConfig,
                 run: RunConfig, setting_index: int = 0) -> Tuple[DetectionStream, DetectionStream]:
    """Generate the two detector streams for one run."""
    rng = run_rng(run.master_seed, run.run_index, setting_index)
    ea, eb = detA.efficiency, detB.efficiency
    q = 1.0 - (1.0 - ea) * (1.0 - eb)

    if run.duration > 0:
        t, ids = _gated_emissions(rng, source.emission_rate, source.min_gap, q, run.duration)
    else:
        t, ids = np.empty(0), np.empty(0, dtype=np.int64)
    n = t.size

    # which gates opened, conditional on at least one
    u = rng.random(n)
    p_both, p_a_only = ea * eb / q, ea * (1 - eb) / q
    gate_a = u < p_both + p_a_only
    gate_b = (u < p_both) | (u >= p_both + p_a_only)

    lam = _sample_lambda(rng, source.lambda_distribution, n)
    hit_a = gate_a & (rng.random(n) < singles_prob(run.armA, lam))
    hit_b = gate_b & (rng.random(n) < singles_prob(run.armB, lam))

    delay_b = rng.exponential(source.pulse_lifetime, size=n) if source.pulse_lifetime > 0 else np.zeros(n)
    ta = t + detA.jitter_sigma * rng.standard_normal(n)
    tb = t + delay_b + detB.jitter_sigma * rng.standard_normal(n)

    dark_a = _dark_counts(rng, detA.dark_rate, run.duration)
    dark_b = _dark_counts(rng, detB.dark_rate, run.duration)

    n_emissions = int(ids[-1]) + 1 if n else 0
    stream_a = _assemble(ta[hit_a], ids[hit_a], lam[hit_a], dark_a, n_emissions)
    stream_b = _assemble(tb[hit_b], ids[hit_b], lam[hit_b], dark_b, n_emissions)
    return stream_a, stream_b


def match_coincidences(stream_a: DetectionStream, stream_b: DetectionStream,
                       window_lo: float, window_hi: float):
    """Greedy one-to-one pairing; returns index arrays ``(ia, ib)``.

    B detections are taken in time order and each is paired with the earliest
    unpaired A detection with ``tB - tA`` in ``[window_lo, window_hi]``.
    Because all windows have the same width, every A before the last paired
    one is either used or already out of reach, so one pointer suffices.
    """
    ta, tb = stream_a.timestamps, stream_b.timestamps
    if ta.size == 0 or tb.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    first = np.searchsorted(ta, tb - window_hi, side="left")
    stop = np.searchsorted(ta, tb - window_lo, side="right")
    cand = np.flatnonzero(stop > first)

    ia, ib = [], []
    ptr = 0
    for k, f, s in zip(cand.tolist(), first[cand].tolist(), stop[cand].tolist()):
        p = f if f > ptr else ptr
        if p < s:
            ia.append(p)
            ib.append(k)
            ptr = p + 1
    return np.asarray(ia, dtype=np.int64), np.asarray(ib, dtype=np.int64)


def count_coincidences(stream_a: DetectionStream, stream_b: DetectionStream,
                       window_lo: float, window_hi: float) -> int:
    ia, _ = match_coincidences(stream_a, stream_b, window_lo, window_hi)
    return int(ia.size)


def count_true_coincidences(stream_a: DetectionStream, stream_b: DetectionStream,
                            window_lo: float, window_hi: float) -> int:
    """Matched pairs whose two detections come from the same emission."""
    if not (stream_a.has_truth and stream_b.has_truth):
        raise PreconditionError("streams carry no truth metadata")
    ia, ib = match_coincidences(stream_a, stream_b, window_lo, window_hi)
    ea, eb = stream_a.emission_id[ia], stream_b.emission_id[ib]
    return int(np.count_nonzero((ea == eb) & (ea != NOISE)))


@dataclass(frozen=True)
class TimeSpectrum:
    bin_width: float
    range_lo: float
    range_hi: float
    bins: np.ndarray
    # same-emission part of ``bins`` when the streams carry truth
    true_bins: Optional[np.ndarray] = None

    @property
    def edges(self) -> np.ndarray:
        return self.range_lo + self.bin_width * np.arange(self.bins.size + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def total(self) -> int:
        return int(self.bins.sum())


def n_bins(range_lo: float, range_hi: float, bin_width: float) -> int:
    return int(math.ceil((range_hi - range_lo) / bin_width - 1e-9))


def build_time_spectrum(stream_a: DetectionStream, stream_b: DetectionStream,
                        range_lo: float, range_hi: float, bin_width: float) -> TimeSpectrum:
    """Histogram of ``tB - tA``, pairing each B with its nearest A in range."""
    if not bin_width > 0:
        raise PreconditionError("bin_width must be > 0")
    if not range_hi > range_lo:
        raise PreconditionError("range_hi must exceed range_lo")
    nb = n_bins(range_lo, range_hi, bin_width)
    ta, tb = stream_a.timestamps, stream_b.timestamps
    if ta.size == 0 or tb.size == 0:
        return TimeSpectrum(bin_width, range_lo, range_hi, np.zeros(nb, dtype=np.int64),
                            np.zeros(nb, dtype=np.int64) if stream_a.has_truth else None)

    first = np.searchsorted(ta, tb - range_hi, side="left")
    stop = np.searchsorted(ta, tb - range_lo, side="right")
    ok = stop > first
    j = np.searchsorted(ta, tb)
    left = np.clip(j - 1, first, stop - 1)
    right = np.clip(j, first, stop - 1)
    left_d = np.abs(tb - ta[np.clip(left, 0, ta.size - 1)])
    right_d = np.abs(tb - ta[np.clip(right, 0, ta.size - 1)])
    nearest = np.where(right_d < left_d, right, left)
    nearest = np.clip(nearest, 0, ta.size - 1)

    dt = (tb - ta[nearest])[ok]
    idx = np.floor((dt - range_lo) / bin_width).astype(np.int64)
    idx = np.clip(idx, 0, nb - 1)
    bins = np.bincount(idx, minlength=nb)

    true_bins = None
    if stream_a.has_truth and stream_b.has_truth:
        same = (stream_a.emission_id[nearest] == stream_b.emission_id)[ok]
        same &= stream_b.emission_id[ok] != NOISE
        true_bins = np.bincount(idx[same], minlength=nb)
    return TimeSpectrum(bin_width, range_lo, range_hi, bins, true_bins)


def estimate_accidentals_delay(stream_a: DetectionStream, stream_b: DetectionStream,
                               delay: float, window_lo: float, window_hi: float) -> int:
    """Coincidences counted after delaying stream A by ``delay``."""
    if delay < 5 * (window_hi - window_lo) * (1 - 1e-12):
        raise PreconditionError("delay must be at least 5 x the window width")
    return count_coincidences(stream_a.shifted(delay), stream_b, window_lo, window_hi)


def estimate_accidentals_singles(rate_a: float, rate_b: float, window_lo: float,
                                 window_hi: float, duration: float) -> float:
    """Chance coincidences expected from two uncorrelated singles rates."""
    if min(rate_a, rate_b, duration) < 0 or window_hi < window_lo:
        raise PreconditionError("rates and duration must be >= 0, window_hi >= window_lo")
    return rate_a * rate_b * (window_hi - window_lo) * duration


@dataclass(frozen=True)
class SettingMeasurement:
    """What one simulated run at a fixed pair of settings yields."""

    coincidences: int
    accidentals: int
    true_coincidences: int
    singles_a: float
    singles_b: float
    n_emissions: int


def measure_setting(source: SourceConfig, detA: DetectorConfig, detB: DetectorConfig,
                    run: RunConfig, setting_index: int = 0) -> SettingMeasurement:
    sa, sb = simulate_run(source, detA, detB, run, setting_index)
    lo, hi = run.window_lo, run.window_hi
    d = run.duration
    return SettingMeasurement(
        coincidences=count_coincidences(sa, sb, lo, hi),
        accidentals=estimate_accidentals_delay(sa, sb, run.accidental_delay, lo, hi),
        true_coincidences=count_true_coincidences(sa, sb, lo, hi),
        singles_a=len(sa) / d if d > 0 else 0.0,
        singles_b=len(sb) / d if d > 0 else 0.0,
        n_emissions=sa.n_emissions or 0,
    )


def scan_settings(base_run: RunConfig, relative_angles_deg: Sequence[float]):
    """``(key, armA, armB)`` for each relative angle, then ``z`` and ``Z``."""
    a_axis = 0.0 if base_run.armA is ABSENT else base_run.armA.axis
    out = [(phi, Polarizer(a_axis), Polarizer(a_axis + math.radians(phi)))
           for phi in relative_angles_deg]
    out.append(("z", Polarizer(a_axis), ABSENT))
    out.append(("Z", ABSENT, ABSENT))
    return out


def scan_measurements(source, detA, detB, base_run: RunConfig,
                      relative_angles_deg: Sequence[float], max_workers: Optional[int] = None):
    """Measure every scan setting; returns ``[(key, SettingMeasurement)]``.

    Setting ``i`` uses seed stream ``(master_seed, run_index, i)``, so results
    do not depend on ``max_workers`` or execution order.
    """
    if len(relative_angles_deg) == 0:
        raise PreconditionError("need at least one relative angle")
    settings = scan_settings(base_run, relative_angles_deg)

    def job(i):
        key, a, b = settings[i]
        run = replace(base_run, armA=a, armB=b)
        return key, measure_setting(source, detA, detB, run, setting_index=i)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(job, range(len(settings))))
    return [job(i) for i in range(len(settings))]


def measurements_table(measured) -> CountsTable:
    entries, acc, sa, sb = {}, {}, {}, {}
    z = Z = None
    for key, m in measured:
        if key == "z":
            z = m.coincidences
        elif key == "Z":
            Z = m.coincidences
        else:
            entries[key] = m.coincidences
        acc[key] = m.accidentals
        sa[key] = m.singles_a
        sb[key] = m.singles_b
    return CountsTable(entries=entries, z=z, Z=Z, accidentals=acc, singlesA=sa, singlesB=sb)


def run_angle_scan(source: SourceConfig, detA: DetectorConfig, detB: DetectorConfig,
                   base_run: RunConfig, relative_angles_deg: Sequence[float],
                   max_workers: Optional[int] = None) -> CountsTable:
    """Simulate a full angle scan plus the polarizer-removed runs."""
    measured = scan_measurements(source, detA, detB, base_run, relative_angles_deg, max_workers)
    return measurements_table(measured)
