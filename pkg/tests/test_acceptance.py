"""Acceptance criteria, each at its stated tolerance.

Every test records a single PASS/FAIL line, listed together at the end of
the pytest run.
"""

import math
import time
from dataclasses import replace

import numpy as np

from bellacc.analytic import DEFAULT_HV, Polarizer, QTModel, RealistModel, hv_coincidence_prob, model_counts_table
from bellacc.bellstats import (
    ch_theorem_u,
    check_min_assumption_chsh,
    s_chsh,
    s_freedman,
    s_visibility,
    table_std,
    table_visibility,
)
from bellacc.harness import (
    ASPECT_1981_ADJUSTED,
    ASPECT_1981_RAW,
    TITTEL_RAW_VISIBILITY,
    TITTEL_REPORTED_VISIBILITY,
    aspect_like_config,
    clean_config,
    rate_scaling_study,
    removal_pattern_study,
    tittel_adjustment_arithmetic,
)
from bellacc.simulator import (
    NS,
    DetectorConfig,
    DetectionStream,
    RunConfig,
    SourceConfig,
    count_coincidences,
    estimate_accidentals_delay,
    estimate_accidentals_singles,
    run_angle_scan,
    simulate_run,
)
from bellacc.tables import CountsTable

from oracles import max_matching, random_hv_spec, random_quad

SEED = 1981


def test_1_closed_form_matches_quadrature(criterion):
    grid = np.linspace(0.0, 180.0, 37)
    t0 = time.perf_counter()
    p = [hv_coincidence_prob(DEFAULT_HV, Polarizer(0.0), Polarizer(math.radians(d))) for d in grid]
    elapsed = time.perf_counter() - t0
    closed = 0.125 + 0.25 * np.cos(np.radians(grid)) ** 2
    err = float(np.max(np.abs(np.asarray(p) - closed)))
    ok = err < 1e-9 and elapsed < 1.0
    criterion(1, "quadrature vs closed form", ok, f"max err {err:.2e}, {elapsed:.3f} s")
    assert ok


def test_2_aspect_fixture(criterion):
    rv, rc = table_visibility(ASPECT_1981_RAW).value, s_chsh(ASPECT_1981_RAW).value
    av, ac = table_visibility(ASPECT_1981_ADJUSTED).value, s_chsh(ASPECT_1981_ADJUSTED).value
    ok = (abs(rv - 0.55) <= 0.01 and abs(rc + 0.12) <= 0.01 and abs(av - 0.88) <= 0.01
          and abs(ac - 0.09) <= 0.01 and rc <= 0 < ac)
    criterion(2, "Aspect 1981 counts", ok,
              f"raw V={rv:.4f} C={rc:.4f}; adjusted V={av:.4f} C={ac:.4f}")
    assert ok


def test_3_ideal_statistics(criterion):
    angles = [0, 22.5, 45, 67.5, 90]
    qt, lr = model_counts_table(QTModel(), angles), model_counts_table(RealistModel(), angles)
    r2 = math.sqrt(2)
    checks = [
        (s_chsh(qt).value, (r2 - 1) / 2), (s_chsh(lr).value, (r2 - 2) / 4),
        (s_freedman(qt).value, r2 / 4), (s_freedman(lr).value, r2 / 8),
        (table_visibility(qt).value, 1.0), (table_visibility(lr).value, 0.5),
    ]
    err = max(abs(a - b) for a, b in checks)
    verdicts = [s_chsh(qt).violated, not s_chsh(lr).violated,
                s_freedman(qt).violated, not s_freedman(lr).violated]
    ok = err <= 1e-9 and all(verdicts)
    criterion(3, "ideal model statistics", ok, f"max err {err:.1e}")
    assert ok


def test_4_monte_carlo_curve(criterion):
    source, det, _, run = clean_config(seed=SEED, duration=0.12)
    angles = [0.0, 22.5, 45.0, 67.5, 90.0]
    t0 = time.perf_counter()
    table = run_angle_scan(source, det, det, run, angles)
    elapsed = time.perf_counter() - t0
    n = table.Z
    worst, details = 0.0, []
    for phi in angles:
        p = 0.125 + 0.25 * math.cos(math.radians(phi)) ** 2
        sigma = math.sqrt(p * (1 - p) / n)
        pulls = (table.get(phi) / n - p) / sigma
        worst = max(worst, abs(pulls))
        details.append(f"{phi:g}:{pulls:+.2f}")
    ok = n >= 1e5 and worst <= 3.0 and elapsed < 30
    criterion(4, "simulated realist curve", ok,
              f"Z={n:.0f}, pulls {' '.join(details)}, {elapsed:.1f} s")
    assert ok


def test_5_rate_scaling(criterion):
    source, det, _, run = aspect_like_config(seed=SEED, duration=2.0)
    top = source.emission_rate
    t0 = time.perf_counter()
    rep = rate_scaling_study(source, det, det, run, [top / 8, top / 4, top / 2, top])
    elapsed = time.perf_counter() - t0
    s1 = rep.quantities["true coincidence slope"]
    s2 = rep.quantities["accidental slope"]
    ok = abs(s1 - 1.0) <= 0.1 and abs(s2 - 2.0) <= 0.2 and elapsed < 120
    criterion(5, "rate scaling", ok, f"slopes {s1:.3f}, {s2:.3f}, {elapsed:.1f} s")
    assert ok


def test_6_removal_pattern(criterion):
    rep = removal_pattern_study(*aspect_like_config(seed=SEED, duration=2.0))
    q = rep.quantities
    sim_ok = (abs(q["A1/A"] - 2.0) <= 3 * q["A1/A sigma"]
              and abs(q["A2/A"] - 4.0) <= 3 * q["A2/A sigma"])
    acc = ASPECT_1981_RAW.accidentals
    fix_ok = round(acc["z"] / acc[0.0], 2) == 2.0 and round(acc["Z"] / acc[0.0], 2) == 3.91
    ok = sim_ok and fix_ok
    criterion(6, "removal pattern", ok,
              f"A1/A={q['A1/A']:.3f}+/-{q['A1/A sigma']:.3f}, A2/A={q['A2/A']:.3f}+/-{q['A2/A sigma']:.3f}")
    assert ok


def test_7_cross_method_accidentals(criterion):
    rng = np.random.default_rng(SEED)
    pulls = []
    for k in range(10):
        width = rng.uniform(5, 30) * NS
        lo = -rng.uniform(0, 0.3) * width
        source = SourceConfig(emission_rate=rng.uniform(1e6, 2e7), pulse_lifetime=rng.uniform(1, 8) * NS)
        det_a = DetectorConfig(efficiency=rng.uniform(0.01, 0.05), dark_rate=rng.uniform(0, 5e4),
                               jitter_sigma=rng.uniform(0, 1) * NS)
        det_b = DetectorConfig(efficiency=rng.uniform(0.01, 0.05), dark_rate=rng.uniform(0, 5e4),
                               jitter_sigma=rng.uniform(0, 1) * NS)
        run = RunConfig(armA=Polarizer(rng.uniform(0, math.pi)), armB=Polarizer(rng.uniform(0, math.pi)),
                        duration=0.5, window_lo=lo, window_hi=lo + width,
                        accidental_delay=rng.uniform(5, 20) * width, master_seed=SEED, run_index=k)
        a, b = simulate_run(source, det_a, det_b, run)
        delayed = estimate_accidentals_delay(a, b, run.accidental_delay, run.window_lo, run.window_hi)
        singles = estimate_accidentals_singles(len(a) / run.duration, len(b) / run.duration,
                                               run.window_lo, run.window_hi, run.duration)
        pulls.append((delayed - singles) / math.sqrt(singles))
    worst = max(abs(p) for p in pulls)
    ok = worst <= 3.0
    criterion(7, "delay vs singles accidentals", ok, "pulls " + " ".join(f"{p:+.2f}" for p in pulls))
    assert ok


def test_8_tittel_adjustment(criterion):
    # ~30% of the mean count as a flat pedestal under a raw visibility of 0.5
    raw_min = 150.0
    raw_max = raw_min * (1 + TITTEL_RAW_VISIBILITY) / (1 - TITTEL_RAW_VISIBILITY)
    rep = tittel_adjustment_arithmetic(raw_max, raw_min, 0.30 * 0.5 * (raw_max + raw_min))
    adj = rep.quantities["adjusted visibility"]
    ok = abs(adj - TITTEL_REPORTED_VISIBILITY) <= 0.01 and rep.quantities["crosses limit"]
    criterion(8, "Tittel visibility adjustment", ok,
              f"adjusted {adj:.4f} vs {TITTEL_REPORTED_VISIBILITY}, crosses limit {rep.quantities['crosses limit']}")
    assert ok


def _random_table(rng):
    Z = float(rng.integers(1, 10**6))
    x, y, z = (float(v) for v in rng.integers(0, Z + 1, size=3))
    return CountsTable(entries={22.5: x, 67.5: y}, z=z, Z=Z)


def test_9_property_suites(criterion):
    rng = np.random.default_rng(SEED)
    failures = []

    # six-number theorem
    for _ in range(1000):
        X, Y = rng.uniform(1e-3, 1e3, size=2)
        x1, x2 = rng.uniform(0, X, size=2)
        y1, y2 = rng.uniform(0, Y, size=2)
        u = ch_theorem_u(x1, x2, y1, y2, X, Y)
        if not -X * Y * (1 + 1e-12) <= u <= 1e-12 * X * Y:
            failures.append("six-number")
            break

    # minimum-assumption CHSH over factorable models
    for _ in range(200):
        r = check_min_assumption_chsh(random_quad(rng, random_hv_spec(rng)))
        if not -1 - 1e-12 <= r.value <= 1e-12:
            failures.append("min-assumption chsh")
            break

    # positive flat subtraction strictly raises visibility
    for _ in range(1000):
        lo = rng.uniform(1, 1e6)
        hi = lo * rng.uniform(1.001, 100)
        p = lo * rng.uniform(1e-6, 1.0)
        if not s_visibility(hi - p, lo - p).value > s_visibility(hi, lo).value:
            failures.append("visibility monotonicity")
            break

    # scale invariance of all four statistics
    tests = (table_std, table_visibility, s_chsh, s_freedman)
    for _ in range(1000):
        t = _random_table(rng)
        if t.get(22.5) + t.get(67.5) == 0:
            continue
        s = t.scaled(10 ** rng.uniform(-6, 6))
        if any(abs(f(s).value - f(t).value) > 1e-12 for f in tests):
            failures.append("scale invariance")
            break

    # greedy matching equals maximum matching
    for _ in range(500):
        na, nb = rng.integers(0, 21, size=2)
        ta = np.sort(rng.integers(0, 50, size=na)).astype(float)
        tb = np.sort(rng.integers(0, 50, size=nb)).astype(float)
        lo = float(rng.integers(-5, 3))
        hi = lo + float(rng.integers(0, 8))
        if count_coincidences(DetectionStream(ta), DetectionStream(tb), lo, hi) != \
                max_matching(ta.tolist(), tb.tolist(), lo, hi):
            failures.append("greedy matching")
            break

    ok = not failures
    criterion(9, "property suites", ok, "all hold" if ok else "failed: " + ", ".join(failures))
    assert ok
