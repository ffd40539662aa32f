import math

import pytest
from hypothesis import given, strategies as st

from bellacc.errors import InsufficientRatesError, PreconditionError
from bellacc.harness import (
    ASPECT_1981_RAW,
    SCENARIOS,
    Expectation,
    aspect_like_config,
    clean_config,
    info,
    loglog_slope,
    near,
    rate_scaling_study,
    removal_pattern_study,
    reproduce_aspect_1981,
    reproduce_tittel_1997,
    required_pedestal_fraction,
    tittel_adjustment_arithmetic,
)
from bellacc.simulator import DetectorConfig


class TestExpectations:
    def test_near(self):
        assert near("x", 1.005, 1.0, 0.01, "t").passed
        assert not near("x", 1.02, 1.0, 0.01, "t").passed
        assert not near("x", float("nan"), 1.0, 0.01, "t").passed

    def test_info_never_fails(self):
        e = info("x", 5.0, 1.0, 0.1, "t")
        assert e.passed is None
        assert "info" in e.render().lower()

    def test_provenance_in_render(self):
        assert "fixture" in near("x", 1.0, 1.0, 0.1, "fixture: demo").render()


class TestAspect:
    def test_all_expectations_pass(self):
        rep = reproduce_aspect_1981()
        failed = [e.name for e in rep.expectations if e.passed is False]
        assert failed == []
        assert rep.passed

    def test_every_expectation_has_tolerance_and_provenance(self):
        for e in reproduce_aspect_1981().expectations:
            assert isinstance(e, Expectation)
            assert e.provenance

    def test_render_shows_flip(self):
        text = reproduce_aspect_1981().render()
        assert "raw chsh" in text and "adjusted chsh" in text


class TestRateScaling:
    def test_needs_three_rates(self):
        src, det, _, run = aspect_like_config(duration=0.01)
        with pytest.raises(InsufficientRatesError):
            rate_scaling_study(src, det, det, run, [1e6])
        with pytest.raises(InsufficientRatesError):
            rate_scaling_study(src, det, det, run, [1e6, 2e6, 3e6])

    def test_slope_fit(self):
        s, e = loglog_slope([1, 2, 4, 8], [10, 40, 160, 640])
        assert s == pytest.approx(2.0)
        assert e > 0
        assert math.isnan(loglog_slope([1, 2, 4], [0, 1, 2])[0])

    def test_short_study(self):
        src, det, _, run = aspect_like_config(seed=3, duration=0.5)
        top = src.emission_rate
        rep = rate_scaling_study(src, det, det, run, [top / 8, top / 4, top / 2, top])
        assert rep.passed, rep.render()


class TestRemovalPattern:
    def test_fixture_ratios(self):
        acc = ASPECT_1981_RAW.accidentals
        assert round(acc["z"] / acc[0.0], 2) == 2.0
        assert round(acc["Z"] / acc[0.0], 2) == 3.91

    def test_quiet_setup_has_undefined_ratios(self):
        rep = removal_pattern_study(*clean_config(duration=0.005))
        assert rep.quantities["A"] == 0
        assert math.isnan(rep.quantities["A1/A"])
        assert any("undefined" in n for n in rep.notes)


class TestTittel:
    def test_full_pedestal(self):
        rep = tittel_adjustment_arithmetic(450, 150, 150)
        assert rep.quantities["raw visibility"] == pytest.approx(0.5)
        assert rep.quantities["adjusted visibility"] == pytest.approx(1.0)
        assert rep.quantities["crosses limit"]

    def test_zero_pedestal(self):
        rep = tittel_adjustment_arithmetic(450, 150, 0)
        assert rep.quantities["adjusted visibility"] == rep.quantities["raw visibility"]
        assert not rep.quantities["crosses limit"]

    @pytest.mark.parametrize("args", [(150, 450, 0), (450, 150, 200), (450, 150, -1)])
    def test_precondition(self, args):
        with pytest.raises(PreconditionError):
            tittel_adjustment_arithmetic(*args)

    @given(st.floats(1.0, 1e6), st.floats(0.0, 0.99), st.floats(1e-3, 1.0))
    def test_positive_pedestal_raises_visibility(self, lo, gap, ped_frac):
        hi = lo / (1 - gap) + 1.0
        rep = tittel_adjustment_arithmetic(hi, lo, ped_frac * lo)
        assert rep.quantities["adjusted visibility"] > rep.quantities["raw visibility"]

    def test_thirty_percent_of_mean(self):
        rep = reproduce_tittel_1997()
        # 0.5 / (1 - 0.3), short of the reported 0.816
        assert rep.quantities["adjusted visibility"] == pytest.approx(0.5 / 0.7, abs=1e-12)
        assert rep.quantities["pedestal / mean counts"] == pytest.approx(0.30)
        assert rep.expectation("adjustment crosses the visibility limit").passed

    def test_required_fraction(self):
        assert required_pedestal_fraction(0.5, 0.816) == pytest.approx(0.3872549, abs=1e-7)
        assert required_pedestal_fraction(0.45, 0.82) == pytest.approx(0.4512195, abs=1e-7)
        v = tittel_adjustment_arithmetic(450, 150, required_pedestal_fraction(0.5, 0.816) * 300)
        assert v.quantities["adjusted visibility"] == pytest.approx(0.816)


class TestScenarios:
    def test_names(self):
        assert set(SCENARIOS) == {"aspect1981", "rate-scaling", "removal-pattern", "tittel1997"}

    def test_aspect_ignores_seed(self):
        assert SCENARIOS["aspect1981"](seed=1).render() == SCENARIOS["aspect1981"](seed=2).render()

    @pytest.mark.slow
    def test_removal_reproducible(self):
        assert SCENARIOS["removal-pattern"](seed=5).render() == SCENARIOS["removal-pattern"](seed=5).render()
