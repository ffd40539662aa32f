"""Simulation and analysis of optical Bell-test experiments, with attention
to how accidental-coincidence subtraction moves the test statistics."""

from .analytic import (
    ABSENT,
    DEFAULT_HV,
    GeneralHVModel,
    HVModelSpec,
    Polarizer,
    QTModel,
    RealistModel,
    hv_coincidence_prob,
    model_counts_table,
    qt_coincidence_prob,
    realist_coincidence_prob,
    singles_prob,
)
from .bellstats import (
    BellResult,
    ProbabilityQuad,
    ch_theorem_u,
    check_min_assumption_chsh,
    check_no_enhancement_chsh,
    s_chsh,
    s_freedman,
    s_std,
    s_visibility,
    subtract_accidentals,
)
from .simulator import (
    DetectionStream,
    DetectorConfig,
    RunConfig,
    SourceConfig,
    build_time_spectrum,
    count_coincidences,
    estimate_accidentals_delay,
    estimate_accidentals_singles,
    run_angle_scan,
    simulate_run,
)
from .tables import CountsTable

__version__ = "0.1.0"
