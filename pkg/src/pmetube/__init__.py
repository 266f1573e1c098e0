"""Porous medium flow in a strip: stationary profiles, explicit evolution,
traveling waves, ODE barriers and long-time diagnostics."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .section import (  # noqa: F401
    SectionGrid,
    SectionProfile,
    analytic_lambda1,
    cosine_subsolution,
    critical_speed,
    dilate_profile,
    numeric_lambda1,
    relax_profile,
    shoot_profile,
    stationary_residual,
)
from .dynamics import (  # noqa: F401
    RunConfig,
    RunRecord,
    TubeField,
    TubeGrid,
    admissible_t0,
    cfl_dt,
    from_rescaled,
    reaction_step,
    run_evolution,
    step_pme,
    step_rescaled,
    to_rescaled,
)
from .waves import (  # noqa: F401
    FRONT_THRESHOLD,
    FrontSeries,
    WaveProfile,
    front_curve,
    measure_speed,
    normalize_wave,
    reflect_wave,
    relax_wave,
    wave_residual,
)
from .barriers import (  # noqa: F401
    BarrierParams,
    BarrierPath,
    asymptotic_shift,
    delta_schedule,
    epsilon_bookkeeping,
    evaluate_barrier,
    find_delta_bar,
    integrate_barrier,
    super_closed_form,
)
from .diagnostics import (  # noqa: F401
    ErrorSeries,
    FitResult,
    OrderingReport,
    concave_envelope_gap,
    error_series,
    exp_rate_fit,
    flat_problem_checks,
    front_law_audit,
    front_series,
    inner_uniform_check,
    linear_fit,
    ordering_audit,
    outer_support_max,
    outer_vanishing_time,
    relative_error_window,
    search_alignment,
)
