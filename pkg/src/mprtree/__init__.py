"""Binary tree random-access algorithms on the K-collision channel."""

from .asymptotics import (
    asymptotic_L,
    complex_gamma,
    extract_empirical_oscillation,
    oscillation_spectrum,
    solve_functional_equation,
)
from .errors import NumericalGuardError, RunawayError
from .exact import (
    conditional_throughput,
    expected_cri,
    expected_cri_closed_form,
    expected_cri_coefficient_path,
    expected_cri_mta,
    expected_cri_recursive,
    ln_table,
)
from .model import ChannelConfig, CriStatistic, Feedback, Variant, classify_slot
from .simulator import ArrivalProcess, estimate_L_n, run_arrivals, run_cri
from .stability import (
    linear_bounds,
    poisson_mixture_L,
    stable_throughput_bounds,
    sweep_lambda_S_over_K,
)

__all__ = [
    "ArrivalProcess",
    "ChannelConfig",
    "CriStatistic",
    "Feedback",
    "NumericalGuardError",
    "RunawayError",
    "Variant",
    "asymptotic_L",
    "classify_slot",
    "complex_gamma",
    "conditional_throughput",
    "estimate_L_n",
    "expected_cri",
    "expected_cri_closed_form",
    "expected_cri_coefficient_path",
    "expected_cri_mta",
    "expected_cri_recursive",
    "extract_empirical_oscillation",
    "linear_bounds",
    "ln_table",
    "oscillation_spectrum",
    "poisson_mixture_L",
    "run_arrivals",
    "run_cri",
    "solve_functional_equation",
    "stable_throughput_bounds",
    "sweep_lambda_S_over_K",
]
