"""Simulate and analyze debates checked by small quantum finite automata."""

from .analysis import DebateReport, exact_report, growth_fit, monte_carlo, read_csv, write_csv
from .compile import (
    build_fact1_verifier,
    build_main_element,
    build_theorem1_verifier,
    build_theorem3_verifier,
    choose_d,
    complete_superoperator,
)
from .engine import Caps, exact_round, run_debate, run_round, sample_round
from .machine import VerifierSpec, derandomize, overall_acceptance, validate
from .polytime import (
    WalkParams,
    build_pal_verifier,
    build_ufib_verifier,
    build_upower_verifier,
    build_uprime_verifier,
    build_usquare_verifier,
    random_walk_subroutine,
)
from .quantum import (
    OperationElement,
    RotationTracker,
    Superoperator,
    apply_exact,
    apply_sampled,
    check_completeness,
    q1_probability,
    rotate,
)
from .specfile import dump, parse_machine_spec
from .tm import LinearSpaceATM, SingleTapeTM, encode_string, history_stream, next_configuration

__version__ = "0.1.0"
