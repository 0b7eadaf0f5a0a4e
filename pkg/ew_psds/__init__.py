from .fixtures import generate, oracle_match, oracle_psds, perturb, sweep
from .matching import IntersectionMatcher, match_operating_point
from .parser import merge, parse_durations, parse_ground_truth, parse_posteriors
from .processor import ScoringProcessor
from .psds import build_psd_roc, effective_rates, ew_psds, psds, rates, score_scenario
from .report import build_report

__all__ = [
    "IntersectionMatcher",
    "ScoringProcessor",
    "build_psd_roc",
    "build_report",
    "effective_rates",
    "ew_psds",
    "generate",
    "match_operating_point",
    "merge",
    "oracle_match",
    "oracle_psds",
    "parse_durations",
    "parse_ground_truth",
    "parse_posteriors",
    "perturb",
    "psds",
    "rates",
    "score_scenario",
    "sweep",
]
