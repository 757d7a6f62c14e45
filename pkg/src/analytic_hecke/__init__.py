"""Certified Hecke eigenvalues of modular eigenforms by evaluation in ball arithmetic."""

from .ball import BallComplex, BallReal, format_ball, parse_ball, working_precision
from .errors import HeckeError
from .evaluation import (
    AtkinLehnerSign,
    EvalPoint,
    atkin_lehner_sign,
    choose_truncation,
    evaluate_form,
    reduce_point,
)
from .hecke import (
    HeckeEigenvalue,
    apply_hecke,
    eigenvalue_numerical,
    eisenstein_path_value,
    hecke_points,
)
from .qexp import EigenformHandle, from_coefficients, level_one_eigenform

__version__ = "0.1.0"


def clear_caches() -> None:
    """Forget every memoized basis, coefficient list, reduction and sign."""
    from . import evaluation, hecke, qexp

    qexp.clear_caches()
    hecke.clear_eisenstein_cache()
    evaluation.clear_evaluation_caches()


__all__ = [
    "AtkinLehnerSign",
    "BallComplex",
    "BallReal",
    "EigenformHandle",
    "EvalPoint",
    "HeckeEigenvalue",
    "HeckeError",
    "apply_hecke",
    "atkin_lehner_sign",
    "choose_truncation",
    "clear_caches",
    "eigenvalue_numerical",
    "eisenstein_path_value",
    "evaluate_form",
    "format_ball",
    "from_coefficients",
    "hecke_points",
    "level_one_eigenform",
    "parse_ball",
    "reduce_point",
    "working_precision",
]
