"""Command line entry point ``eigen``.

    eigen --level 1 --weight 12 --prime 10007 --digits 3
    eigen qexp --weight 12 --terms 5
    eigen bench --row 1,200,101,direct --row 1,200,101,eisenstein --out bench/
    eigen fetch --level 2 --weight 8 --label 2.8.a.a --endpoint URL
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import click

from . import errors
from .ball import decimal_parts, format_ball, radius_below
from .bench import BenchRow, format_table, run_bench
from .coeffio import DEFAULT_ENDPOINT, fetch_remote_coefficients, ingest_coefficients
from .evaluation import EvalPoint
from .hecke import HeckeEigenvalue, eigenvalue_numerical
from .qexp import (
    EigenformHandle,
    cusp_dimension,
    eigenform_coeffs,
    exact_coefficient,
    is_prime,
    level_one_eigenform,
)

EXIT_USAGE = 2
EXIT_ZERO = 3
EXIT_PRECISION = 4
EXIT_NETWORK = 5
EXIT_FAILURE = 1

_EXIT_CODES = [
    (errors.ProbablyZero, EXIT_ZERO),
    (errors.PrecisionExhausted, EXIT_PRECISION),
    (errors.NetworkError, EXIT_NETWORK),
    (errors.NotFound, EXIT_NETWORK),
    (errors.CompositeIndex, EXIT_USAGE),
    (errors.UnsupportedLevel, EXIT_USAGE),
    (errors.EmptySpace, EXIT_USAGE),
    (errors.EmbeddingOutOfRange, EXIT_USAGE),
    (errors.NonPositiveAccuracy, EXIT_USAGE),
    (errors.NonPositiveImaginaryPart, EXIT_USAGE),
    (errors.ParseError, EXIT_USAGE),
    (errors.NotNormalized, EXIT_USAGE),
    (ValueError, EXIT_USAGE),
]

PROBABLY_ZERO_MESSAGE = "evaluation point too close to a zero of f; choose another --z0"


@dataclass(frozen=True)
class RunConfig:
    level: int
    weight: int
    prime: int
    digits: int
    method: str = "direct"
    z0: Optional[str] = None
    h: Optional[str] = None
    embedding: Optional[int] = None
    coeffs_path: Optional[str] = None
    output_format: str = "text"
    threads: Optional[int] = None

    def __post_init__(self):
        if self.digits < 1:
            raise errors.NonPositiveAccuracy("--digits must be at least 1")
        if not is_prime(self.prime):
            raise errors.CompositeIndex(f"{self.prime} is not prime")
        if self.method not in ("direct", "eisenstein"):
            raise click.UsageError(f"unknown method {self.method!r}")
        if self.method == "eisenstein" and self.level != 1:
            raise errors.UnsupportedLevel("the Eisenstein method requires level 1")

    @property
    def eps(self) -> Fraction:
        return Fraction(1, 10**self.digits)


def _fail(exc: Exception) -> None:
    code = EXIT_FAILURE
    for cls, c in _EXIT_CODES:
        if isinstance(exc, cls):
            code = c
            break
    name = type(exc).__name__
    message = PROBABLY_ZERO_MESSAGE if isinstance(exc, errors.ProbablyZero) else str(exc)
    click.echo(f"error ({name}): {message}", err=True)
    sys.exit(code)


def build_form(config: RunConfig) -> EigenformHandle:
    if config.coeffs_path:
        cf = ingest_coefficients(config.coeffs_path)
        if (cf.level, cf.weight) != (config.level, config.weight):
            raise errors.ParseError(
                f"{config.coeffs_path} holds level {cf.level} weight {cf.weight}, "
                f"not level {config.level} weight {config.weight}")
        if config.method == "eisenstein":
            raise errors.UnsupportedLevel("the Eisenstein method needs a computed level-1 form, not a file")
        return cf.to_handle()
    if config.level != 1:
        raise errors.UnsupportedLevel(f"level {config.level} needs --coeffs with the newform's coefficients")
    return level_one_eigenform(config.weight, config.embedding or 0)


def run_eigenvalue(config: RunConfig) -> HeckeEigenvalue:
    f = build_form(config)
    z0 = EvalPoint.parse(config.z0) if config.z0 else None
    h = Fraction(config.h) if config.h is not None else None
    return eigenvalue_numerical(f, config.prime, config.eps, z0=z0, h=h,
                                method=config.method, threads=config.threads)


# -- rendering ---------------------------------------------------------------

def structured_record(result: HeckeEigenvalue, digits: int) -> dict:
    mid, rad = decimal_parts(result.value, digits)
    return {
        "p": result.p,
        "midpoint": mid,
        "radius": rad,
        "exact": None if result.exact is None else str(result.exact),
        "method": result.method,
        "z0": str(result.z0),
        "truncation": result.truncation,
        "term_count": result.term_count,
        "wall_time_ms": round(result.wall_time * 1000, 3),
    }


def render_structured(record: dict) -> str:
    return json.dumps(record, sort_keys=False, separators=(", ", ": "))


def render_text(result: HeckeEigenvalue, digits: int) -> str:
    mid, rad = decimal_parts(result.value, digits)
    lines = [f"lambda_{result.p} = {mid} ± {rad}"]
    if result.exact is not None:
        lines.append(f"exact: {result.exact}")
    lines.append(
        f"method: {result.method}  z0: {result.z0}  truncation: {result.truncation}  "
        f"evaluations: {result.term_count}  time: {result.wall_time * 1000:.1f} ms")
    return "\n".join(lines)


# -- commands ----------------------------------------------------------------

@click.group(invoke_without_command=True, context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--level", type=int, default=1, show_default=True, help="Level N of the newform.")
@click.option("--weight", type=int, help="Weight k.")
@click.option("--prime", type=int, help="Prime p of the Hecke operator T_p.")
@click.option("--digits", type=int, default=10, show_default=True, help="Target radius 10^-digits.")
@click.option("--method", type=click.Choice(["direct", "eisenstein"]), default="direct", show_default=True)
@click.option("--z0", help="Evaluation point, e.g. i or 0.3+1.1i (default i).")
@click.option("--h", "h", help="Split of the error budget between numerator and denominator, in (0, 1).")
@click.option("--embedding", type=int, help="Which Galois conjugate (index of the real root), level 1 only.")
@click.option("--coeffs", "coeffs_path", type=click.Path(exists=True, dir_okay=False),
              help="Coefficient file for the newform (required for level > 1).")
@click.option("--format", "output_format", type=click.Choice(["text", "structured"]), default="text",
              show_default=True)
@click.option("--threads", type=int, default=None, help="Worker threads for the Hecke points (default: cores).")
@click.pass_context
def main(ctx, level, weight, prime, digits, method, z0, h, embedding, coeffs_path, output_format, threads):
    """Certified Hecke eigenvalue lambda_p of a modular eigenform."""
    if ctx.invoked_subcommand is not None:
        return
    if weight is None or prime is None:
        raise click.UsageError("--weight and --prime are required")
    try:
        config = RunConfig(level, weight, prime, digits, method, z0, h, embedding, coeffs_path,
                           output_format, threads if threads is not None else os.cpu_count())
        result = run_eigenvalue(config)
    except (errors.HeckeError, ValueError) as exc:
        if isinstance(exc, click.UsageError):
            raise
        _fail(exc)
        return
    if output_format == "structured":
        click.echo(render_structured(structured_record(result, digits)))
    else:
        click.echo(render_text(result, digits))
    if not radius_below(result.value, config.eps):
        sys.exit(EXIT_PRECISION)


@main.command()
@click.option("--level", type=int, default=1, show_default=True)
@click.option("--weight", type=int, required=True)
@click.option("--terms", type=int, default=10, show_default=True)
@click.option("--embedding", type=int, default=0, show_default=True)
@click.option("--digits", type=int, default=30, show_default=True, help="Digits shown for non-rational forms.")
def qexp(level, weight, terms, embedding, digits):
    """Print a_1 .. a_terms of a level-1 eigenform."""
    try:
        if level != 1:
            raise errors.UnsupportedLevel("q-expansions are computed for level 1 only")
        if terms < 1:
            raise errors.InsufficientLength("--terms must be positive")
        if cusp_dimension(weight) == 0:
            raise errors.EmptySpace(f"S_{weight}(1) is zero-dimensional")
        f = level_one_eigenform(weight, embedding)
        if cusp_dimension(weight) == 1:
            for n in range(1, terms + 1):
                click.echo(str(exact_coefficient(f, n)))
        else:
            prec = int(digits * 3.33) + 64
            for a in eigenform_coeffs(f, terms, prec):
                click.echo(format_ball(a, digits))
    except errors.HeckeError as exc:
        _fail(exc)


@main.command()
@click.option("--row", "rows", multiple=True, help="LEVEL,WEIGHT,PRIME[,METHOD]; repeatable.")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              help="File with one LEVEL,WEIGHT,PRIME[,METHOD] row per line.")
@click.option("--repeats", type=int, default=5, show_default=True)
@click.option("--digits", type=int, default=10, show_default=True)
@click.option("--coeffs", "coeffs_paths", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Coefficient files used for rows of matching level and weight.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Directory for the CSV tables.")
def bench(rows, spec_path, repeats, digits, coeffs_paths, out_dir):
    """Median timings (cold caches) plus truncation and residual tables."""
    texts = list(rows)
    if spec_path:
        for line in Path(spec_path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                texts.append(line)
    try:
        parsed = [BenchRow.parse(t) for t in texts]
    except ValueError as exc:
        raise click.UsageError(str(exc))
    files = {}
    for path in coeffs_paths:
        cf = ingest_coefficients(path)
        files[(cf.level, cf.weight)] = cf

    def form_for(row: BenchRow) -> EigenformHandle:
        if (row.level, row.weight) in files:
            return files[(row.level, row.weight)].to_handle()
        if row.level != 1:
            raise errors.UnsupportedLevel(f"no coefficient file for level {row.level} weight {row.weight}")
        return level_one_eigenform(row.weight, 0)

    results = run_bench(parsed, repeats=repeats, digits=digits, form_for=form_for,
                        out_dir=Path(out_dir) if out_dir else None)
    click.echo(format_table(results))


@main.command()
@click.option("--level", type=int, required=True)
@click.option("--weight", type=int, required=True)
@click.option("--label", required=True, help="Newform label, e.g. 2.8.a.a.")
@click.option("--endpoint", default=DEFAULT_ENDPOINT, show_default=True, help="Base URL of the REST API.")
@click.option("--cache-dir", type=click.Path(file_okay=False),
              help="Cache directory (default: $HECKE_EIGEN_CACHE or ~/.cache/analytic_hecke).")
def fetch(level, weight, label, endpoint, cache_dir):
    """Download a newform's coefficients into the local cache."""
    try:
        cf = fetch_remote_coefficients(level, weight, label, endpoint, cache_dir)
    except errors.HeckeError as exc:
        _fail(exc)
        return
    sign = "" if cf.atkin_lehner_sign is None else f", Atkin-Lehner sign {cf.atkin_lehner_sign:+d}"
    click.echo(f"{label}: level {cf.level}, weight {cf.weight}, {len(cf.coefficients)} coefficients{sign}")


if __name__ == "__main__":  # pragma: no cover
    main()
