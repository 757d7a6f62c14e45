"""Benchmark rows of (level, weight, prime, method) and write CSV tables.

Each row is run ``repeats`` times with all caches dropped before every run,
so a timing includes building the basis and the coefficients it needs.  The
median is reported.  Besides the timings, two per-row tables are written:
the truncation length used, and log10 |lambda - a_p| against the exact (or
basis-derived) coefficient.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from flint import arb

from .ball import working_precision
from .errors import HeckeError
from .hecke import HeckeEigenvalue, _mag_bits, eigenvalue_numerical
from .qexp import EigenformHandle, eigenform_coeffs, exact_coefficient, level_one_eigenform

METHODS = ("direct", "eisenstein")


@dataclass(frozen=True)
class BenchRow:
    level: int
    weight: int
    prime: int
    method: str = "direct"

    @classmethod
    def parse(cls, text: str) -> "BenchRow":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (3, 4):
            raise ValueError(f"expected LEVEL,WEIGHT,PRIME[,METHOD], got {text!r}")
        method = parts[3] if len(parts) == 4 else "direct"
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        return cls(int(parts[0]), int(parts[1]), int(parts[2]), method)


@dataclass
class BenchResult:
    row: BenchRow
    times: list[float] = field(default_factory=list)
    truncation: Optional[int] = None
    term_count: Optional[int] = None
    log10_residual: Optional[float] = None
    error: Optional[str] = None

    @property
    def median(self) -> Optional[float]:
        return statistics.median(self.times) if self.times else None


FormFactory = Callable[[BenchRow], EigenformHandle]


def _default_form(row: BenchRow) -> EigenformHandle:
    return level_one_eigenform(row.weight, 0)


def _reset_caches() -> None:
    from . import clear_caches

    clear_caches()


def residual_log10(f: EigenformHandle, result: HeckeEigenvalue) -> float:
    """log10 |mid(lambda) - a_p|, with a_p exact when available."""
    p = result.p
    exact = exact_coefficient(f, p)
    prec = 128 + _mag_bits(result.value)
    with working_precision(prec):
        if exact is not None:
            ref = arb(Fraction(exact).numerator) / Fraction(exact).denominator
        else:
            ref = eigenform_coeffs(f, p, prec)[p - 1]
        diff = abs(arb(result.value.mid()) - arb(ref.mid()))
    if diff == 0:
        return -math.inf
    return float(diff.log().mid()) / math.log(10)


def run_bench(rows: Sequence[BenchRow], repeats: int = 5, digits: int = 10,
              form_for: FormFactory = _default_form, threads: Optional[int] = 1,
              out_dir: Optional[Path] = None) -> list[BenchResult]:
    """Median wall time per row; errors are recorded and the run continues."""
    if repeats < 1:
        raise ValueError("repeats must be positive")
    eps = Fraction(1, 10**digits)
    results = []
    for row in rows:
        res = BenchResult(row)
        try:
            for _ in range(repeats):
                _reset_caches()
                f = form_for(row)
                start = time.perf_counter()
                out = eigenvalue_numerical(f, row.prime, eps, method=row.method, threads=threads)
                res.times.append(time.perf_counter() - start)
            res.truncation = out.truncation
            res.term_count = out.term_count
            res.log10_residual = residual_log10(f, out)
        except (HeckeError, ValueError, ArithmeticError) as exc:
            res.error = f"{type(exc).__name__}: {exc}"
        results.append(res)
    if out_dir is not None:
        write_csvs(results, Path(out_dir))
    return results


def write_csvs(results: Iterable[BenchResult], out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    results = list(results)
    paths = {
        "timings": out_dir / "timings.csv",
        "truncation": out_dir / "truncation.csv",
        "residual": out_dir / "residual.csv",
    }
    key = ["level", "weight", "prime", "method"]
    with paths["timings"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(key + ["median_seconds", "repeats", "error"])
        for r in results:
            med = "" if r.median is None else f"{r.median:.6f}"
            w.writerow(_key(r) + [med, len(r.times), r.error or ""])
    with paths["truncation"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(key + ["truncation", "evaluations"])
        for r in results:
            if r.error is None:
                w.writerow(_key(r) + [r.truncation, r.term_count])
    with paths["residual"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(key + ["log10_residual"])
        for r in results:
            if r.error is None:
                w.writerow(_key(r) + [_fmt_log(r.log10_residual)])
    return paths


def _key(r: BenchResult) -> list:
    return [r.row.level, r.row.weight, r.row.prime, r.row.method]


def _fmt_log(x: Optional[float]) -> str:
    if x is None:
        return ""
    return "-inf" if x == -math.inf else f"{x:.3f}"


def format_table(results: Sequence[BenchResult]) -> str:
    lines = [f"{'level':>5} {'weight':>6} {'prime':>8} {'method':>10} {'median s':>10}  note"]
    for r in results:
        med = "-" if r.median is None else f"{r.median:.4f}"
        lines.append(f"{r.row.level:>5} {r.row.weight:>6} {r.row.prime:>8} {r.row.method:>10} {med:>10}  {r.error or ''}")
    return "\n".join(lines)
