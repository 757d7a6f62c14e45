"""Hecke eigenvalues from values of the form: lambda_p = T_p f(z0) / f(z0).

The numerator is a weighted sum of values of f at the Hecke points of z0;
the denominator is f(z0).  Budgets for both come from the quotient bound

    |x/y - x_A/y_A| < eps  whenever  |x - x_A| < eps_x < h eps |y_A| / 2
    and |y - y_A| < eps_y < min((1-h) eps |y_A| / (2 |z_A|), |y_A| / 2),

instantiated with certified coarse bounds on |y_A| and |z_A| = |x_A/y_A|.
"""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from flint import acb, arb, arb_poly

from .ball import abs_bounds, bits_for, is_finite, radius_upper, real_ball, safe_div, working_precision
from .errors import (
    CompositeIndex,
    DeligneBoundViolation,
    DivisionByPossibleZero,
    NonPositiveAccuracy,
    PrecisionExhausted,
    ProbablyZero,
    UnsupportedLevel,
)
from .evaluation import (
    MAX_DOUBLINGS,
    AtkinLehnerSign,
    EvalPlan,
    EvalPoint,
    FormValue,
    _as_exact_arb,
    choose_truncation,
    eisenstein_growth,
    evaluate_form_detailed,
    factor_log2,
    evaluate_truncated_many,
    tail_bound,
    initial_precision,
    next_precision,
    reduce_point,
    resolve_sign,
)
from .qexp import (
    EigenformHandle,
    cusp_basis,
    cusp_dimension,
    eigenvector,
    is_prime,
    _sigma_table,
    bernoulli,
)

COARSE_START = Fraction(1, 10)
COARSE_CAP = 30
MAX_BUDGET_RETRIES = 8
SLACK = Fraction(1023, 1024)  # turns the strict budget inequalities into safe choices

Weight = Union[int, Fraction]


# -- domain types ------------------------------------------------------------

@dataclass(frozen=True)
class ErrorBudget:
    """Accuracy split for one eigenvalue: numerator, denominator and per-summand."""

    eps: Fraction
    h: Fraction
    eps_x: Fraction
    eps_y: Fraction
    per_term: tuple[Fraction, ...] = ()
    term_weights: tuple[Fraction, ...] = ()

    def __post_init__(self):
        if not 0 < self.h < 1:
            raise ValueError("h must lie in (0, 1)")
        if self.per_term and sum(w * b for w, b in zip(self.term_weights, self.per_term)) > self.eps_x:
            raise ValueError("per-term budgets exceed the numerator budget")


@dataclass(frozen=True)
class HeckeEigenvalue:
    p: int
    value: arb
    exact: Optional[int]
    method: str
    z0: EvalPoint
    truncation: int
    term_count: int
    wall_time: float
    weight: int = 0

    def __post_init__(self):
        if self.exact is not None:
            if not self.value.contains(self.exact) or not self.value.rad() < 0.5:
                raise ValueError(f"exact value {self.exact} is not certified by {self.value}")
        if self.weight and not deligne_ok(self.p, self.weight, self.value):
            raise DeligneBoundViolation(f"|lambda_{self.p}| = {self.value} exceeds 2 p^((k-1)/2)")


def deligne_ok(p: int, k: int, value: arb) -> bool:
    """|midpoint| <= 2 p^{(k-1)/2} + radius, unless that is certainly false."""
    with working_precision(128 + k * p.bit_length()):
        bound = 2 * arb(p) ** (arb(k - 1) / 2)
        return not abs(arb(value.mid())) > bound + value.rad()


@dataclass(frozen=True)
class HeckeSum:
    """Numerator value with instrumentation."""

    value: acb
    evaluations: int
    truncation: int


# -- Hecke points ------------------------------------------------------------

def hecke_points(z0: EvalPoint, p: int, N: int, k: int) -> list[tuple[EvalPoint, Weight]]:
    """Points and weights with T_p f(z0) = sum w f(point).

    p not dividing N: p^{k-1} f(p z0) plus (1/p) f((z0 + j)/p) for j < p.
    p dividing N: only the second family.
    """
    if not is_prime(p):
        raise CompositeIndex(f"{p} is not prime")
    out: list[tuple[EvalPoint, Weight]] = []
    inv = Fraction(1, p)
    if N % p:
        out.append((_scale(z0, p, 0), p ** (k - 1)))
    for j in range(p):
        out.append((_scale(z0, inv, Fraction(j, p)), inv))
    return out


def _scale(z: EvalPoint, factor, shift) -> EvalPoint:
    if z.exact is not None:
        return EvalPoint.from_exact(z.exact[0] * factor + shift, z.exact[1] * factor)
    factor, shift = Fraction(factor), Fraction(shift)
    ball = z.ball
    bits = max(_mantissa_bits(ball.real), _mantissa_bits(ball.imag))
    with working_precision(bits + 64):
        w = (ball * factor.numerator + real_ball(shift * factor.denominator, bits + 64)) / factor.denominator
    return EvalPoint(w)


def _mantissa_bits(x: arb) -> int:
    m = x.mid()
    return int(m.man_exp()[0]).bit_length() if m != 0 else 0


def _mirror_terms(z0: EvalPoint, p: int, N: int, k: int) -> list[tuple[EvalPoint, Weight, bool]]:
    """Hecke terms for a purely imaginary z0, pairing (iy - b)/p with (iy + b)/p.

    Each entry is (point, weight, real_only); real_only terms contribute
    weight * Re f(point).
    """
    inv = Fraction(1, p)
    terms: list[tuple[EvalPoint, Weight, bool]] = []
    if N % p:
        terms.append((_scale(z0, p, 0), p ** (k - 1), True))
    terms.append((_scale(z0, inv, 0), inv, True))
    if p == 2:
        # (iy + 1)/2 is its own mirror image modulo 1, so f there is real
        terms.append((_scale(z0, inv, inv), inv, True))
        return terms
    for b in range(1, (p - 1) // 2 + 1):
        terms.append((_scale(z0, inv, Fraction(b, p)), 2 * inv, True))
    return terms


# -- numerator ---------------------------------------------------------------

Evaluator = Callable[[EigenformHandle, EvalPoint, arb, Optional[AtkinLehnerSign]], FormValue]


def _direct(f, point, eps, sign) -> FormValue:
    return evaluate_form_detailed(f, point, eps, sign)


def _default_threads() -> int:
    return os.cpu_count() or 1


def _apply_hecke(f: EigenformHandle, p: int, z0: EvalPoint, eps_x, sign: Optional[AtkinLehnerSign],
                 evaluator: Evaluator = _direct, threads: Optional[int] = None) -> HeckeSum:
    eps_b = _as_exact_arb(eps_x)
    if not eps_b > 0:
        raise NonPositiveAccuracy(f"accuracy must be positive, got {eps_x}")
    k, N = f.weight, f.level
    if z0.purely_imaginary:
        terms = _mirror_terms(z0, p, N, k)
    else:
        terms = [(pt, w, False) for pt, w in hecke_points(z0, p, N, k)]
    count = len(terms)

    def budget(w) -> arb:
        with working_precision(64):
            return (eps_b / (count * real_ball(Fraction(abs(w)), 64) * 2)).lower()

    def run(chunk):
        return [(w, real_only, evaluator(f, pt, budget(w), sign)) for pt, w, real_only in chunk]

    nthreads = max(1, min(threads or 1, count))
    if nthreads == 1:
        results = run(terms)
    else:
        chunks = [terms[i::nthreads] for i in range(nthreads)]
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = [r for part in pool.map(run, chunks) for r in part]

    prec = max(r[2].prec for r in results) + 16
    with working_precision(prec):
        all_real = all(r[1] for r in results)
        total = arb(0) if all_real else acb(0)
        for w, real_only, fv in results:
            wb = real_ball(Fraction(w), prec)
            total += wb * fv.value.real if real_only else wb * fv.value
    value = total if isinstance(total, acb) else acb(total, 0)
    truncation = max(r[2].plan.truncation or 0 for r in results)
    return HeckeSum(value, count, truncation)


def apply_hecke(f: EigenformHandle, p: int, z0: EvalPoint, eps_x, sign: Optional[AtkinLehnerSign] = None,
                threads: Optional[int] = None) -> acb:
    """Ball containing T_p f(z0) with radius < eps_x."""
    sign = resolve_sign(f, sign)
    eps_b = _as_exact_arb(eps_x)
    for _ in range(MAX_BUDGET_RETRIES):
        out = _apply_hecke(f, p, z0, eps_b, sign, threads=threads)
        if radius_upper(out.value) < _as_exact_arb(eps_x):
            return out.value
        with working_precision(64):
            eps_b = (eps_b / 4).lower()
    raise PrecisionExhausted("Hecke sum did not reach the requested radius")


# -- coarse bounds and budgets -----------------------------------------------

def coarse_nonzero_bounds(evaluator: Callable[[Fraction], Union[arb, acb]],
                          start: Fraction = COARSE_START, cap: int = COARSE_CAP) -> tuple[Fraction, Fraction, Fraction]:
    """(lower, upper, eps~) bounding |x_A| for any later x_A within eps~ of x.

    ``evaluator(e)`` returns a ball of radius < e around the true value x; its
    midpoint is the coarse estimate x~.  eps~ runs through 0.1, 0.01, ...
    until |x~| - 2 eps~ > 0, and the bounds are |x~| -+ 2 eps~.
    """
    eps_t = Fraction(start)
    for _ in range(cap):
        ball = evaluator(eps_t)
        lo, hi = _mid_abs_bounds(ball)
        if lo - 2 * eps_t > 0:
            return lo - 2 * eps_t, hi + 2 * eps_t, eps_t
        eps_t /= 10
    raise ProbablyZero("evaluation point too close to a zero of f; choose another --z0")


def _mid_abs_bounds(ball) -> tuple[Fraction, Fraction]:
    """Exact rational bounds on |midpoint(ball)|."""
    if isinstance(ball, acb):
        re, im = ball.real.mid(), ball.imag.mid()
        lo, hi = abs_bounds(acb(re, im))
    else:
        m = abs(arb(ball.mid()))
        lo, hi = m, m
    return _arb_to_fraction(lo.lower(), down=True), _arb_to_fraction(hi.upper(), down=False)


def _arb_to_fraction(x: arb, down: bool) -> Fraction:
    man, exp = x.mid().man_exp() if x.mid() != 0 else (0, 0)
    v = Fraction(int(man)) * (Fraction(2) ** int(exp))
    r = x.rad()
    if r != 0:
        rm, re = r.man_exp()
        rv = Fraction(int(rm)) * (Fraction(2) ** int(re))
        v = v - rv if down else v + rv
    return v


def quotient_budget(eps, h, y_lower, x_upper) -> tuple[Fraction, Fraction]:
    """(eps_x, eps_y) satisfying the quotient bound with |y_A| >= y_lower, |x_A| <= x_upper."""
    eps, h, y_lower, x_upper = (Fraction(v) for v in (eps, h, y_lower, x_upper))
    if eps <= 0:
        raise NonPositiveAccuracy("accuracy must be positive")
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    if y_lower <= 0:
        raise ValueError("need a positive lower bound for |y_A|")
    z_upper = x_upper / y_lower
    eps_x = h * eps * y_lower / 2 * SLACK
    cap_y = (1 - h) * eps * y_lower / (2 * z_upper) if z_upper > 0 else y_lower / 2
    eps_y = min(cap_y, y_lower / 2) * SLACK
    return eps_x, eps_y


def _simplify_down(x: Fraction, bits: int = 64) -> Fraction:
    # a nearby smaller dyadic keeps later ball conversions exact and cheap
    if x <= 0:
        return x
    e = x.numerator.bit_length() - x.denominator.bit_length() - bits
    scale = Fraction(2) ** e
    return Fraction(int(x / scale)) * scale


def make_budget(eps, h, y_lower, x_upper, eps_tx, eps_ty, term_weights: Sequence[Weight] = ()) -> ErrorBudget:
    eps_x, eps_y = quotient_budget(eps, h, y_lower, x_upper)
    eps_x = _simplify_down(min(eps_x, eps_tx))
    eps_y = _simplify_down(min(eps_y, eps_ty))
    n = len(term_weights)
    ws = tuple(abs(Fraction(w)) for w in term_weights)
    per = tuple(eps_x / (n * w) * SLACK for w in ws) if n else ()
    return ErrorBudget(Fraction(eps), Fraction(h), eps_x, eps_y, per, ws)


# -- eigenvalue --------------------------------------------------------------

def round_eigenvalue(value: arb, space_dimension: int) -> Optional[int]:
    """The integer n in ``value`` when the eigenvalue is rational, else None.

    n is returned only when the whole ball lies within 1/2 of n, so every
    point of the ball rounds to the same integer.
    """
    if space_dimension != 1 or not value.is_finite() or not value.rad() < 0.5:
        return None
    with working_precision(64 + _mag_bits(value)):
        n = int((value.mid() + arb(1) / 2).floor().unique_fmpz())
        inside = value.lower() > n - arb(1) / 2 and value.upper() < n + arb(1) / 2
    if inside and value.contains(n):
        return n
    return None


def _mag_bits(x: arb) -> int:
    """Bits needed for the integer part of any point of x."""
    top = abs(x).upper()
    if top == 0:
        return 0
    man, exp = top.man_exp()
    return max(0, int(man).bit_length() + int(exp))


def eigenvalue_numerical(f: EigenformHandle, p: int, eps, z0: Optional[EvalPoint] = None,
                         h=None, method: str = "direct", threads: Optional[int] = None) -> HeckeEigenvalue:
    """Certified ball for lambda_p with radius < eps."""
    start = time.perf_counter()
    if not is_prime(p):
        raise CompositeIndex(f"{p} is not prime")
    eps = Fraction(eps)
    if eps <= 0:
        raise NonPositiveAccuracy(f"accuracy must be positive, got {eps}")
    h = Fraction(1, 2) if h is None else Fraction(h)
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    if method == "eisenstein":
        if f.level != 1 or f.source != "computed-level-1":
            raise UnsupportedLevel("the Eisenstein method needs a computed level-1 eigenform")
        evaluator: Evaluator = _eisenstein
    elif method == "direct":
        evaluator = _direct
    else:
        raise ValueError(f"unknown method {method!r}")
    z0 = z0 or EvalPoint.from_exact(0, 1)
    sign = resolve_sign(f, None)
    threads = _default_threads() if threads is None else threads

    y_lo, _, eps_ty = coarse_nonzero_bounds(lambda e: evaluator(f, z0, _as_exact_arb(e), sign).value)
    try:
        _, x_up, eps_tx = coarse_nonzero_bounds(
            lambda e: _apply_hecke(f, p, z0, _as_exact_arb(e), sign, evaluator, threads).value)
    except ProbablyZero:
        # only an upper bound on |x_A| enters the budget; a tiny numerator is fine
        eps_tx = COARSE_START / 10 ** (COARSE_CAP - 1)
        x_up = _mid_abs_bounds(_apply_hecke(f, p, z0, _as_exact_arb(eps_tx), sign, evaluator, threads).value)[1] + 2 * eps_tx

    budget = make_budget(eps, h, y_lo, x_up, eps_tx, eps_ty)
    eps_x, eps_y = budget.eps_x, budget.eps_y
    for _ in range(MAX_BUDGET_RETRIES):
        num = _apply_hecke(f, p, z0, _as_exact_arb(eps_x), sign, evaluator, threads)
        den = evaluator(f, z0, _as_exact_arb(eps_y), sign)
        prec = max(den.prec, initial_precision(eps)) + 64
        try:
            with working_precision(prec):
                lam = safe_div(num.value, den.value, prec)
        except DivisionByPossibleZero:
            lam = None
        if lam is not None and is_finite(lam) and lam.imag.contains(0) and radius_upper(lam) < _as_exact_arb(eps):
            value = lam.real
            dim = f.field_degree
            exact = round_eigenvalue(value, dim)
            truncation = max(num.truncation, den.plan.truncation or 0)
            return HeckeEigenvalue(p, value, exact, method, z0, truncation, num.evaluations,
                                   time.perf_counter() - start, f.weight)
        eps_x /= 4
        eps_y /= 4
    raise PrecisionExhausted("eigenvalue ball did not shrink below the target radius")


# -- Eisenstein route --------------------------------------------------------

_eis_lock = threading.Lock()
_eis_cache: dict = {}


def clear_eisenstein_cache() -> None:
    with _eis_lock:
        _eis_cache.clear()


def _eisenstein_poly(k: int, T: int) -> arb_poly:
    key = ("poly", k, T)
    with _eis_lock:
        poly = _eis_cache.get(key)
    if poly is None:
        poly = arb_poly(_eisenstein_coeffs(k, T))
        with _eis_lock:
            _eis_cache[key] = poly
    return poly


def _eisenstein_coeffs(k: int, T: int) -> list[arb]:
    """Exact balls for the coefficients a_0..a_T of E_k (constant term 1)."""
    key = ("series", k)
    with _eis_lock:
        have = _eis_cache.get(key)
    if have is None or len(have) < T + 1:
        scale = Fraction(-2 * k) / bernoulli(k)
        sig = _sigma_table(T, k - 1)
        ints = [1] + [int(scale * s) for s in sig[1:T + 1]]
        have = [arb(c) for c in ints]
        with _eis_lock:
            _eis_cache[key] = have
    return have[:T + 1]


def _monomial_weights(f: EigenformHandle, prec: int) -> tuple[list[arb], list[tuple[int, int]]]:
    """w with f = Delta * sum_j w_j E4^{a_j} E6^{b_j}."""
    k = f.weight
    key = ("weights", k, f.embedding)
    with _eis_lock:
        cached = _eis_cache.get(key)
    if cached is not None and cached[0] >= prec:
        return cached[1], cached[2]
    prec = max(-(-prec // 256) * 256, 2 * cached[0] if cached else 0)
    basis = cusp_basis(k, max(cusp_dimension(k), 1))
    pairs = list(basis.exponent_pairs)
    _, c = eigenvector(k, f.embedding, prec)
    d = len(pairs)
    with working_precision(prec):
        R = [[real_ball(x, prec) for x in row] for row in basis.transform]
        w = []
        for j in range(d):
            acc = arb(0)
            for i in range(d):
                if basis.transform[i][j]:
                    acc += c[i] * R[i][j]
            w.append(acc)
    with _eis_lock:
        _eis_cache[key] = (prec, w, pairs)
    return w, pairs


def _e4_e6(point: EvalPoint, eps: arb, prec: int) -> tuple[acb, acb, int]:
    """E4 and E6 at one point from a shared q and a shared truncation.

    T is chosen for E6, whose coefficient bound is the larger one; the same T
    is past the monotonicity threshold for E4's bound as well.
    """
    # many reduced points share Im(z); the truncation only depends on it and eps
    key = None
    if point.exact is not None and eps.rad() == 0:
        key = ("trunc", point.exact[1], tuple(int(v) for v in eps.mid().man_exp()))
    with _eis_lock:
        hit = _eis_cache.get(key) if key else None
    if hit is None:
        T, tail6 = choose_truncation(point.imag_lower, 6, eps, growth=eisenstein_growth(6))
        tail4 = tail_bound(point.imag_lower, T, eisenstein_growth(4))
        if key:
            with _eis_lock:
                _eis_cache[key] = (T, tail4, tail6)
    else:
        T, tail4, tail6 = hit
    e4, e6 = evaluate_truncated_many(
        [(_eisenstein_poly(4, T), tail4), (_eisenstein_poly(6, T), tail6)], point, T, prec)
    return e4, e6, T


def _log2_upper(x: arb) -> int:
    top = abs(x).upper()
    if top == 0:
        return 0
    man, exp = top.man_exp()
    return int(man).bit_length() + int(exp)


def _homogeneous(w: Sequence[arb], pairs: Sequence[tuple[int, int]], e4, e6):
    """sum_j w_j E4^{a_j} E6^{b_j} over pairs with 4a + 6b fixed, sorted by b.

    Consecutive pairs differ by (a, b) -> (a - 3, b + 2), so with A = E4^3 and
    B = E6^2 the sum is E4^{a_J} E6^{b_0} sum_j w_j A^{J-j} B^j, accumulated
    without dividing by A or B (E6 vanishes at i, E4 at rho).
    """
    a_last, b_first = pairs[-1][0], pairs[0][1]
    A, B = e4 ** 3, e6 ** 2
    acc = w[0]
    b_pow = 1
    for j in range(1, len(w)):
        b_pow = b_pow * B
        acc = acc * A + w[j] * b_pow
    return acc * e4 ** a_last * e6 ** b_first


def _eisenstein(f: EigenformHandle, z: EvalPoint, eps, sign=None) -> FormValue:
    return eisenstein_path_value_detailed(f, z, eps)


def eisenstein_path_value_detailed(f: EigenformHandle, z: EvalPoint, eps) -> FormValue:
    if f.level != 1 or f.source != "computed-level-1":
        raise UnsupportedLevel("the Eisenstein route is only available for computed level-1 forms")
    eps_b = _as_exact_arb(eps)
    if not eps_b > 0:
        raise NonPositiveAccuracy(f"accuracy must be positive, got {eps}")
    k = f.weight
    key = ("extra", k, f.embedding)
    with _eis_lock:
        extra = _eis_cache.get(key)
    if extra is None:
        # the monomial weights are large and the sum cancels down to f / Delta
        w, _ = _monomial_weights(f, 128)
        extra = max(_log2_upper(x) for x in w) + 16
    base = bits_for(eps_b) + factor_log2(z, 1, k) + 32
    prec = base + extra
    for _ in range(MAX_DOUBLINGS + 1):
        plan = reduce_point(z, 1, k, None, prec)
        w, pairs = _monomial_weights(f, prec)
        with working_precision(prec):
            inner_eps = arb(2) ** (-prec + 8)
        e4, e6, t_used = _e4_e6(plan.reduced_point, inner_eps, prec)
        with working_precision(prec):
            if plan.reduced_point.purely_imaginary:
                e4, e6 = e4.real, e6.real
            poly = _homogeneous(w, pairs, e4, e6)
            delta = (e4 ** 3 - e6 ** 2) / 1728
            value = plan.factor * delta * poly
            if not isinstance(value, acb):
                value = acb(value, 0)
            elif plan.reduced_point.purely_imaginary and z.purely_imaginary:
                value = acb(value.real, 0)
        if is_finite(value) and radius_upper(value) < eps_b:
            with _eis_lock:
                _eis_cache[key] = max(_eis_cache.get(key, 0), prec - base)
            return FormValue(value, replace(plan, truncation=t_used), prec)
        prec = next_precision(prec, value, eps_b)
    raise PrecisionExhausted("Eisenstein evaluation did not reach the requested radius")


def eisenstein_path_value(f: EigenformHandle, z: EvalPoint, eps) -> acb:
    """f(z) through f = P(E4, E6), with radius < eps."""
    return eisenstein_path_value_detailed(f, z, eps).value
