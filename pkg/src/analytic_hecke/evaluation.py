"""Rigorous evaluation of an eigenform at a point of the upper half plane.

The pipeline for one value f(z):

1. ``reduce_point``: translate and invert (z -> -1/z for level 1, the
   Atkin-Lehner involution z -> -1/(Nz) for N = 2, 3) until the imaginary
   part stops growing, remembering the automorphy factor;
2. ``choose_truncation``: the shortest q-expansion whose tail is provably
   below the target, using the Ramanujan-Petersson coefficient bound;
3. ``evaluate_truncated``: the polynomial in q = exp(2 pi i z) with the tail bound
   added to the radius.

``evaluate_form`` wraps these in an adaptive precision loop.
"""

from __future__ import annotations

import math
import threading
import weakref
from dataclasses import dataclass, replace
from functools import lru_cache
from fractions import Fraction
from typing import Optional, Sequence, Union

from flint import acb, arb, arb_poly

from .ball import (
    abs_bounds,
    bits_for,
    complex_exp,
    is_finite,
    radius_upper,
    real_ball,
    working_precision,
)
from .errors import (
    IndeterminateSign,
    NonPositiveAccuracy,
    NonPositiveImaginaryPart,
    ParseError,
    PrecisionExhausted,
    UncertainRegion,
    UnsupportedLevel,
)
from .qexp import EigenformHandle, bernoulli, eigenform_coeffs

MAX_REDUCTION_STEPS = 64
MAX_DOUBLINGS = 8
FALLBACK_TRUNCATION = 100
REDUCIBLE_LEVELS = (1, 2, 3)

Gauss = tuple[Fraction, Fraction]  # exact re, im


# -- domain types ------------------------------------------------------------

@dataclass(frozen=True)
class EvalPoint:
    """A point (or small ball) in the upper half plane.

    Points given exactly keep their Gaussian rational coordinates in
    ``exact`` and are rebuilt as balls at whatever precision is asked for;
    otherwise ``ball`` is the enclosure itself.
    """

    ball: Optional[acb] = None
    exact: Optional[Gauss] = None

    def __post_init__(self):
        if self.exact is not None:
            if self.exact[1] <= 0:
                raise NonPositiveImaginaryPart(f"Im(z) = {self.exact[1]} is not positive")
        elif self.ball is None:
            raise ValueError("an EvalPoint needs a ball or exact coordinates")
        elif not self.ball.imag > 0:
            raise NonPositiveImaginaryPart(f"ball {self.ball} is not inside the upper half plane")

    @classmethod
    def from_exact(cls, re, im, prec: int = 64) -> "EvalPoint":
        return cls(None, (Fraction(re), Fraction(im)))

    @classmethod
    def parse(cls, text: str) -> "EvalPoint":
        """Parse literals like ``i``, ``2i``, ``0.3+1.1i``, ``-1/2+3/4i``."""
        re, im = parse_complex(text)
        return cls.from_exact(re, im)

    @property
    def z(self) -> acb:
        return self.ball if self.ball is not None else self.at(64)

    def at(self, prec: int) -> acb:
        if self.exact is None:
            return self.ball
        return acb(real_ball(self.exact[0], prec), real_ball(self.exact[1], prec))

    @property
    def imag_lower(self) -> arb:
        if self.exact is not None:
            return real_ball(self.exact[1], 64).lower()
        return self.ball.imag.lower()

    @property
    def purely_imaginary(self) -> bool:
        if self.exact is not None:
            return self.exact[0] == 0
        return self.ball.real.is_zero()

    def __str__(self) -> str:
        if self.exact is not None:
            re, im = self.exact
            imag = "" if im == 1 else _frac_str(im)
            if not re:
                return f"{imag}i"
            return f"{_frac_str(re)}+{imag}i"
        return str(self.ball)


@dataclass(frozen=True)
class AtkinLehnerSign:
    level: int
    sign: int
    certified: bool = False

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("an Atkin-Lehner sign is +1 or -1")


@dataclass(frozen=True)
class EvalPlan:
    """How to get f(original) from f(reduced_point).

    f(original) = factor * sign**used_wN * f(reduced_point); ``used_wN`` is
    the parity of the number of Atkin-Lehner steps taken.
    """

    original: EvalPoint
    reduced_point: EvalPoint
    factor: acb
    used_wN: bool
    steps: int = 0
    truncation: Optional[int] = None
    tail_bound: Optional[arb] = None


# -- truncation --------------------------------------------------------------

def truncation_d(k: int) -> int:
    """Exponent d with |a_n| <= n^d for a normalized newform of weight k."""
    if k < 1:
        raise ValueError("weight must be positive")
    return (k + 1) // 2 if k % 2 else (k + 2) // 2


@lru_cache(maxsize=None)
def eisenstein_growth(k: int) -> tuple[Fraction, int]:
    """(C, e) with |a_n(E_k)| <= C n^e for n >= 1.

    a_n = |2k/B_k| sigma_{k-1}(n) and sigma_{k-1}(n) <= zeta(k-1) n^(k-1),
    with zeta(s) <= 1 + 1/(s-1).
    """
    c = abs(Fraction(2 * k) / bernoulli(k))
    return c * (1 + Fraction(1, k - 2)), k - 1


def _as_exact_arb(x) -> arb:
    if isinstance(x, arb):
        return x
    if isinstance(x, acb):
        raise TypeError("expected a real quantity")
    return real_ball(Fraction(x), 128)


def tail_bound(y, T: int, growth: tuple) -> arb:
    """Upper bound for |sum_{n>T} a_n q^n| when |a_n| <= C n^e, valid for T >= e/(2 pi y)."""
    C, e = growth
    y_b = _as_exact_arb(y)
    with working_precision(64):
        if not arb(T) >= e / (2 * arb.pi() * y_b.lower()):
            raise ValueError("T is below the monotonicity threshold e/(2 pi y)")
        return _tail_expression(y_b.lower(), T, real_ball(Fraction(C), 64), e).upper()


def _tail_expression(y: arb, T: int, C, e: int) -> arb:
    two_pi_y = 2 * arb.pi() * y
    return C * (e + 1) / two_pi_y * (-two_pi_y * T).exp() * arb(T) ** e


def _float_threshold(y: float, log_c: float, e: int, log_eps: float, lo: int) -> int:
    """Least integer T >= lo with log of the tail expression below log_eps, in floats."""
    two_pi_y = 2 * math.pi * y

    def g(T: float) -> float:
        return log_c + math.log(e + 1) - math.log(two_pi_y) - two_pi_y * T + e * math.log(T) - log_eps

    if g(lo) < 0:
        return lo
    hi = lo * 2
    while g(hi) >= 0:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if g(mid) < 0:
            hi = mid
        else:
            lo = mid
    return hi


def choose_truncation(y, k: int, eps, *, growth: Optional[tuple] = None, prec: int = 64) -> tuple[int, arb]:
    """Smallest T with T >= d/(2 pi y) and (d+1)/(2 pi y) e^{-2 pi y T} T^d < eps.

    ``y`` is a lower bound for Im(z) over the evaluation ball.  Both
    conditions are checked in ball arithmetic, so a True verdict is rigorous.
    If T = 1 already qualifies, 100 is returned instead, so that the series is
    still meaningfully evaluated.  ``growth=(C, e)`` replaces the newform
    coefficient bound n^d by C n^e (used for Eisenstein series).

    Returns (T, tail_bound) with tail_bound an exact upper bound for the
    expression at the returned T.
    """
    eps_b = _as_exact_arb(eps)
    if not eps_b > 0:
        raise NonPositiveAccuracy(f"accuracy must be positive, got {eps}")
    y_b = _as_exact_arb(y)
    if not y_b > 0:
        raise NonPositiveImaginaryPart(f"imaginary part bound must be positive, got {y}")
    if growth is None:
        C, e = 1, truncation_d(k)
    else:
        C, e = growth
        C = real_ball(Fraction(C), prec) if not isinstance(C, arb) else C

    with working_precision(prec):
        y_b = y_b.lower()
        two_pi_y = 2 * arb.pi() * y_b

        def first(T: int) -> bool:
            return arb(T) >= e / two_pi_y

        def second(T: int) -> bool:
            return _tail_expression(y_b, T, C, e) < eps_b

        # first() is monotone; find its threshold from a float guess, then fix up
        yf = float(y_b.mid())
        T0 = max(1, math.ceil(e / (2 * math.pi * yf)) if yf > 0 else 1)
        while T0 > 1 and first(T0 - 1):
            T0 -= 1
        while not first(T0):
            T0 += 1
        # second() is decreasing in T once T >= T0.  Start from a float
        # estimate of its threshold and step until the certified predicate
        # flips, which lands on the same T as a linear scan from T0.
        T = max(T0, _float_threshold(float(y_b.mid()), float(arb(C).log().mid()), e,
                                     float(eps_b.log().mid()), T0))
        if second(T):
            while T > T0 and second(T - 1):
                T -= 1
        else:
            T += 1
            while not second(T):
                T += 1
        if T == 1:
            T = FALLBACK_TRUNCATION
        return T, _tail_expression(y_b, T, C, e).upper()


# -- point reduction ---------------------------------------------------------

def _gmul(a: Gauss, b: Gauss) -> Gauss:
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _ginv_neg(z: Gauss, N: int) -> Gauss:
    # -1/(N z) = -conj(z) / (N |z|^2)
    n2 = N * (z[0] * z[0] + z[1] * z[1])
    return (-z[0] / n2, z[1] / n2)


def _round_half(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def _factor_ball(prod, inversions: int, N: int, k: int, prec: int) -> acb:
    """N^{-k c / 2} * prod^{-k} for c = number of inversions."""
    with working_precision(prec):
        if isinstance(prod, tuple):
            prod = acb(real_ball(prod[0], prec), real_ball(prod[1], prec))
        f = acb(1) if inversions == 0 else prod ** (-k)
        if N > 1 and inversions:
            f *= arb(N).sqrt() ** (-k * inversions)
        return f


@lru_cache(maxsize=1 << 16)
def _reduce_exact(z: Gauss, N: int) -> tuple[Gauss, Gauss, int, int]:
    # Integer version of the loop: z = (a + b i)/c, and N = 0 means
    # translation only.  prod = (u + v i)/w accumulates the inverted points.
    a, b, c = _common_denominator(z)
    u, v, w = 1, 0, 1
    inversions = 0
    for step in range(MAX_REDUCTION_STEPS):
        a -= ((2 * a + c) // (2 * c)) * c
        norm = a * a + b * b
        if not N or N * norm >= c * c:
            return (Fraction(a, c), Fraction(b, c)), (Fraction(u, w), Fraction(v, w)), inversions, step
        u, v, w = u * a - v * b, u * b + v * a, w * c
        g = math.gcd(math.gcd(u, v), w)
        u, v, w = u // g, v // g, w // g
        # -1/(N z) = (-a c + b c i) / (N (a^2 + b^2))
        a, b, c = -a * c, b * c, N * norm
        g = math.gcd(math.gcd(a, b), c)
        a, b, c = a // g, b // g, c // g
        inversions += 1
    raise UncertainRegion("reduction did not terminate within the step cap")


def _common_denominator(z: Gauss) -> tuple[int, int, int]:
    re, im = z
    c = re.denominator * im.denominator // math.gcd(re.denominator, im.denominator)
    return re.numerator * (c // re.denominator), im.numerator * (c // im.denominator), c


def _reduced_imag(z: EvalPoint, N: int) -> float:
    (_, im), _, _, _ = _reduce_exact(z.exact, N if N in REDUCIBLE_LEVELS else 0)
    return float(im)


def factor_log2(z: EvalPoint, N: int, k: int) -> int:
    """Rough log2 of the automorphy factor's size, for choosing a precision."""
    if z.exact is None:
        plan = reduce_point(z, N, k, None, 64)
        hi = abs_bounds(plan.factor)[1]
        return max(0, int(hi.mid().man_exp()[1]) + int(hi.mid().man_exp()[0]).bit_length()) if hi > 0 else 0
    _, (u, v), inversions, _ = _reduce_exact(z.exact, N if N in REDUCIBLE_LEVELS else 0)
    if not inversions:
        return 0
    mag = -k * 0.5 * math.log2(float(u * u + v * v)) - 0.5 * k * inversions * math.log2(N) if N > 1 else \
        -k * 0.5 * math.log2(float(u * u + v * v))
    return max(0, math.ceil(mag))


def reduce_point(z: EvalPoint, N: int, k: int, sign: Optional[AtkinLehnerSign] = None,
                 prec: int = 64) -> EvalPlan:
    """Move z to a point with larger imaginary part.

    Level 1: translate to |Re| <= 1/2 and invert z -> -1/z while |z|^2 < 1,
    using f(z) = z^{-k} f(-1/z).  Levels 2 and 3: the same with the
    Atkin-Lehner map, f(z) = sign N^{(2-k)/2} N^{k-1} (Nz)^{-k} f(-1/(Nz)),
    inverting while |z|^2 < 1/N.  Other levels: translation only.

    Exact points are reduced in exact rational arithmetic.  For balls, an
    inversion is taken only when |z|^2 < 1/N is certain; a ball straddling
    the circle stops the loop (either branch is valid, and on the circle
    inversion cannot raise Im).
    """
    if N < 1:
        raise ValueError("level must be positive")
    invert = N in REDUCIBLE_LEVELS
    if z.exact is not None:
        (re, im), prod, inversions, step = _reduce_exact(z.exact, N if invert else 0)
        reduced = EvalPoint.from_exact(re, im, prec)
        factor = _factor_ball(prod, inversions, N, k, prec)
        return EvalPlan(z, reduced, factor, bool(inversions % 2) and N > 1, step)

    with working_precision(prec):
        w = z.z
        prod_b = acb(1)
        inversions = 0
        threshold = arb(1) / N
        for step in range(MAX_REDUCTION_STEPS):
            m = int(arb(w.real.mid() + arb(1) / 2).floor().unique_fmpz())
            w = w - m
            r2 = w.real * w.real + w.imag * w.imag
            if not invert or not r2 < threshold:
                break
            prod_b *= w
            w = -1 / (N * w)
            inversions += 1
            if not w.imag > 0:
                raise UncertainRegion("ball left the upper half plane during reduction")
        else:
            raise UncertainRegion("reduction did not terminate within the step cap")
        factor = _factor_ball(prod_b, inversions, N, k, prec)
        return EvalPlan(z, EvalPoint(w), factor, bool(inversions % 2) and N > 1, step)


# -- series evaluation -------------------------------------------------------

def evaluate_truncated(coeffs: Sequence, z: Union[EvalPoint, acb], T: int, tail_bound, prec: int) -> acb:
    """sum_{n<=T} a_n q^n at q = e^{2 pi i z}, plus a disc of radius tail_bound.

    ``coeffs`` holds a_0..a_T (ints, Fractions or arb balls).  On the
    imaginary axis everything is done over the reals and the imaginary part
    of the result is exactly zero.
    """
    return evaluate_truncated_many([(coeffs, tail_bound)], z, T, prec)[0]


def evaluate_truncated_many(series: Sequence[tuple[Sequence, object]], z: Union[EvalPoint, acb],
                            T: int, prec: int) -> list[acb]:
    """:func:`evaluate_truncated` for several (coeffs, tail_bound) pairs sharing one q.

    ``coeffs`` may also be a ready-made arb_poly of degree at most T.
    """
    point = z if isinstance(z, EvalPoint) else EvalPoint(z)
    out = []
    with working_precision(prec):
        if point.purely_imaginary:
            q = (-2 * arb.pi() * point.at(prec).imag).exp()
        else:
            q = complex_exp(2 * acb.pi() * acb(0, 1) * point.at(prec), prec)
        for coeffs, tail_bound in series:
            if isinstance(coeffs, arb_poly):
                if coeffs.degree() > T:
                    raise ValueError(f"polynomial has degree {coeffs.degree()} > {T}")
                poly = coeffs
            else:
                if len(coeffs) < T + 1:
                    raise ValueError(f"need {T + 1} coefficients, got {len(coeffs)}")
                poly = arb_poly([c if isinstance(c, arb) else real_ball(c, prec) for c in coeffs[: T + 1]])
            acc = poly(q)
            tail = arb(0) if tail_bound is None else arb(tail_bound)
            if isinstance(acc, arb):
                if tail != 0:
                    acc = acc + arb(0, tail)
                out.append(acb(acc, 0))
            else:
                if tail != 0:
                    t = arb(0, tail)
                    acc = acc + acb(t, t)
                out.append(acc)
    return out


def _magnitude_bits(y: float, C: float, e: int) -> int:
    """log2 of max_n C n^e e^{-2 pi y n}, a guess at the size of the largest term."""
    if y <= 0:
        return 0
    n_star = max(1.0, e / (2 * math.pi * y))
    val = math.log2(max(C, 1e-300)) + e * math.log2(n_star) - 2 * math.pi * y * n_star / math.log(2)
    return max(0, math.ceil(val))


def next_precision(prec: int, value, eps) -> int:
    """Precision for a retry: grow by the observed radius deficit, at least 32 bits."""
    if not is_finite(value):
        return 2 * prec
    rad = radius_upper(value)
    if rad == 0:
        return prec + 32
    deficit = bits_for(eps) - bits_for(rad)
    return prec + min(max(32, deficit + 32), prec)


def initial_precision(eps, extra_bits: int = 0) -> int:
    return max(64, bits_for(eps) + 32) + extra_bits


@dataclass(frozen=True)
class FormValue:
    """f(z) as a ball, with the plan (reduction, truncation) that produced it."""

    value: acb
    plan: EvalPlan
    prec: int


_sign_cache: "weakref.WeakKeyDictionary[EigenformHandle, AtkinLehnerSign]" = weakref.WeakKeyDictionary()
_sign_lock = threading.Lock()


def resolve_sign(f: EigenformHandle, sign: Optional[AtkinLehnerSign] = None) -> Optional[AtkinLehnerSign]:
    """The Atkin-Lehner sign to use for f: given, stored on the handle, or certified now."""
    if f.level not in (2, 3):
        return sign
    if sign is not None:
        return sign
    if f.atkin_lehner_sign is not None:
        return AtkinLehnerSign(f.level, f.atkin_lehner_sign, certified=False)
    with _sign_lock:
        cached = _sign_cache.get(f)
    if cached is None:
        cached = atkin_lehner_sign(f, f.level, Fraction(1, 10**10))
        with _sign_lock:
            _sign_cache[f] = cached
    return cached


def _series_value(f: EigenformHandle, point: EvalPoint, eps_abs, prec: int) -> tuple[acb, int, arb]:
    """f(point) by its own q-expansion, no reduction.  Returns (value, T, tail)."""
    T, tail = choose_truncation(point.imag_lower, f.weight, eps_abs)
    coeffs = [0] + eigenform_coeffs(f, T, prec)
    return evaluate_truncated(coeffs, point, T, tail, prec), T, tail


def evaluate_form_detailed(f: EigenformHandle, z: EvalPoint, eps, sign: Optional[AtkinLehnerSign] = None,
                           prec: Optional[int] = None) -> FormValue:
    """Like :func:`evaluate_form`, also returning the plan and final precision."""
    eps_b = _as_exact_arb(eps)
    if not eps_b > 0:
        raise NonPositiveAccuracy(f"accuracy must be positive, got {eps}")
    if f.level not in REDUCIBLE_LEVELS and f.source == "computed-level-1":
        raise UnsupportedLevel(f"level {f.level} needs user-supplied coefficients")
    sign = resolve_sign(f, sign)
    k = f.weight
    d = truncation_d(k)
    if prec is None:
        if z.exact is not None:
            y = _reduced_imag(z, f.level)
        else:
            y = float(reduce_point(z, f.level, k, sign, 64).reduced_point.imag_lower.mid())
        prec = initial_precision(eps_b, factor_log2(z, f.level, k) + _magnitude_bits(y, 1.0, d) + 2)
    work = prec
    for attempt in range(MAX_DOUBLINGS + 1):
        plan = reduce_point(z, f.level, k, sign, work)
        if plan.used_wN and sign is None:
            raise ValueError("an Atkin-Lehner sign is needed to reduce this point")
        _, f_hi = abs_bounds(plan.factor)
        with working_precision(64):
            eps_inner = (eps_b / (4 * f_hi)).lower() if f_hi > 0 else eps_b
        if not eps_inner > 0:
            raise PrecisionExhausted("automorphy factor overflowed")
        T, tail = choose_truncation(plan.reduced_point.imag_lower, k, eps_inner)
        coeffs = [0] + eigenform_coeffs(f, T, work)
        inner = evaluate_truncated(coeffs, plan.reduced_point, T, tail, work)
        with working_precision(work):
            value = plan.factor * inner
            if plan.used_wN and sign.sign == -1:
                value = -value
        if is_finite(value) and radius_upper(value) < eps_b:
            return FormValue(value, replace(plan, truncation=T, tail_bound=tail), work)
        work = next_precision(work, value, eps_b)
    raise PrecisionExhausted(f"could not reach radius {eps} after {MAX_DOUBLINGS} precision doublings")


def evaluate_form(f: EigenformHandle, z: EvalPoint, eps, sign: Optional[AtkinLehnerSign] = None) -> acb:
    """Ball containing f(z) with radius < eps."""
    return evaluate_form_detailed(f, z, eps, sign).value


# -- Atkin-Lehner sign -------------------------------------------------------

def atkin_lehner_sign(f: EigenformHandle, N: int, eps, z_star: Optional[EvalPoint] = None) -> AtkinLehnerSign:
    """Determine s with W_N f = s f by evaluating both sides at z* = 2i.

    f(z*) is summed directly; the W_N side N^{k/2} (N z*)^{-k} f(-1/(N z*))
    is summed directly at -1/(N z*) (imaginary part 1/(2N)).  The sign is
    certified when f(z*) overlaps exactly one of +-(W_N side).
    """
    if N not in (2, 3):
        raise UnsupportedLevel("Atkin-Lehner signs are only used for levels 2 and 3")
    if f.level != N:
        raise ValueError(f"eigenform has level {f.level}, not {N}")
    z_star = z_star or EvalPoint.from_exact(0, 2)
    if z_star.exact is None or z_star.exact[1] < 1:
        raise ValueError("z* must be an exact point with Im(z*) >= 1")
    k = f.weight
    eps_b = _as_exact_arb(eps)
    w_point = EvalPoint.from_exact(*_ginv_neg(z_star.exact, N))
    for attempt in range(MAX_DOUBLINGS):
        prec = initial_precision(eps_b) * (2**attempt)
        direct, _, _ = _series_value(f, z_star, eps_b, prec)
        other, _, _ = _series_value(f, w_point, eps_b, prec)
        with working_precision(prec):
            zs = z_star.at(prec)
            mult = arb(N).sqrt() ** k * (N * zs) ** (-k)
            transformed = mult * other
            plus = direct.overlaps(transformed)
            minus = direct.overlaps(-transformed)
        if plus and not minus:
            return AtkinLehnerSign(N, 1, certified=True)
        if minus and not plus:
            return AtkinLehnerSign(N, -1, certified=True)
        if not plus and not minus:
            raise IndeterminateSign("neither sign is consistent; is f a newform of this level?")
        with working_precision(64):
            eps_b = (eps_b * arb(2) ** -32).upper()
    raise IndeterminateSign("both Atkin-Lehner signs remain consistent at attainable precision")


# -- literals ----------------------------------------------------------------

def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else str(x)


def parse_complex(text: str) -> Gauss:
    """Exact (re, im) from ``a+bi`` style literals with decimal or fractional parts."""
    try:
        return _parse_complex(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a complex literal: {text!r}") from exc


def _parse_complex(text: str) -> Gauss:
    s = text.strip().replace(" ", "").replace("j", "i")
    if not s:
        raise ValueError("empty complex literal")
    if not s.endswith("i"):
        return Fraction(s), Fraction(0)
    body = s[:-1]
    # split at the last sign that is not part of an exponent and not leading
    cut = -1
    for idx in range(len(body) - 1, 0, -1):
        if body[idx] in "+-" and body[idx - 1] not in "eE":
            cut = idx
            break
    if cut == -1:
        re_s, im_s = "0", body
    else:
        re_s, im_s = body[:cut], body[cut:]
    if im_s in ("", "+"):
        im = Fraction(1)
    elif im_s == "-":
        im = Fraction(-1)
    else:
        im = Fraction(im_s)
    return Fraction(re_s), im


def clear_evaluation_caches() -> None:
    _reduce_exact.cache_clear()
    with _sign_lock:
        _sign_cache.clear()
