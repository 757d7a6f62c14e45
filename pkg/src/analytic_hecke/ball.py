"""Midpoint-radius ball arithmetic over R and C.

The arithmetic itself is delegated to arb (via python-flint): ``BallReal`` and
``BallComplex`` are simply flint's ``arb`` and ``acb`` types, which are
immutable and inclusion-monotone.  What this module adds is the contract the
rest of the package relies on:

* working precision is an explicit argument, applied through
  :func:`working_precision`, never read from ambient state by callers;
* a handful of helpers the evaluator needs (exp, guarded division, modulus
  bounds, conversions from exact rationals);
* the ``"midpoint ± radius"`` text format.
"""

from __future__ import annotations

import math
import re
import threading
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Union

from flint import acb, arb, ctx, fmpz

from .errors import DivisionByPossibleZero

BallReal = arb
BallComplex = acb

Exact = Union[int, Fraction]

# flint keeps its precision in one process-wide context object.  The lock makes
# a precision scope exclusive, so concurrent callers queue instead of seeing
# each other's precision.
_prec_lock = threading.RLock()


class working_precision:
    """Run the body with arb arithmetic at ``prec`` bits.

    Re-entrant; the previous precision is restored on exit.
    """

    __slots__ = ("prec", "_saved")

    def __init__(self, prec: int):
        prec = int(prec)
        if prec < 2:
            raise ValueError(f"precision must be at least 2 bits, got {prec}")
        self.prec = prec

    def __enter__(self) -> int:
        _prec_lock.acquire()
        self._saved = ctx.prec
        ctx.prec = self.prec
        return self.prec

    def __exit__(self, *exc) -> None:
        ctx.prec = self._saved
        _prec_lock.release()


def bits_for(eps) -> int:
    """Number of bits b with 2**-b <= eps (eps > 0, any real-like)."""
    if isinstance(eps, arb):
        eps = eps.lower()
        man, exp = eps.man_exp()
        return max(1, -(int(exp) + int(man).bit_length() - 1) + 1)
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return max(1, math.ceil(-math.log2(eps)) + 1)


# -- conversions -------------------------------------------------------------

def real_ball(value, prec: int) -> arb:
    """Ball enclosing an exact int/Fraction/decimal string, rounded to ``prec`` bits."""
    if isinstance(value, (int, fmpz)):
        return arb(value)  # exact at any precision
    if isinstance(value, str):
        value = Fraction(value)
    with working_precision(prec):
        if isinstance(value, arb):
            return +value
        if isinstance(value, Fraction):
            if value.denominator == 1:
                return arb(value.numerator)
            return arb(value.numerator) / value.denominator
        if isinstance(value, float):
            return arb(value)
        raise TypeError(f"cannot convert {type(value).__name__} to a ball")


def complex_ball(re_part, im_part=0, prec: int = 64) -> acb:
    return acb(real_ball(re_part, prec), real_ball(im_part, prec))


def pi(prec: int) -> arb:
    with working_precision(prec):
        return arb.pi()


def euler_e(prec: int) -> arb:
    with working_precision(prec):
        return arb.const_e()


# -- contract operations -----------------------------------------------------

def complex_exp(z: acb, prec: int) -> acb:
    """Ball containing e^w for every w in ``z``.

    A huge input may overflow to a non-finite ball; callers must check
    :func:`is_finite` and retry.
    """
    if prec < 2:
        raise ValueError("prec must be >= 2")
    with working_precision(prec):
        return acb(z).exp()


def safe_div(x: acb, y: acb, prec: int) -> acb:
    """Ball division that refuses divisors whose ball may contain zero."""
    y = acb(y)
    if not y.abs_lower() > 0:
        raise DivisionByPossibleZero(f"divisor ball {y} does not exclude 0")
    with working_precision(prec):
        return acb(x) / y


def abs_bounds(x) -> tuple[arb, arb]:
    """Exact (lower, upper) with lower <= |v| <= upper for every v in the ball."""
    x = acb(x)
    lo = x.abs_lower()
    hi = x.abs_upper()
    if lo < 0:
        lo = arb(0)
    return lo, hi


def is_finite(x) -> bool:
    if isinstance(x, acb):
        return x.real.is_finite() and x.imag.is_finite()
    return arb(x).is_finite()


def radius_upper(x) -> arb:
    """Exact upper bound on |v - mid(x)| over the ball (complex modulus for acb)."""
    if isinstance(x, acb):
        rr, ri = x.real.rad(), x.imag.rad()
        if ri == 0:
            return rr
        if rr == 0:
            return ri
        with working_precision(30):
            return (rr * rr + ri * ri).sqrt().upper()
    return arb(x).rad()


def radius_below(x, eps) -> bool:
    """Whether the radius of ``x`` is strictly below ``eps`` (int, Fraction or arb)."""
    r = radius_upper(x)
    if isinstance(eps, arb):
        return bool(r < eps)
    eps = Fraction(eps)
    with working_precision(64):
        return bool(r * eps.denominator < eps.numerator)


def midpoint(x):
    return x.mid()


def with_radius(mid, extra) -> acb:
    """Grow a complex ball by ``extra`` (an exact non-negative bound) in modulus."""
    e = arb(0, extra)
    return acb(mid) + acb(e, e)


def real_part_contains_zero_imag(z: acb) -> bool:
    return z.imag.contains(0)


# -- text format -------------------------------------------------------------

_PM = re.compile(r"^\s*(?P<mid>[-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*(?:±|\+/-)\s*(?P<rad>[0-9.]+(?:[eE][-+]?\d+)?)\s*$")


def format_ball(x: arb, digits: int = 30) -> str:
    """Render ``x`` as ``"midpoint ± radius"`` in decimal.

    The decimal rounding of the midpoint is folded into the printed radius, so
    the printed ball contains ``x``.
    """
    x = arb(x)
    if not x.is_finite():
        return "nan ± inf"
    mid, rad, exp = x.mid_rad_10exp(digits)
    # built from strings: Decimal arithmetic would round to 28 digits
    mid_d = Decimal(f"{int(mid)}E{int(exp)}")
    rad_d = Decimal(f"{int(rad)}E{int(exp)}")
    return f"{_plain(mid_d)} ± {_sci_up(rad_d)}"


def decimal_parts(x: arb, digits: int) -> tuple[str, str]:
    """(midpoint, radius) decimal strings: ``digits`` places after the point
    at most, radius rounded up and enlarged by the midpoint's rounding."""
    x = arb(x)
    if not x.is_finite():
        return "nan", "inf"
    m = x.mid()
    int_digits = 1
    if m != 0:
        man, exp = m.man_exp()
        int_digits = max(1, math.ceil((abs(int(man)).bit_length() + int(exp)) * math.log10(2)) + 1)
    text = format_ball(x, int_digits + digits + 2)
    mid, rad = text.split(" ± ")
    return mid, rad


def parse_ball(text: str, prec: int = 128) -> arb:
    """Inverse of :func:`format_ball`; the result contains the printed ball."""
    m = _PM.match(text)
    if not m:
        raise ValueError(f"not a ball literal: {text!r}")
    mid = Fraction(m.group("mid"))
    rad = Fraction(m.group("rad"))
    with working_precision(prec):
        centre = real_ball(mid, prec)
        if rad == 0:
            return centre
        r = (arb(rad.numerator) / rad.denominator).upper()
        return centre + arb(0, r)


def _plain(d: Decimal) -> str:
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s or "0"


def _sci_up(d: Decimal) -> str:
    if d == 0:
        return "0"
    # Two significant digits, rounded up so the printed radius is not smaller.
    exp = d.adjusted() - 1
    with localcontext() as c:
        c.prec = len(d.as_tuple().digits) + 2
        q = (d.scaleb(-exp)).to_integral_value(rounding="ROUND_CEILING")
    return f"{int(q)}e{exp}"
