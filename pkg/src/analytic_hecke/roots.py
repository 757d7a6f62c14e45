"""Real root isolation for integer polynomials.

Polynomials are plain lists of Python ints, constant term first.  Isolation
uses a Sturm sequence over Q with exact rational sign evaluation; refinement
switches to interval Newton in arb once an isolating interval is found.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from flint import arb

from .ball import working_precision

Poly = list  # coefficients, constant term first


def _trim(p: Sequence) -> list:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def derivative(p: Sequence) -> list:
    return [i * c for i, c in enumerate(p)][1:]


def evaluate(p: Sequence, x):
    acc = 0
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _divmod(a: Sequence, b: Sequence) -> tuple[list, list]:
    a = [Fraction(c) for c in _trim(a)]
    b = [Fraction(c) for c in _trim(b)]
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    while len(a) >= len(b) and a:
        shift = len(a) - len(b)
        factor = a[-1] / b[-1]
        q[shift] = factor
        for i, c in enumerate(b):
            a[i + shift] -= factor * c
        a = _trim(a)
    return q, a


def _primitive(p: Sequence[Fraction]) -> list[int]:
    """Scale a rational polynomial to a primitive integer one with the same sign."""
    from math import gcd, lcm

    den = 1
    for c in p:
        den = lcm(den, Fraction(c).denominator)
    ints = [int(Fraction(c) * den) for c in p]
    g = 0
    for c in ints:
        g = gcd(g, c)
    return [c // g for c in ints] if g > 1 else ints


def gcd_poly(a: Sequence, b: Sequence) -> list[int]:
    a, b = _trim(a), _trim(b)
    while b:
        _, r = _divmod(a, b)
        a, b = b, _primitive(r) if r else []
    return _primitive(a)


def is_squarefree(p: Sequence) -> bool:
    return len(gcd_poly(p, derivative(p))) <= 1


def sturm_sequence(p: Sequence[int]) -> list[list[int]]:
    """Sturm chain p0 = p, p1 = p', p_{i+1} = -rem(p_{i-1}, p_i).

    Members are rescaled by positive constants to stay integral, which does not
    change sign counts.
    """
    seq = [_trim(p), _trim(derivative(p))]
    while len(seq[-1]) > 1:
        _, r = _divmod(seq[-2], seq[-1])
        if not r:
            break
        seq.append(_primitive([-c for c in r]))
    return seq


def _sign_at(p: Sequence[int], x: Fraction) -> int:
    # sign of den^deg * p(num/den), evaluated in integers only
    num, den = x.numerator, x.denominator
    acc, dpow = 0, 1
    for c in reversed(p):
        acc = acc * num + c * dpow
        dpow *= den
    return (acc > 0) - (acc < 0)


def sign_changes(seq: Sequence[Sequence[int]], x) -> int:
    x = Fraction(x)
    signs = [s for s in (_sign_at(q, x) for q in seq) if s]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def root_bound(p: Sequence[int]) -> Fraction:
    """Power of two strictly above |r| for every complex root r (Fujiwara's bound)."""
    p = _trim(p)
    n = len(p) - 1
    lead = abs(p[-1])
    best = None
    for i in range(1, n + 1):
        c = abs(p[n - i])
        if not c:
            continue
        ratio = Fraction(c, lead) / (2 if i == n else 1)
        log2_up = ratio.numerator.bit_length() - ratio.denominator.bit_length() + 1
        e = -(-log2_up // i)
        best = e if best is None else max(best, e)
    if best is None:
        return Fraction(1)
    return Fraction(2) ** (best + 2)


def count_real_roots(p: Sequence[int], lo=None, hi=None) -> int:
    """Number of distinct real roots in (lo, hi]; the whole line by default."""
    seq = sturm_sequence(p)
    b = root_bound(p)
    lo = -b if lo is None else Fraction(lo)
    hi = b if hi is None else Fraction(hi)
    return sign_changes(seq, lo) - sign_changes(seq, hi)


def isolate_real_roots(p: Sequence[int]) -> list[tuple[Fraction, Fraction]]:
    """Disjoint intervals (lo, hi], sorted ascending, each holding exactly one root."""
    p = _trim(p)
    if len(p) <= 1:
        return []
    seq = sturm_sequence(p)
    b = root_bound(p)
    out: list[tuple[Fraction, Fraction]] = []
    stack = [(-b, b, sign_changes(seq, -b), sign_changes(seq, b))]
    while stack:
        lo, hi, vlo, vhi = stack.pop()
        n = vlo - vhi
        if n == 0:
            continue
        if n == 1:
            out.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        vmid = sign_changes(seq, mid)
        stack.append((mid, hi, vmid, vhi))
        stack.append((lo, mid, vlo, vmid))
    out.sort()
    return out


def _bisect(p: Sequence[int], lo: Fraction, hi: Fraction, width: Fraction) -> tuple[Fraction, Fraction]:
    # root in (lo, hi]; an exact root at hi is possible
    shi = _sign_at(p, hi)
    if shi == 0:
        return hi, hi
    # one simple root inside: the sign just right of lo is -shi, even when
    # lo is itself a root belonging to the neighbouring interval
    slo = -shi
    while hi - lo > width:
        mid = (lo + hi) / 2
        s = _sign_at(p, mid)
        if s == 0:
            return mid, mid
        if s == slo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def refine_root(p: Sequence[int], interval: tuple[Fraction, Fraction], prec: int) -> arb:
    """Ball around the simple root isolated by ``interval``, radius <= 2**-prec
    in absolute or relative terms (whichever is looser)."""
    lo, hi = interval
    dp = derivative(p)
    width = Fraction(1, 2**40) * max(1, abs(hi), abs(lo))
    while True:
        lo, hi = _bisect(p, lo, hi, width)
        if lo == hi:
            return arb(lo.numerator) / lo.denominator
        try:
            return _newton(p, dp, lo, hi, prec)
        except _DerivativeStraddlesZero:
            width /= 2**20


class _DerivativeStraddlesZero(ArithmeticError):
    pass


def _newton(p, dp, lo: Fraction, hi: Fraction, prec: int) -> arb:
    work = 64
    with working_precision(work):
        x = (arb(lo.numerator) / lo.denominator).union(arb(hi.numerator) / hi.denominator)
    while True:
        with working_precision(work + 32):
            for _ in range(200):
                m = arb(x.mid())
                fx = _eval_arb(p, m)
                dfx = _eval_arb(dp, x)
                if dfx.contains(0):
                    raise _DerivativeStraddlesZero
                nx = (m - fx / dfx).intersection(x)
                stalled = nx.rad() >= x.rad() * 0.75
                x = nx
                if stalled or x.rad() == 0:
                    break
            target = arb(2) ** (-prec)
            if x.rad() <= target or x.rad() <= abs(x.mid()) * target:
                return x
        work *= 2
        if work > 4 * prec + 8192:
            raise ArithmeticError("interval Newton failed to converge")


def _eval_arb(p: Sequence[int], x: arb) -> arb:
    acc = arb(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc
