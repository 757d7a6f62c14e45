"""Exact q-expansions in level 1 and eigenform coefficient extraction.

Everything here is exact (Python ints / Fractions, with flint's fmpz_poly and
fmpq_mat doing the heavy products) until the very last step, where the
coefficients of a Galois-conjugate eigenform are produced as arb balls from an
isolated real root of a Hecke characteristic polynomial.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

from flint import arb, arb_mat, fmpq_mat, fmpz_mat, fmpz_poly

from . import roots
from .ball import real_ball, working_precision
from .errors import (
    EmbeddingOutOfRange,
    EmptySpace,
    InsufficientLength,
    NonSquarefreeCharPoly,
    UnsupportedLevel,
)

MAX_GENERATOR_PRIMES = 10


@dataclass(frozen=True)
class QExpansion:
    """Fourier coefficients a_0..a_M of a modular form of the given level and weight."""

    level: int
    weight: int
    coeffs: tuple

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("a q-expansion needs at least the constant term")

    @property
    def length(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n):
        return self.coeffs[n]

    def __len__(self):
        return len(self.coeffs)


@dataclass(frozen=True)
class CuspBasis:
    """Echelonized basis of S_k(1).

    ``elements[i]`` has a 1 at q^(i+1) and zeros at the other pivots.
    ``transform[i][j]`` expresses it through the products
    Delta * E4^a * E6^b listed in ``exponent_pairs``.
    """

    weight: int
    length: int
    elements: tuple[QExpansion, ...]
    exponent_pairs: tuple[tuple[int, int], ...]
    transform: tuple[tuple[Fraction, ...], ...] = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.elements)


# -- arithmetic functions ----------------------------------------------------

@lru_cache(maxsize=None)
def _bernoulli_table(n: int) -> tuple[Fraction, ...]:
    from math import comb

    b = [Fraction(1)]
    for m in range(1, n + 1):
        b.append(-sum(comb(m + 1, j) * b[j] for j in range(m)) / (m + 1))
    return tuple(b)


def bernoulli(n: int) -> Fraction:
    """B_n with the convention B_1 = -1/2."""
    if n < 0:
        raise ValueError("n must be non-negative")
    # grow the table in chunks so repeated calls share the work
    size = max(16, 1 << (n.bit_length()))
    return _bernoulli_table(size)[n]


def sigma(n: int, r: int) -> int:
    """Sum of d**r over the positive divisors d of n."""
    if n < 1:
        raise ValueError("sigma is defined for n >= 1")
    total = 0
    d = 1
    while d * d <= n:
        if n % d == 0:
            total += d**r
            e = n // d
            if e != d:
                total += e**r
        d += 1
    return total


def _sigma_table(M: int, r: int) -> list[int]:
    s = [0] * (M + 1)
    for d in range(1, M + 1):
        dr = d**r
        for m in range(d, M + 1, d):
            s[m] += dr
    return s


def _normalize(c):
    if isinstance(c, Fraction) and c.denominator == 1:
        return c.numerator
    return c


# -- series ------------------------------------------------------------------

def eisenstein_qexp(k: int, M: int) -> QExpansion:
    """E_k = 1 - (2k/B_k) sum sigma_{k-1}(n) q^n, truncated after q^M."""
    if k < 4 or k % 2:
        raise ValueError("Eisenstein series need even weight k >= 4")
    if M < 0:
        raise ValueError("M must be non-negative")
    c = -Fraction(2 * k) / bernoulli(k)
    sig = _sigma_table(M, k - 1)
    coeffs = (1,) + tuple(_normalize(c * sig[n]) for n in range(1, M + 1))
    return QExpansion(1, k, coeffs)


def _poly(coeffs: Sequence[int]) -> fmpz_poly:
    return fmpz_poly([int(c) for c in coeffs])


def _truncate(p: fmpz_poly, M: int) -> fmpz_poly:
    c = p.coeffs()
    return fmpz_poly(c[: M + 1]) if len(c) > M + 1 else p


def _coeff_list(p: fmpz_poly, M: int) -> list[int]:
    c = [int(x) for x in p.coeffs()[: M + 1]]
    return c + [0] * (M + 1 - len(c))


def _delta_poly(M: int) -> fmpz_poly:
    e4 = _poly(eisenstein_qexp(4, M).coeffs)
    e6 = _poly(eisenstein_qexp(6, M).coeffs)
    num = _truncate(_truncate(e4 * e4, M) * e4, M) - _truncate(e6 * e6, M)
    c = _coeff_list(num, M)
    assert all(x % 1728 == 0 for x in c)
    return fmpz_poly([x // 1728 for x in c])


def delta_qexp(M: int) -> QExpansion:
    """Delta = (E4^3 - E6^2)/1728 to length M, so that a_1 = +1."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return QExpansion(1, 12, tuple(_coeff_list(_delta_poly(M), M)))


def _mul_trunc(a: list[int], b: list[int], M: int) -> list[int]:
    out = [0] * (M + 1)
    for i, x in enumerate(a):
        if x:
            for j in range(0, M + 1 - i):
                out[i + j] += x * b[j]
    return out


def eta_delta_oracle(M: int) -> QExpansion:
    """Delta = q * prod (1 - q^n)^24 by plain integer series arithmetic.

    Deliberately independent of :func:`delta_qexp`: no Eisenstein series and
    no flint.  Quadratic in M, so meant for lengths up to a few hundred.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    n = M - 1  # the product is needed to degree M-1 before shifting by q
    euler = [0] * (n + 1)
    euler[0] = 1
    for m in range(1, n + 1):
        for i in range(n, m - 1, -1):
            euler[i] -= euler[i - m]
    sq = _mul_trunc(euler, euler, n)       # ^2
    p4 = _mul_trunc(sq, sq, n)             # ^4
    p8 = _mul_trunc(p4, p4, n)             # ^8
    p16 = _mul_trunc(p8, p8, n)            # ^16
    p24 = _mul_trunc(p16, p8, n)           # ^24
    return QExpansion(1, 12, tuple([0] + p24))


# -- level one cusp forms ----------------------------------------------------

def exponent_pairs(k: int) -> list[tuple[int, int]]:
    """All (a, b) >= 0 with 4a + 6b = k - 12, sorted by b."""
    w = k - 12
    if w < 0 or w % 2:
        return []
    return [((w - 6 * b) // 4, b) for b in range(w // 6 + 1) if (w - 6 * b) % 4 == 0]


def cusp_dimension(k: int) -> int:
    """dim S_k(1)."""
    return len(exponent_pairs(k))


_basis_lock = threading.Lock()
_basis_cache: dict[int, CuspBasis] = {}


def clear_caches() -> None:
    """Drop all memoized bases, Hecke data and eigenform coefficients."""
    with _basis_lock:
        _basis_cache.clear()
    with _eigen_lock:
        _eigen_cache.clear()
        _file_cache.clear()


def _compute_basis(k: int, M: int) -> CuspBasis:
    pairs = exponent_pairs(k)
    d = len(pairs)
    L = max(M, d)
    e4 = _poly(eisenstein_qexp(4, L).coeffs)
    e6 = _poly(eisenstein_qexp(6, L).coeffs)
    delta = _delta_poly(L)
    max_a = max(a for a, _ in pairs)
    max_b = max(b for _, b in pairs)
    p4 = [fmpz_poly([1])]
    for _ in range(max_a):
        p4.append(_truncate(p4[-1] * e4, L))
    p6 = [fmpz_poly([1])]
    for _ in range(max_b):
        p6.append(_truncate(p6[-1] * e6, L))
    mono = [_coeff_list(_truncate(_truncate(delta * p4[a], L) * p6[b], L), L) for a, b in pairs]

    pivot = fmpq_mat(d, d, [mono[j][i + 1] for j in range(d) for i in range(d)])
    R = pivot.inv()
    E = R * fmpq_mat(d, L + 1, [x for row in mono for x in row])
    elements = []
    for i in range(d):
        row = [_normalize(Fraction(int(E[i, n].p), int(E[i, n].q))) for n in range(M + 1)]
        elements.append(QExpansion(1, k, tuple(row)))
    transform = tuple(
        tuple(Fraction(int(R[i, j].p), int(R[i, j].q)) for j in range(d)) for i in range(d)
    )
    return CuspBasis(k, M, tuple(elements), tuple(pairs), transform)


def _slice_basis(b: CuspBasis, M: int) -> CuspBasis:
    if b.length == M:
        return b
    elements = tuple(QExpansion(1, b.weight, e.coeffs[: M + 1]) for e in b.elements)
    return CuspBasis(b.weight, M, elements, b.exponent_pairs, b.transform)


def cusp_basis(k: int, M: int) -> CuspBasis:
    """Echelonized (Victor Miller) basis of S_k(1) to length M from Delta * E4^a * E6^b."""
    if k % 2 or k < 12 or cusp_dimension(k) == 0:
        raise EmptySpace(f"S_{k}(1) is zero-dimensional")
    if M < 0:
        raise ValueError("M must be non-negative")
    with _basis_lock:
        cached = _basis_cache.get(k)
    if cached is None or cached.length < M:
        grow = M if cached is None else max(M, 2 * cached.length)
        cached = _compute_basis(k, grow)
        with _basis_lock:
            old = _basis_cache.get(k)
            if old is None or old.length < cached.length:
                _basis_cache[k] = cached
    return _slice_basis(cached, M)


def _prime_list(count: int) -> list[int]:
    out, n = [], 2
    while len(out) < count:
        if all(n % q for q in out if q * q <= n):
            out.append(n)
        n += 1
    return out


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def hecke_matrix(k: int, p: int, M: Optional[int] = None, basis: Optional[CuspBasis] = None) -> list[list[int]]:
    """Integer matrix A of T_p on the echelonized basis: T_p b_j = sum_i A[i][j] b_i.

    ``M`` (default dim S_k(1)) is how many coefficients of T_p b_j are checked
    against the matrix; this needs the basis to length p*M.
    """
    d = cusp_dimension(k)
    if d == 0:
        raise EmptySpace(f"S_{k}(1) is zero-dimensional")
    M = d if M is None else M
    if M < d:
        raise ValueError(f"M must be at least dim S_k(1) = {d}")
    need = p * M
    if basis is None:
        basis = cusp_basis(k, need)
    elif basis.length < need:
        raise InsufficientLength(f"T_{p} on {M} coefficients needs length {need}, basis has {basis.length}")
    pk = p ** (k - 1)

    def tp(g, n):
        v = g[p * n]
        if n % p == 0:
            v += pk * g[n // p]
        return v

    A = [[tp(basis.elements[j], i + 1) for j in range(d)] for i in range(d)]
    for j, b in enumerate(basis.elements):
        for n in range(1, M + 1):
            expect = sum(A[i][j] * basis.elements[i][n] for i in range(d))
            if tp(b, n) != expect:
                raise ArithmeticError(f"T_{p} does not preserve the basis at q^{n}; internal error")
    return [[int(x) for x in row] for row in A]


def charpoly(A: Sequence[Sequence[int]]) -> list[int]:
    """Characteristic polynomial det(xI - A), constant term first."""
    n = len(A)
    return [int(c) for c in fmpz_mat(n, n, [x for row in A for x in row]).charpoly().coeffs()]


# -- eigenforms --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenformHandle:
    """A normalized eigenform: which one, and where its coefficients come from.

    ``source`` is ``"computed-level-1"`` (coefficients derived here from the
    Victor Miller basis), ``"file"`` or ``"remote"`` (exact coefficients
    supplied in ``coefficients``, a_1 first).
    """

    level: int
    weight: int
    embedding: int = 0
    source: str = "computed-level-1"
    coefficients: Optional[tuple] = field(default=None, repr=False)
    atkin_lehner_sign: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.source == "computed-level-1":
            if self.level != 1:
                raise UnsupportedLevel("only level 1 eigenforms are computed; supply coefficients for N > 1")
            d = cusp_dimension(self.weight)
            if d == 0:
                raise EmptySpace(f"S_{self.weight}(1) is zero-dimensional")
            if not 0 <= self.embedding < d:
                raise EmbeddingOutOfRange(f"embedding {self.embedding} not in [0, {d})")
        elif self.source in ("file", "remote"):
            if not self.coefficients:
                raise ValueError("coefficient-backed eigenforms need coefficients")
            if self.coefficients[0] != 1:
                from .errors import NotNormalized

                raise NotNormalized("a_1 must be 1")
        else:
            raise ValueError(f"unknown source {self.source!r}")
        if self.atkin_lehner_sign not in (None, 1, -1):
            raise ValueError("Atkin-Lehner sign must be +1 or -1")

    @property
    def field_degree(self) -> int:
        """Degree of the coefficient field (1 when the coefficients are rational)."""
        if self.source == "computed-level-1":
            return cusp_dimension(self.weight)
        return 1

    @property
    def available_length(self) -> Optional[int]:
        return None if self.coefficients is None else len(self.coefficients)


def level_one_eigenform(k: int, embedding: int = 0) -> EigenformHandle:
    return EigenformHandle(level=1, weight=k, embedding=embedding)


def from_coefficients(level: int, weight: int, coefficients: Sequence, atkin_lehner_sign: Optional[int] = None,
                      source: str = "file", label: Optional[str] = None) -> EigenformHandle:
    coeffs = tuple(_normalize(Fraction(c)) for c in coefficients)
    return EigenformHandle(level, weight, 0, source, coeffs, atkin_lehner_sign, label)


@dataclass
class _HeckeData:
    prime: int
    matrix: list
    charpoly: list
    intervals: list


_eigen_lock = threading.RLock()
_eigen_cache: dict = {}
_file_cache: "weakref.WeakKeyDictionary[EigenformHandle, tuple]" = weakref.WeakKeyDictionary()


def hecke_data(k: int) -> _HeckeData:
    """Generating Hecke operator for S_k(1) with squarefree char poly and its isolated roots.

    T_2 first, then T_3, T_5, ... up to ten primes.
    """
    key = ("hecke", k)
    with _eigen_lock:
        if key in _eigen_cache:
            return _eigen_cache[key]
    d = cusp_dimension(k)
    if d == 0:
        raise EmptySpace(f"S_{k}(1) is zero-dimensional")
    for p in _prime_list(MAX_GENERATOR_PRIMES):
        A = hecke_matrix(k, p)
        chi = charpoly(A)
        if roots.is_squarefree(chi):
            intervals = roots.isolate_real_roots(chi)
            if len(intervals) != d:
                raise ArithmeticError(f"T_{p} on S_{k}(1) has non-real eigenvalues; internal error")
            data = _HeckeData(p, A, chi, intervals)
            with _eigen_lock:
                _eigen_cache[key] = data
            return data
    raise NonSquarefreeCharPoly(f"no squarefree T_p char poly for S_{k}(1) among {MAX_GENERATOR_PRIMES} primes")


def eigenvector(k: int, embedding: int, prec: int) -> tuple[arb, list[arb]]:
    """(theta, c): eigenvalue ball of the generating operator and eigenvector with c[0] = 1."""
    data = hecke_data(k)
    d = len(data.matrix)
    if not 0 <= embedding < d:
        raise EmbeddingOutOfRange(f"embedding {embedding} not in [0, {d})")
    theta = roots.refine_root(data.charpoly, data.intervals[embedding], prec + 16)
    if d == 1:
        return theta, [arb(1)]
    A = data.matrix
    work = prec
    for _ in range(12):
        with working_precision(work):
            B = arb_mat(d - 1, d - 1, [(A[i][j] - theta) if i == j else arb(A[i][j])
                                       for i in range(1, d) for j in range(1, d)])
            rhs = arb_mat(d - 1, 1, [-A[i][0] for i in range(1, d)])
            try:
                sol = B.solve(rhs)
            except ZeroDivisionError:
                # the system is nonsingular; the balls were just too wide to show it
                work *= 2
                theta = roots.refine_root(data.charpoly, data.intervals[embedding], work + 16)
                continue
            return theta, [arb(1)] + [sol[i, 0] for i in range(d - 1)]
    raise ArithmeticError("eigenvector solve failed at every attempted precision")


def _level_one_coeffs(k: int, embedding: int, M: int, prec: int) -> list[arb]:
    d = cusp_dimension(k)
    if d == 1:
        # integer coefficients convert exactly, so one list serves every precision
        key = ("exact", k)
        with _eigen_lock:
            have = _eigen_cache.get(key)
        if have is None or len(have) < M:
            have = [arb(int(x)) for x in cusp_basis(k, M).elements[0].coeffs[1:]]
            with _eigen_lock:
                _eigen_cache[key] = have
        return have[:M]
    # One entry per eigenform that only ever grows in length and precision,
    # so callers asking for slightly different precisions share the work.
    key = ("coeffs", k, embedding)
    with _eigen_lock:
        cached = _eigen_cache.get(key)
    if cached is not None:
        have_prec, have = cached
        if have_prec >= prec and len(have) >= M:
            return have[:M]
        M = max(M, len(have) if have_prec >= prec else 0)
        prec = max(prec, have_prec if len(have) >= M else 0)
    prec = -(-prec // 64) * 64
    basis = cusp_basis(k, M)
    target = arb(2) ** (-prec)
    mag = max(abs(int(x)) for e in basis.elements for x in e.coeffs[1:]).bit_length()
    work = prec + mag + 32
    for _ in range(12):
        _, c = eigenvector(k, embedding, work)
        with working_precision(work):
            out = []
            for n in range(1, M + 1):
                acc = arb(0)
                for i in range(d):
                    x = basis.elements[i].coeffs[n]
                    if x:
                        acc += c[i] * int(x)
                out.append(acc)
        if all(a.rad() <= target for a in out):
            with _eigen_lock:
                old = _eigen_cache.get(key)
                if old is None or (old[0] <= prec and len(old[1]) <= M):
                    _eigen_cache[key] = (prec, out)
            return out[:M]
        work *= 2
    raise ArithmeticError("eigenform coefficients did not reach the requested precision")


def eigenform_coeffs(handle: EigenformHandle, M: int, prec: int) -> list[arb]:
    """Balls for a_1..a_M of the eigenform, each of radius <= 2**-prec."""
    if M < 0:
        raise ValueError("M must be non-negative")
    if handle.source == "computed-level-1":
        return _level_one_coeffs(handle.weight, handle.embedding, M, prec)
    if M > len(handle.coefficients):
        raise InsufficientLength(
            f"{M} coefficients requested, only {len(handle.coefficients)} available for this eigenform"
        )
    with _eigen_lock:
        cached = _file_cache.get(handle)
    if cached is None or cached[0] < prec or len(cached[1]) < M:
        cached = (prec, [real_ball(c, prec) for c in handle.coefficients[:max(M, len(cached[1]) if cached else 0)]])
        with _eigen_lock:
            _file_cache[handle] = cached
    return cached[1][:M]


def exact_coefficient(handle: EigenformHandle, n: int):
    """a_n as an exact rational when the coefficient field is Q, else None."""
    if handle.source == "computed-level-1":
        if cusp_dimension(handle.weight) != 1:
            return None
        return cusp_basis(handle.weight, n).elements[0][n]
    if n > len(handle.coefficients):
        raise InsufficientLength(f"a_{n} not available")
    return handle.coefficients[n - 1]
