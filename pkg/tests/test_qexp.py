"""q-expansions checked against brute-force integer oracles written here."""

from fractions import Fraction

import pytest
from flint import arb

from analytic_hecke import qexp
from analytic_hecke.ball import working_precision
from analytic_hecke.errors import EmbeddingOutOfRange, EmptySpace, InsufficientLength, NotNormalized
from analytic_hecke.roots import count_real_roots

# -- oracles -----------------------------------------------------------------


def brute_bernoulli(n):
    # sum_{j=0}^{m} C(m+1, j) B_j = 0
    from math import comb

    b = [Fraction(1)]
    for m in range(1, n + 1):
        b.append(-sum(comb(m + 1, j) * b[j] for j in range(m)) / (m + 1))
    return b[n]


def brute_sigma(n, r):
    return sum(d**r for d in range(1, n + 1) if n % d == 0)


def mul(a, b, M):
    out = [0] * (M + 1)
    for i, x in enumerate(a[: M + 1]):
        for j, y in enumerate(b[: M + 1 - i]):
            out[i + j] += x * y
    return out


def brute_eisenstein(k, M):
    c = -Fraction(2 * k) / brute_bernoulli(k)
    return [Fraction(1)] + [c * brute_sigma(n, k - 1) for n in range(1, M + 1)]


def brute_basis(k, M):
    """Echelonized basis of S_k(1) from the eta product and Eisenstein series, in Fractions."""
    delta = list(qexp.eta_delta_oracle(M).coeffs)
    e4, e6 = brute_eisenstein(4, M), brute_eisenstein(6, M)
    rows = []
    for a in range((k - 12) // 4 + 1):
        rest = k - 12 - 4 * a
        if rest % 6:
            continue
        g = delta
        for _ in range(a):
            g = mul(g, e4, M)
        for _ in range(rest // 6):
            g = mul(g, e6, M)
        rows.append([Fraction(x) for x in g])
    d = len(rows)
    # Gauss-Jordan on columns 1..d
    for col in range(d):
        piv = next(r for r in range(col, d) if rows[r][col + 1] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        lead = rows[col][col + 1]
        rows[col] = [x / lead for x in rows[col]]
        for r in range(d):
            if r != col and rows[r][col + 1]:
                f = rows[r][col + 1]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[col])]
    return rows


def brute_hecke_matrix(k, p):
    d = qexp.cusp_dimension(k)
    basis = brute_basis(k, p * d + p)

    def tp(g, n):
        v = g[p * n]
        if n % p == 0:
            v += p ** (k - 1) * g[n // p]
        return v

    return [[int(tp(basis[j], i + 1)) for j in range(d)] for i in range(d)]


# -- arithmetic functions ----------------------------------------------------

@pytest.mark.parametrize("n,expected", [(0, Fraction(1)), (1, Fraction(-1, 2)), (4, Fraction(-1, 30)),
                                        (12, Fraction(-691, 2730))])
def test_bernoulli_examples(n, expected):
    assert qexp.bernoulli(n) == expected


def test_bernoulli_matches_recurrence_oracle():
    for n in range(0, 60):
        assert qexp.bernoulli(n) == brute_bernoulli(n)


@pytest.mark.parametrize("n,r,expected", [(1, 3, 1), (2, 3, 9), (6, 1, 12)])
def test_sigma_examples(n, r, expected):
    assert qexp.sigma(n, r) == expected


def test_sigma_matches_brute_force():
    for n in range(1, 300):
        for r in (0, 1, 3, 11):
            assert qexp.sigma(n, r) == brute_sigma(n, r)


# -- series ------------------------------------------------------------------

def test_eisenstein_examples():
    assert qexp.eisenstein_qexp(4, 2).coeffs == (1, 240, 2160)
    assert qexp.eisenstein_qexp(6, 1).coeffs == (1, -504)
    assert qexp.eisenstein_qexp(4, 0).coeffs == (1,)


def test_eisenstein_matches_oracle():
    for k in (4, 6, 8, 12, 24):
        assert list(qexp.eisenstein_qexp(k, 30).coeffs) == brute_eisenstein(k, 30)


def test_delta_examples():
    assert qexp.delta_qexp(2).coeffs == (0, 1, -24)
    assert qexp.delta_qexp(5)[5] == 4830
    d = qexp.eta_delta_oracle(3)
    assert (d[1], d[2], d[3]) == (1, -24, 252)


def test_delta_routes_agree_to_200():
    assert qexp.delta_qexp(200).coeffs == qexp.eta_delta_oracle(200).coeffs


def test_qexpansion_length():
    e = qexp.eisenstein_qexp(4, 7)
    assert e.length == 7 and len(e) == 8


# -- bases and Hecke matrices ------------------------------------------------

def test_cusp_basis_examples():
    b12 = qexp.cusp_basis(12, 3)
    assert b12.dimension == 1 and b12.elements[0].coeffs == (0, 1, -24, 252)
    b24 = qexp.cusp_basis(24, 2)
    assert b24.dimension == 2
    assert b24.elements[0].coeffs[:3] == (0, 1, 0)
    assert b24.elements[1].coeffs[:3] == (0, 0, 1)
    assert sorted(b24.exponent_pairs) == [(0, 2), (3, 0)]
    b16 = qexp.cusp_basis(16, 1)
    assert b16.dimension == 1 and b16.elements[0][1] == 1


def test_cusp_basis_matches_oracle():
    for k in (12, 16, 24, 36, 48):
        ours = qexp.cusp_basis(k, 40)
        theirs = brute_basis(k, 40)
        assert [list(e.coeffs) for e in ours.elements] == theirs


def test_empty_space():
    with pytest.raises(EmptySpace):
        qexp.cusp_basis(14, 5)
    with pytest.raises(EmptySpace):
        qexp.cusp_basis(10, 5)
    with pytest.raises(EmptySpace):
        qexp.level_one_eigenform(14)


def test_dimension_counts_lattice_points():
    for k in range(12, 201, 2):
        count = sum(1 for a in range(k) for b in range(k) if 4 * a + 6 * b == k - 12)
        assert qexp.cusp_dimension(k) == count
    for k in (12, 24, 60, 100):
        assert qexp.cusp_basis(k, qexp.cusp_dimension(k)).dimension == qexp.cusp_dimension(k)


def test_hecke_matrix_examples():
    assert qexp.hecke_matrix(12, 2) == [[-24]]
    assert qexp.hecke_matrix(12, 5) == [[4830]]
    A = qexp.hecke_matrix(24, 2)
    assert A == [[0, 1], [20468736, 1080]]
    assert A[0][0] + A[1][1] == 1080
    assert A[0][0] * A[1][1] - A[0][1] * A[1][0] == -20468736
    assert qexp.charpoly(A) == [-20468736, -1080, 1]


@pytest.mark.parametrize("k,p", [(24, 2), (24, 3), (36, 2), (48, 5)])
def test_hecke_matrix_matches_oracle(k, p):
    assert qexp.hecke_matrix(k, p) == brute_hecke_matrix(k, p)


def test_hecke_matrix_needs_length():
    short = qexp.cusp_basis(24, 3)
    with pytest.raises(InsufficientLength):
        qexp.hecke_matrix(24, 2, basis=short)


@pytest.mark.parametrize("k", [24, 36, 48, 72, 96])
def test_hecke_eigenvalues_are_real(k):
    chi = qexp.charpoly(qexp.hecke_matrix(k, 2))
    assert count_real_roots(chi) == qexp.cusp_dimension(k)


# -- eigenform coefficients --------------------------------------------------

def test_eigenform_coeffs_examples():
    c = qexp.eigenform_coeffs(qexp.level_one_eigenform(12), 3, 100)
    for ball, want in zip(c, [1, -24, 252]):
        assert ball.contains(want)
    c = qexp.eigenform_coeffs(qexp.level_one_eigenform(16), 2, 100)
    assert c[0].contains(1) and c[1].contains(216)
    c = qexp.eigenform_coeffs(qexp.level_one_eigenform(24, 0), 2, 200)
    with working_precision(300):
        theta0 = (1080 - arb(1080**2 + 4 * 20468736).sqrt()) / 2
    assert c[0].contains(1) and c[1].overlaps(theta0)
    assert c[1].rad() <= arb(2) ** -100


def test_embedding_out_of_range():
    with pytest.raises(EmbeddingOutOfRange):
        qexp.level_one_eigenform(24, 2)


def test_a1_is_exactly_one():
    for k in (12, 24, 48):
        c = qexp.eigenform_coeffs(qexp.level_one_eigenform(k), 1, 80)
        assert c[0] == 1 and c[0].rad() == 0


@pytest.mark.parametrize("k,embedding", [(24, 0), (24, 1), (36, 1), (48, 0), (60, 2)])
def test_deligne_and_multiplicativity(k, embedding):
    f = qexp.level_one_eigenform(k, embedding)
    c = qexp.eigenform_coeffs(f, 30, 128)
    with working_precision(192):
        for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29):
            bound = 2 * arb(p) ** (arb(k - 1) / 2)
            assert not abs(c[p - 1]) > bound
        assert (c[1] * c[2]).overlaps(c[5])           # a_6 = a_2 a_3
        assert (c[1] * c[1] - arb(2) ** (k - 1)).overlaps(c[3])   # a_4 = a_2^2 - 2^{k-1}


@pytest.mark.parametrize("k", [24, 36])
def test_eigen_equation_residual(k):
    theta, vec = qexp.eigenvector(k, 0, 128)
    A = qexp.hecke_data(k).matrix
    with working_precision(160):
        for i in range(len(A)):
            r = sum((A[i][j] * vec[j] for j in range(len(A))), arb(0)) - theta * vec[i]
            assert r.contains(0)


def test_dim1_exact_coefficients_match_eta_oracle():
    f = qexp.level_one_eigenform(12)
    delta = qexp.eta_delta_oracle(100)
    for n in (1, 2, 3, 50, 97):
        assert qexp.exact_coefficient(f, n) == delta[n]
    assert qexp.exact_coefficient(qexp.level_one_eigenform(24), 2) is None


def test_file_backed_handle():
    f = qexp.from_coefficients(2, 8, [1, -8, 12])
    c = qexp.eigenform_coeffs(f, 3, 64)
    assert [x.contains(v) for x, v in zip(c, [1, -8, 12])] == [True] * 3
    with pytest.raises(InsufficientLength):
        qexp.eigenform_coeffs(f, 4, 64)
    with pytest.raises(NotNormalized):
        qexp.from_coefficients(2, 8, [2, 1])


def test_prime_test():
    small = [n for n in range(50) if qexp.is_prime(n)]
    assert small == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]
