"""End-to-end acceptance checks; each test reports one PASS/FAIL line."""

import random
import statistics
import time
from fractions import Fraction

import pytest
from click.testing import CliRunner
from flint import acb, acb_poly, arb

from analytic_hecke import cli, clear_caches
from analytic_hecke import evaluation as ev
from analytic_hecke.ball import parse_ball, working_precision
from analytic_hecke.evaluation import EvalPoint
from analytic_hecke.hecke import deligne_ok, eigenvalue_numerical
from analytic_hecke.qexp import (
    cusp_basis,
    delta_qexp,
    eta_delta_oracle,
    hecke_matrix,
    charpoly,
    level_one_eigenform,
)
from analytic_hecke.roots import isolate_real_roots, refine_root

from .test_evaluation import mobius, random_sl2
from .test_hecke import count_evaluations, quotient_instance

PRIMES_BELOW_100 = [p for p in range(2, 100) if all(p % q for q in range(2, p))]
I = EvalPoint.from_exact(0, 1)

# every eigenvalue produced here, as (p, k, ball), for the Deligne check
COMPUTED: list = []


@pytest.fixture
def report(request):
    terminal = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
        if terminal is not None:
            terminal.write_line("")
            terminal.write_line(line)
        else:
            print(line)
        assert ok, line

    return emit


def cli_eigenvalue(*args):
    r = CliRunner().invoke(cli.main, [str(a) for a in args] + ["--format", "structured"])
    import json

    return r.exit_code, (json.loads(r.output) if r.exit_code == 0 else r.output)


def record_ball(rec) -> arb:
    return parse_ball(f"{rec['midpoint']} ± {rec['radius']}", 256)


def test_exact_tau_agreement(report):
    tau = eta_delta_oracle(100).coeffs
    clear_caches()
    start = time.perf_counter()
    bad = []
    for p in PRIMES_BELOW_100:
        code, rec = cli_eigenvalue("--level", 1, "--weight", 12, "--prime", p, "--digits", 10)
        if code != 0 or rec["exact"] != str(tau[p]):
            bad.append(p)
        else:
            COMPUTED.append((p, 12, record_ball(rec)))
    elapsed = time.perf_counter() - start
    report(1, not bad and elapsed < 5, f"{len(PRIMES_BELOW_100)} primes, mismatches {bad}, {elapsed:.2f} s")


def test_large_prime_value(report):
    clear_caches()
    start = time.perf_counter()
    code, rec = cli_eigenvalue("--level", 1, "--weight", 12, "--prime", 10007, "--digits", 3)
    elapsed = time.perf_counter() - start
    ok = code == 0 and record_ball(rec).contains(-5758585642481476962744) and elapsed < 30
    if code == 0:
        COMPUTED.append((10007, 12, record_ball(rec)))
    report(2, ok, f"{rec['midpoint'] if code == 0 else rec} ± {rec['radius'] if code == 0 else ''}, "
                  f"{elapsed:.2f} s")


def test_route_self_consistency(report):
    start = time.perf_counter()
    bad = []
    eps = Fraction(1, 10**10)
    # E6 vanishes at i, and with it the forms of weight 18, 22 and 26
    z0 = EvalPoint.from_exact(0, Fraction(11, 10))
    for k in (12, 16, 18, 20, 22, 26):
        f = level_one_eigenform(k)
        a = cusp_basis(k, 100).elements[0]
        for p in PRIMES_BELOW_100:
            r = eigenvalue_numerical(f, p, eps, z0)
            COMPUTED.append((p, k, r.value))
            if not r.value.contains(a[p]):
                bad.append((k, p))
    # weight 24: the smaller root of the brute-force characteristic polynomial of T_2
    cp = charpoly(hecke_matrix(24, 2))
    assert cp == [-20468736, -1080, 1]
    small = refine_root(cp, isolate_real_roots(cp)[0], 200)
    r = eigenvalue_numerical(level_one_eigenform(24, 0), 2, eps)
    COMPUTED.append((2, 24, r.value))
    weight24 = r.value.overlaps(small) and r.value.contains(small.mid())
    elapsed = time.perf_counter() - start
    report(3, not bad and weight24 and elapsed < 120,
           f"150 containments, failures {bad}, weight 24 root {'contained' if weight24 else 'missed'}, "
           f"{elapsed:.1f} s")


def test_truncation_bound_soundness(report):
    coeffs = delta_qexp(5001).coeffs
    rng = random.Random(4)
    violations = 0
    for _ in range(100):
        y = Fraction(rng.randint(300, 3000), 1000)
        x = Fraction(rng.randint(-500, 500), 1000)
        eps = Fraction(1, 10 ** rng.randint(1, 40))
        T, bound = ev.choose_truncation(y, 12, eps)
        with working_precision(256):
            z = acb(arb(x.numerator) / x.denominator, arb(y.numerator) / y.denominator)
            q = (2 * acb.pi() * acb(0, 1) * z).exp()
            partial = acb_poly(list(coeffs[T + 1:5001]))(q) * q ** (T + 1)
            # the part beyond 5000 is negligible but still bounded rigorously
            rest = ev.tail_bound(y, 5000, (1, 7))
            if not abs(partial) + rest <= bound:
                violations += 1
    report(4, violations == 0, f"100 points, {violations} violations")


def test_quotient_budget_soundness(report):
    rng = random.Random(5)
    hs = [Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)]
    violations = sum(not quotient_instance(rng, hs[i % 3]) for i in range(1000))
    report(5, violations == 0, f"1000 instances, {violations} violations")


def modularity_failures(f, N: int, rng: random.Random, count: int = 100) -> int:
    k = f.weight
    eps = Fraction(1, 10**12)
    failures = 0
    for _ in range(count):
        z = EvalPoint.from_exact(Fraction(rng.randint(-1000, 1000), 1000), Fraction(rng.randint(200, 2000), 1000))
        a, b, c, d = random_sl2(rng, N)
        gz = mobius(z, a, b, c, d)
        lhs = ev.evaluate_form(f, z, eps)
        rhs = ev.evaluate_form(f, gz, eps)
        with working_precision(300):
            if not lhs.overlaps((c * z.at(300) + d) ** (-k) * rhs):
                failures += 1
    return failures


def test_modularity_residual(report, level2, level3):
    rng = random.Random(6)
    fails = {N: modularity_failures(f, N, rng)
             for N, f in ((1, level_one_eigenform(12)), (2, level2), (3, level3))}
    report(6, not any(fails.values()), f"100 transformations per level, failures {fails}")


def test_mirror_savings(report):
    f = level_one_eigenform(12)
    counts = {p: count_evaluations(f, p, I) for p in (2, 3, 5, 11)}
    expected = {2: 3, 3: 3, 5: 4, 11: 7}
    report(7, counts == expected, f"evaluations {counts}")


def test_eisenstein_fast_path(report):
    eps = Fraction(1, 10**10)
    disjoint = []
    for k in (12, 16, 24):
        f = level_one_eigenform(k)
        for p in (2, 101):
            a = eigenvalue_numerical(f, p, eps, method="direct")
            b = eigenvalue_numerical(f, p, eps, method="eisenstein")
            COMPUTED.extend([(p, k, a.value), (p, k, b.value)])
            if not a.value.overlaps(b.value):
                disjoint.append((k, p))
    medians = {}
    for k in (100, 200):
        times = {"direct": [], "eisenstein": []}
        for _ in range(5):
            for method in times:
                clear_caches()
                start = time.perf_counter()
                r = eigenvalue_numerical(level_one_eigenform(k), 101, eps, method=method)
                times[method].append(time.perf_counter() - start)
                COMPUTED.append((101, k, r.value))
        medians[k] = {m: statistics.median(t) for m, t in times.items()}
    faster = all(m["eisenstein"] <= m["direct"] for m in medians.values())
    shown = ", ".join(f"k={k} direct {m['direct']:.3f} s eisenstein {m['eisenstein']:.3f} s"
                      for k, m in medians.items())
    report(8, not disjoint and faster, f"disjoint routes {disjoint}; {shown}")


def test_deligne_sanity(report):
    # runs last in this module; HeckeEigenvalue also refuses to exist when the bound fails
    assert COMPUTED, "no eigenvalues were recorded"
    bad = [(p, k) for p, k, v in COMPUTED if not deligne_ok(p, k, v)]
    report(9, not bad, f"{len(COMPUTED)} eigenvalues, violations {bad}")
