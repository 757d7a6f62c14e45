"""Regenerate the level 2 and level 3 coefficient fixtures.

Both newforms are eta products, so their q-expansions follow from Euler's
pentagonal number theorem with integer arithmetic only:

    level 2, weight 8:  (eta(z) eta(2z))^8 = q prod (1 - q^n)^8 (1 - q^2n)^8
    level 3, weight 6:  (eta(z) eta(3z))^6 = q prod (1 - q^n)^6 (1 - q^3n)^6

The Atkin-Lehner signs follow from eta(-1/z) = sqrt(z/i) eta(z): under
z -> -1/(Nz) the first form picks up +1 and the second -1.

Run:  python tests/fixtures/generate_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

LENGTH = 2000
HERE = Path(__file__).resolve().parent


def euler_product(M: int) -> list[int]:
    """prod_{n>=1} (1 - q^n) up to q^M."""
    out = [0] * (M + 1)
    k = 0
    while True:
        hit = False
        for m in (k, -k) if k else (0,):
            e = m * (3 * m - 1) // 2
            if e <= M:
                out[e] = -1 if m % 2 else 1
                hit = True
        if not hit and k:
            break
        k += 1
    return out


def mul(a: list[int], b: list[int], M: int) -> list[int]:
    out = [0] * (M + 1)
    for i, x in enumerate(a):
        if x:
            for j in range(M + 1 - i):
                if b[j]:
                    out[i + j] += x * b[j]
    return out


def power(a: list[int], n: int, M: int) -> list[int]:
    result = [1] + [0] * M
    base = a
    while n:
        if n & 1:
            result = mul(result, base, M)
        n >>= 1
        if n:
            base = mul(base, base, M)
    return result


def dilate(a: list[int], d: int, M: int) -> list[int]:
    out = [0] * (M + 1)
    for i, x in enumerate(a):
        if i * d > M:
            break
        out[i * d] = x
    return out


def eta_quotient(N: int, r: int, length: int) -> list[int]:
    """Coefficients a_1..a_length of q prod (1-q^n)^r (1-q^{Nn})^r."""
    M = length - 1
    e = euler_product(M)
    series = mul(power(e, r, M), power(dilate(e, N, M), r, M), M)
    return series[:length]


def write(name: str, level: int, weight: int, sign: int, coeffs: list[int]) -> None:
    lines = ["{", f' "level": {level},', f' "weight": {weight},', f' "atkin_lehner_sign": {sign},',
             ' "coefficients": [']
    lines.append(",\n".join(f"  {json.dumps(str(c))}" for c in coeffs))
    lines += [" ]", "}"]
    (HERE / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


def main() -> None:
    write("level2_weight8.json", 2, 8, 1, eta_quotient(2, 8, LENGTH))
    write("level3_weight6.json", 3, 6, -1, eta_quotient(3, 6, LENGTH))


if __name__ == "__main__":
    main()
