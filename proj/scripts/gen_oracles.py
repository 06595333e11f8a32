#!/usr/bin/env python3
"""Generate frozen reference constants for the test suite.

Run from the repo root:  python3 scripts/gen_oracles.py > tests/oracle_data.hpp

Everything here is computed independently of the C++ library: exact rational
binomial tails, direct series summation, and integer minor arithmetic. The
output header is committed; regenerating it must be a no-op.
"""

import math
from fractions import Fraction

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def series_log_cos(theta: float, K: int) -> float:
    """sum_{k=0}^{K} 2^{-k-2} * log|cos(2 pi k theta)|."""
    s = 0.0
    for k in range(K + 1):
        c = abs(math.cos(2.0 * math.pi * k * theta))
        s += 0.5 ** (k + 2) * math.log(c)
    return s


def binom_two_sided_tail(n: int, s: float) -> float:
    """P(|sum of n fair +-1 steps| >= s), exact rational arithmetic."""
    total = Fraction(0)
    for k in range(n + 1):
        if abs(2 * k - n) >= s:
            total += Fraction(math.comb(n, k), 2 ** n)
    return float(total)


def wedge2_3x3(m):
    """Second exterior power of a 3x3 integer matrix, lexicographic pair basis
    (0,1),(0,2),(1,2); entry = 2x2 minor on those row/column pairs."""
    pairs = [(0, 1), (0, 2), (1, 2)]
    out = []
    for (r0, r1) in pairs:
        row = []
        for (c0, c1) in pairs:
            row.append(m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0])
        out.append(row)
    return out


def main():
    print("#pragma once")
    print("// Frozen reference values. Generated by scripts/gen_oracles.py;")
    print("// regenerate with: python3 scripts/gen_oracles.py > tests/oracle_data.hpp")
    print("// Do not edit by hand.")
    print()
    print("namespace oracle {")
    print()

    v = series_log_cos(GOLDEN, 40)
    print(f"inline constexpr double golden_theta = {GOLDEN!r};")
    print(f"inline constexpr double ltheta_series_golden_K40 = {v!r};")
    v8 = series_log_cos(0.125, 40)
    print(f"inline constexpr double ltheta_series_eighth_K40 = {v8!r};")
    print()

    # Azuma comparison grid: exact two-sided binomial tails vs 2 exp(-s^2/2n).
    grid = []
    for n in (20, 50, 100, 200, 400):
        for frac in (0.1, 0.2, 0.3, 0.45):
            s = max(2.0, round(frac * n))
            grid.append((n, s))
    grid = grid[:20]
    print(f"inline constexpr int azuma_grid_size = {len(grid)};")
    print("// columns: n, s, exact two-sided tail P(|S_n| >= s)")
    print(f"inline constexpr double azuma_grid[{len(grid)}][3] = {{")
    for (n, s) in grid:
        t = binom_two_sided_tail(n, s)
        print(f"    {{{n}, {s!r}, {t!r}}},")
    print("};")
    t100 = binom_two_sided_tail(100, 20)
    print(f"inline constexpr double binom_tail_n100_s20 = {t100!r};")
    print()

    m = [[2, -1, 0], [3, 1, 4], [-2, 5, 1]]
    w = wedge2_3x3(m)
    print("// wedge^2 of [[2,-1,0],[3,1,4],[-2,5,1]], basis e0^e1, e0^e2, e1^e2")
    print("inline constexpr double wedge2_fixture_in[3][3] = {")
    for row in m:
        print("    {" + ", ".join(str(x) for x in row) + "},")
    print("};")
    print("inline constexpr double wedge2_fixture_out[3][3] = {")
    for row in w:
        print("    {" + ", ".join(str(x) for x in row) + "},")
    print("};")
    print()
    print("}  // namespace oracle")


if __name__ == "__main__":
    main()
