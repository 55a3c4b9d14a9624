"""A tree lattice with one cusp: measure, coding with cusp letters and checks.

The input has a finite core and one ray whose groups grow by a constant
index q. Run: python demos/cusp_coding.py
"""

import math

import numpy as np

from arbocode.library import CATALOG
from arbocode.markov import (build_gf_coding, entropy_hP, gf_identities, gf_level_for_tail,
                             kappa_check, markov_ratio_check, random_geodesic)
from arbocode.ps import cusp_rate_table, exponent_lower_bounds, solve_ps

g = CATALOG["nagao_q2"]()
ps = solve_ps(g)
print(f"delta = {ps.delta:.12f} (log 2 = {math.log(2):.12f}), r = {ps.r}")

# %% Counting inside the cusp grows at half the exponent
for row in cusp_rate_table(g, 0, ps.delta)[:5]:
    print(f"  level {row['n']}: rate {row['rate']:.12f}  delta/2 = {row['half_delta']:.12f}")

# %% The coding has one letter family per ray level; identities hold on retained rows
gf = build_gf_coding(g, ps, 4)
print("first letters:", [gf.letter_name(a) for a in gf.alphabet[:10]])
rep = gf_identities(gf)
print(f"row sums {rep['row_sum_residual']:.1e}, stationarity {rep['stationarity_residual']:.1e}, "
      f"retained mass {rep['retained_mass_float']:.6f}")

# %% Entropy of the partition, with a certified bound on the letters left out
L = gf_level_for_tail(g, ps)
h, tail = entropy_hP(build_gf_coding(g, ps, L))
print(f"entropy {h:.9f} at level {L}, tail below {tail:.1e}")

# %% Markov property: cylinder ratios do not depend on the length of the past
A = gf.alphabet
rng = np.random.default_rng(3)
word = []
while len(word) < 6 or not any(a[0] == "+" for a in word):
    # random admissible word of six letters that turns inside the cusp
    word = [A[int(rng.integers(len(A)))]]
    while len(word) < 6 and gf.succ[gf.index[word[-1]]]:
        s = gf.succ[gf.index[word[-1]]]
        word.append(A[s[int(rng.integers(len(s)))]])
chk = markov_ratio_check(gf, word[:5], word[5])
print("word", [gf.letter_name(a) for a in word], "ratios", [str(x) for x in chk["ratios"]])

# %% Letters read along random geodesics, and along the reversed geodesics
rng = np.random.default_rng(0)
paths = [random_geodesic(g, 30, rng) for _ in range(50)]
print("nagao_q2:", kappa_check(gf, paths))
g3 = CATALOG["nagao_q3"]()
ps3 = solve_ps(g3)
rng = np.random.default_rng(0)
paths3 = [random_geodesic(g3, 30, rng) for _ in range(50)]
for turn in ("inverse", "geometric"):
    print(f"nagao_q3 {turn}:", kappa_check(build_gf_coding(g3, ps3, 4, turn), paths3))

# %% A ray whose indices grow doubly exponentially has no finite exponent
rep = exponent_lower_bounds(CATALOG["superexp"](), 0)
print("lower bounds:", [round(r["exponent_bound"], 3) for r in rep["rows"]],
      "infinite:", rep["infinite_exponent"])
