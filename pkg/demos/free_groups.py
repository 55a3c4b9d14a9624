"""Free groups and their subdivisions: exact density, coding and verdict.

Run: python demos/free_groups.py
"""

import math

from arbocode import library
from arbocode.bass_serre import length_invariants, sphere_counts, volume_entropy
from arbocode.markov import build_gf_coding, chain_entropy_rate, verdict
from arbocode.ps import solve_ps
from arbocode.shift import build_subshift

# %% Growth of the tree of F_m: spheres grow like (2m - 1)^n
for m in (2, 3):
    g = library.wedge(m)
    ent = volume_entropy(g)
    print(f"F{m}: spheres {sphere_counts(g, 5)}  delta = log({ent.base})/{ent.root}")

# %% Exact density: r = e^-delta is rational, every shadow at the basepoint is 1/(2m)
g = library.wedge(2)
ps = solve_ps(g)
print("r =", ps.r, " shadows:", sorted(set(ps.shadow.values())))

# %% Coding: four letters, uniform transitions, entropy rate log 3
gf = build_gf_coding(g, ps, 0)
print("letters:", [gf.letter_name(a) for a in gf.alphabet])
print("transition probabilities:", sorted(set(gf.pi.values())))
h = chain_entropy_rate(gf.nu, gf.succ, gf.pi, gf.full_rows())
print(f"entropy rate {h:.12f} vs log 3 = {math.log(3):.12f}")
print("verdict:", verdict(g, gf.spec(), ps).bernoulli_claim)

# %% Subdividing each loop once halves the exponent and doubles the period
sub = library.subdivided_wedge(2, 2)
ps2 = solve_ps(sub)
v = verdict(sub, build_gf_coding(sub, ps2, 0).spec(), ps2)
L = length_invariants(sub, build_subshift(sub, 1)).L_exact
print(f"subdivided: delta = {ps2.delta:.12f} (log(3)/2 = {math.log(3) / 2:.12f})")
print(f"period {v.period}, translation lengths generate {L}Z, claim {v.bernoulli_claim}")
print("two-step recoding:", v.two_step)
