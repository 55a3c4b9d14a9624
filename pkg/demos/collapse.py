"""Collapsing the cusps and comparing first returns with the collapsed shift.

Run: python demos/collapse.py
"""

from arbocode.collapse import collapse_cusps, sample_windows, star_shape, suspension_check
from arbocode.library import CATALOG

for name in ("nagao_q2", "nagao_q3", "sl2f2", "pgl2_f2"):
    g = CATALOG[name]()
    cs = collapse_cusps(g)
    star = star_shape(cs)
    rep = suspension_check(g, cs, sample_windows(g, 100, 30, seed=0))
    print(f"{name:9s} branches={star['branches']} star={star['is_star']} "
          f"returns={rep['commute_pass']} failures={rep['commute_fail']} "
          f"excursion time 2*depth: {rep['excursion_time_is_twice_depth']}")

# %% The collapsed graph is again a .gog file, with the limit vertices flagged
print(collapse_cusps(CATALOG["sl2f2"]()).text().splitlines()[:12])
