"""Acylindricity verdicts and the order-k coding round trip.

Run: python demos/acylindricity.py
"""

import numpy as np

from arbocode.acyl import acylindricity, verify_witness
from arbocode.library import CATALOG
from arbocode.shift import canonicalize_mod_gamma, decode_orderk, itinerary, random_window

# %% Verdicts on the shipped inputs without rays
for name in ("f2", "s3amalgam", "z2loop", "z2dec", "kleinamalgam"):
    rep = acylindricity(CATALOG[name](), witness=False)
    print(f"{name:13s} {rep.verdict:17s} k_min={rep.k_min} bound={rep.bound_used}")

# %% A witness for the Z/2 loop: an elliptic h commuting with a hyperbolic g
g = CATALOG["z2loop"]()
rep = acylindricity(g)
print("witness checks:", verify_witness(g, rep.witness, 2 * rep.bound_used))

# %% On a 2-acylindrical amalgam, order-2 letters determine the geodesic up to the group
g = CATALOG["s3amalgam"]()
rng = np.random.default_rng(1)
ok = 0
for _ in range(200):
    w = random_window(g, 60, rng)
    ok += decode_orderk(g, itinerary(g, w, 2), 2) == canonicalize_mod_gamma(g, w)
print(f"round trips: {ok}/200")
