"""The (command, file, options) triples with frozen CLI reports."""

import os

import arbocode

DATA = os.path.join(os.path.dirname(arbocode.__file__), "data")
NEGATIVE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "negative")

COMMANDS = ("validate", "ball", "code", "acyl", "measure", "markov", "diagnose", "collapse")
FILES = ("f2", "f2_sub2", "line", "z2loop", "z2dec", "s3amalgam", "kleinamalgam",
         "nagao_q2", "sl2f2", "superexp")

# the default nagao_q2 collapse is covered by the seeded variant below
CASES = [(c, f + ".gog", {}) for f in FILES for c in COMMANDS
         if (c, f) != ("collapse", "nagao_q2")]
CASES += [
    ("measure", "nagao_q2.gog", {"precision": "float"}),
    ("markov", "nagao_q2.gog", {"coding": "return", "radius": 8}),
    ("markov", "f2.gog", {"level": 2}),
    ("collapse", "nagao_q2.gog", {"samples": 20, "window": 40, "seed": 7}),
    ("validate", "not_latin.gog", {}),
    ("validate", "rho_not_injective.gog", {}),
]


def case_name(command, fname, extra):
    opts = "".join(f"_{k}-{v}" for k, v in sorted(extra.items()))
    return f"{fname[:-4]}.{command}{opts}.json"
