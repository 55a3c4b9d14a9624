"""Regenerate the CLI golden reports: ``python tests/golden/make_golden.py``.

Reports are produced with the data directory as working directory so the
recorded input path is the bare file name.
"""

import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(HERE))

from golden_cases import CASES, DATA, NEGATIVE, case_name  # noqa: E402

from arbocode.cli import RunConfig, run  # noqa: E402


def render(command, fname, extra):
    base = DATA if os.path.exists(os.path.join(DATA, fname)) else NEGATIVE
    cwd = os.getcwd()
    os.chdir(base)
    try:
        return run(RunConfig(command, fname, **extra))
    finally:
        os.chdir(cwd)


if __name__ == "__main__":
    for command, fname, extra in CASES:
        code, text = render(command, fname, extra)
        with open(os.path.join(HERE, case_name(command, fname, extra)), "w") as fh:
            fh.write(text)
        print(f"{code} {case_name(command, fname, extra)}")
