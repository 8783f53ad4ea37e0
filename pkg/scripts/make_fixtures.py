"""Regenerate the frozen converge fixture.

    python scripts/make_fixtures.py

Runs the shipped study in configs/indicator.cfg through the CLI and stores
the CSV as tests/data/indicator_golden.csv.  The golden file is compared
byte for byte by the test suite, so only rerun this after an intentional
change to the random stream or the scheme.
"""

from pathlib import Path

from singular_em.cli import main

ROOT = Path(__file__).resolve().parents[1]


if __name__ == "__main__":
    out = ROOT / "tests" / "data" / "indicator_golden.csv"
    code = main(["converge", "--config", str(ROOT / "configs" / "indicator.cfg"), "--out", str(out), "--threads", "1"])
    print("exit", code, "wrote", out)
