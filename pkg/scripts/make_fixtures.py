"""Regenerate the committed test fixtures and the default plan file.

Run from the repository root:

    python3 scripts/make_fixtures.py

Writes tests/fixtures/tiny.csv (a small deterministic series),
tests/fixtures/tiny.utsf (a checkpoint trained on it), and
plans/default.json (the stock benchmark grid). All three are
deterministic, so reruns reproduce the committed bytes.
"""

import os
import shutil
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from unettsf.cli import main
from unettsf.rng import SplitMix64

ROOT = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
FIXTURES = os.path.join(ROOT, "tests", "fixtures")

TRAIN_ARGS = [
    "--model", "unettsf", "--input-len", "12", "--horizon", "4",
    "--stages", "2", "--max-epochs", "5", "--patience", "5",
    "--seed", "2021",
]


def fixture_values(n: int = 160, channels: int = 2) -> np.ndarray:
    rng = SplitMix64(42)
    t = np.arange(n, dtype=np.float64)
    values = np.empty((n, channels))
    for c in range(channels):
        phase = rng.random() * 6.28
        noise = rng.uniform(-0.05, 0.05, n)
        values[:, c] = np.sin(0.07 * (c + 1) * t + phase) + noise
    return values


def write_fixture_csv(path: str) -> None:
    values = fixture_values()
    with open(path, "w") as fh:
        fh.write("date,a,b\n")
        for i in range(values.shape[0]):
            fh.write(f"t{i:04d},{values[i, 0]:.10g},{values[i, 1]:.10g}\n")


def run() -> None:
    # Relative paths end up in the checkpoint header; pin the cwd so the
    # committed bytes do not depend on where the repository is checked out.
    os.chdir(ROOT)
    os.makedirs(FIXTURES, exist_ok=True)
    csv_path = os.path.join("tests", "fixtures", "tiny.csv")
    write_fixture_csv(csv_path)

    with tempfile.TemporaryDirectory() as tmp:
        rc = main(["train", "--dataset", csv_path, "--out", tmp, *TRAIN_ARGS])
        if rc != 0:
            raise SystemExit(f"fixture training failed with exit code {rc}")
        shutil.copy(os.path.join(tmp, "checkpoint.utsf"),
                    os.path.join(FIXTURES, "tiny.utsf"))

    plans = os.path.join(ROOT, "plans")
    os.makedirs(plans, exist_ok=True)
    rc = main(["benchmark", "--write-default-plan",
               os.path.join(plans, "default.json")])
    if rc != 0:
        raise SystemExit(f"plan writing failed with exit code {rc}")
    print("fixtures regenerated")


if __name__ == "__main__":
    run()
