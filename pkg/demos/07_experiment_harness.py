"""Deterministic experiment harness
==================================

Experiments are described by strict JSON configs and produce byte-stable CSV
artifacts plus a manifest. The same (config, seed) pair always yields the same
bytes; the CLI equivalent of this script is

    mfglab run config.json --out results --seed 11 --jobs 2
"""

import json
import tempfile
from pathlib import Path

from mfglab import parse_config, run_experiment

config = {
    "experiment": "particle_vs_kinetic",
    "model": {"kind": "consensus", "alpha": {"kind": "constant", "value": 1.0}},
    "horizon": 0.25,
    "dt": 0.005,
    "n_particles_list": [64, 256],
    "n_seeds": 3,
    "seed": 11,
    "grid": {"cells": 128},
    "initial": {"kind": "gaussian", "mu": 0.5, "sigma": 0.12, "lo": 0.26, "hi": 0.74},
}

cfg = parse_config(json.dumps(config))
with tempfile.TemporaryDirectory() as tmp:
    first = Path(tmp) / "run1"
    second = Path(tmp) / "run2"
    r1 = run_experiment(cfg, out_dir=first, jobs=2)
    r2 = run_experiment(cfg, out_dir=second)
    print("exit code:", r1.exit_code)
    print("message:", r1.message)
    print("\nsummary.csv:")
    print((first / "summary.csv").read_text())
    same = all(
        (first / name).read_bytes() == (second / name).read_bytes()
        for name in ("cells.csv", "summary.csv")
    )
    print("re-run (and parallel run) byte-identical:", same)
    manifest = json.loads((first / "manifest.json").read_text())
    print("manifest keys:", sorted(manifest))
