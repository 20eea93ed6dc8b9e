#!/usr/bin/env python3
"""Smoke test for the bofprior_py extension module.

Build the module first, then run this script from anywhere in the repo:

    cargo build -p bofprior-py --release
    python3 python/smoke_test.py

The script locates the compiled cdylib in target/, stages it under the
importable name `bofprior_py`, and exercises every exported function.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module() -> None:
    candidates = [
        REPO / "target" / "release" / "libbofprior_py.so",
        REPO / "target" / "debug" / "libbofprior_py.so",
        REPO / "target" / "release" / "libbofprior_py.dylib",
        REPO / "target" / "debug" / "libbofprior_py.dylib",
    ]
    src = next((p for p in candidates if p.exists()), None)
    if src is None:
        sys.exit("bofprior_py cdylib not found; run: cargo build -p bofprior-py --release")
    stage = Path(tempfile.mkdtemp(prefix="bofprior-py-"))
    shutil.copy2(src, stage / "bofprior_py.so")
    sys.path.insert(0, str(stage))


stage_module()
import bofprior_py as bp  # noqa: E402

# trend-window theory helpers
assert bp.min_window(1.0, 0.1, 0.05) == 21
assert bp.min_window(0.048, 0.1, 0.05) == 3
assert bp.min_window(0.486, 0.1, 0.05) == 13
n = 50
assert math.isclose(bp.sxx(n), n * (n * n - 1) / 12.0, rel_tol=1e-12)
assert bp.concentration_bound(10.0, bp.sxx(21), 1.0) <= 1e-6
assert bp.concentration_bound(0.0, bp.sxx(21), 1.0) == 1.0

# Monte Carlo bound verification (small trial count for speed)
cells = json.loads(bp.verify_bounds(trials=5000, seed=0))
assert len(cells) == 16
for c in cells:
    assert c["empirical"] <= c["bound"] + 3.0 * c["std_err"] + 1e-12, c

# synthetic generation + prior extraction
values = bp.generate(120, 100, seed=7, noise_std=0.01)
assert len(values) == 120 and len(values[0]) == 100
config_json = bp.analyze(values, tau=0.2, delta=0.2)
config = json.loads(config_json)
assert config["s"] == 3
freqs = sorted(m["freq"] for m in config["modes"])
for f, target in zip(freqs, [3.5, 7.5, 12.0]):
    assert abs(f - target) <= 0.5, (f, target)
assert 0.5 <= config["rho_spec"] <= 1.0

# structural efficiency of the subsampled trend encoder
full = bp.param_count("I-BoF", 100, config_json)
reduced = bp.param_count("IT-BoF", 100, config_json)
assert reduced < full
assert 1.0 - reduced / full >= 0.15, (full, reduced)

# tiny four-variant training comparison
report = json.loads(bp.compare(values, config_json, trials=2, max_epochs=2, seed=5))
labels = {v["label"] for v in report["variants"]}
assert labels == set(bp.VARIANTS), labels
for v in report["variants"]:
    assert len(v["trials"]) == 2
    assert math.isfinite(v["mean_test_mse"])
informed = next(v for v in report["variants"] if v["label"] == "IT-BoF")
baseline = next(v for v in report["variants"] if v["label"] == "BoF")
assert informed["mean_initial_loss"] < baseline["mean_initial_loss"]

print("bofprior_py smoke test: all checks passed")
