#!/usr/bin/env python3
"""Smoke test for the tsodso_py extension module.

Builds nothing itself: expects the cdylib under target/release (or
target/debug). Run from the repository root:

    cargo build --release -p tsodso-py
    python3 python/smoke_test.py
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def import_module():
    for profile in ("release", "debug"):
        built = ROOT / "target" / profile / "libtsodso_py.so"
        if built.exists():
            staging = Path(tempfile.mkdtemp(prefix="tsodso_py_"))
            shutil.copy(built, staging / "tsodso_py.so")
            sys.path.insert(0, str(staging))
            import tsodso_py  # noqa: PLC0415

            return tsodso_py
    raise SystemExit("build the extension first: cargo build --release -p tsodso-py")


def approx(a, b, tol=1e-6):
    assert abs(a - b) < tol, f"{a} != {b} (tol {tol})"


def main():
    m = import_module()

    case = m.Case.bundled()
    report = case.validate()
    assert report["valid"], report["fatals"]
    approx(case.net_load(), 1019.0, 1e-9)
    total, trans, dist = case.imbalances("s1")
    approx(total, 129.0, 1e-9)
    approx(trans, 99.0, 1e-9)
    assert [round(d) for d in dist] == [9, 6, 15]

    # Published day-ahead clearing.
    bids = {
        "U1": 96.80, "U2": 93.60, "U3": 100.10, "U4": 92.30, "U5": 93.50,
        "U6": 88.00, "U7": 82.50, "U8": 94.60, "U9": 90.20, "U10": 80.30,
    }
    dam = m.py_clear_dam(case, bids)
    approx(dam["price"], 96.80)
    approx(dam["quantities"]["U1"], 259.0)
    approx(dam["quantities"]["U3"], 0.0)

    # Cost evaluation at the initialization profile.
    profile = m.init_profile(case, "A")
    costs = m.evaluate_costs(case, "A", profile)
    assert len(costs["per_scenario"]) == 7

    # Round-trip a case file through JSON.
    path = ROOT / "cases" / "cigre.json"
    if path.exists():
        loaded = m.Case.load(str(path))
        approx(loaded.net_load(), 1019.0, 1e-9)

    # Tiny duopoly: equilibrium search (oracle responder) plus verification.
    toy = {
        "version": 1,
        "network": {"nodes": [{"id": "t1", "subsystem": "T"}], "lines": [], "ptdf": []},
        "units": [
            {"id": "g1", "node": "t1", "owner": "A1", "capacity": 60.0,
             "cost": 40.0, "cost_up": 60.0, "cost_down": 20.0},
            {"id": "g2", "node": "t1", "owner": "A2", "capacity": 60.0,
             "cost": 42.0, "cost_up": 63.0, "cost_down": 21.0},
        ],
        "renewables": [],
        "loads": [{"node": "t1", "forecast": 80.0, "realized": [80.0],
                   "curtailable_fraction": 0.0, "owner": None}],
        "ladders": [
            {"resource": "g1", "role": "dam-sale", "prices": [50.0, 70.0]},
            {"resource": "g1", "role": "up-regulation", "prices": [90.0]},
            {"resource": "g1", "role": "down-regulation", "prices": [15.0]},
            {"resource": "g2", "role": "dam-sale", "prices": [51.0, 65.0]},
            {"resource": "g2", "role": "up-regulation", "prices": [91.0]},
            {"resource": "g2", "role": "down-regulation", "prices": [16.0]},
        ],
        "scenarios": {"ids": ["s1"], "probabilities": [1.0]},
        "aggregators": [
            {"id": "A1", "units": ["g1"], "loads": []},
            {"id": "A2", "units": ["g2"], "loads": []},
        ],
        "provenance": {},
    }
    toy_case = m.Case.from_json(json.dumps(toy))
    rep = m.py_find_equilibrium(toy_case, "A", 10, True)
    assert rep["converged"], rep
    ok, improvements = m.py_is_nash(toy_case, "A", rep["profile"])
    assert ok, improvements

    # MPS export of a bilevel model.
    mps = m.export_mpec_mps(toy_case, "A", "A1", rep["profile"])
    assert mps.startswith("NAME"), mps[:40]
    assert "ENDATA" in mps

    print("smoke test passed")


if __name__ == "__main__":
    main()
