"""Smoke test for the ksdrift extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/ksdrift-*.whl
"""

import math
import tempfile
from pathlib import Path

import ksdrift


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    grid = ksdrift.Grid(40.0, 4000)
    check(len(grid) == 4000 and abs(sum(grid.widths) - 40.0) < 1e-9, "grid widths sum to L")

    h = ksdrift.DensityField.stationary(1.0, grid)
    check(abs(h.mass() - 1.0) < 1e-12, "stationary profile has unit mass")
    check(abs(h.trace_residual()) < 5 * 0.01, "trace inequality is tight on h_1")
    check(h.relative_entropy(h) == 0.0, "H(h | h) = 0")

    p1 = ksdrift.mass_relation_p(1.0)
    oracle = math.sqrt(math.pi / 2) * math.exp(0.5) * math.erfc(1 / math.sqrt(2))
    check(abs(p1 - oracle) < 1e-12, "P(1) matches the Gaussian tail closed form")
    check(abs(ksdrift.solve_alpha_for_mass(p1) - 1.0) < 1e-7, "solve_alpha_for_mass inverts P")
    check(ksdrift.blowup_time_bound(1.5, 1.5) == 2.0, "T* = J0^2 / (M^2 (M - 1))")

    field = ksdrift.DensityField(grid, [math.exp(-x) for x in grid.centers]).normalized_to(1.5)
    run = ksdrift.run_physical(field, 5.0)
    cert = run["certificate"]
    check(cert["detected"] and cert["detection_time"] <= 2.0, "M = 1.5 blows up before T*")

    config = ksdrift.ScenarioConfig.parse("regime = coupled\nM = 2\nmu0 = 0.5\nL = 20\nN = 400\nT_final = 1\n")
    check(ksdrift.ScenarioConfig.parse(config.to_text()).to_text() == config.to_text(), "config text round trip")
    with tempfile.TemporaryDirectory() as out:
        config.output_path = out
        summary = config.run()
        names = sorted(p.name for p in Path(out).iterdir())
        check(names == ["final_profile.csv", "summary.json", "timeseries.csv"], "run writes its outputs")
        check(summary["mass_drift"] < 1e-12, "coupled run conserves total mass")

    try:
        ksdrift.ScenarioConfig.parse("regime = selfsimilar\nM = 1.2\n")
    except ValueError as e:
        check("M < 1" in str(e), "invalid config raises ValueError")
    else:
        raise SystemExit("FAIL: supercritical self-similar config accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
