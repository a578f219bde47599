"""Smoke test for the packet_collapse extension module.

Build the module first, for example:

    cargo build -p packet-collapse-py --release --features extension-module
    cp target/release/libpacket_collapse_py.so python/packet_collapse.so

or `maturin develop -m crates/python/Cargo.toml`. Then run
`python3 python/smoke_test.py`.
"""

import math
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import packet_collapse as pc  # noqa: E402


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)
    print("ok  ", msg)


def main():
    grid = pc.Grid1D(-40.0, 40.0, 1024)
    check(grid.n_points == 1024 and abs(grid.dx - 80.0 / 1024) < 1e-15, "grid accessors")

    psi = pc.WaveFunction.gaussian(grid, 0.0, 1.0, 0.5)
    check(abs(psi.norm() - 1.0) < 1e-12, "gaussian is normalized")

    s = pc.packet_summary(psi)
    check(abs(s["uncertainty_product"] - 0.5) < 1e-9, "minimum uncertainty product")

    later = pc.evolve(psi, pc.Potential.free(), 0.01, 200)
    s2 = pc.packet_summary(later)
    check(abs(s2["std_x"] - math.sqrt(2.0)) < 1e-6, "free spreading law at t = 2")
    check(abs(psi.norm() - 1.0) < 1e-12 and psi.amplitudes() != later.amplitudes(), "inputs are not mutated")

    narrow = pc.WaveFunction.gaussian(pc.Grid1D(0.0, 20.0, 1024), 10.0, 0.1)
    gate = pc.wave_packet_gate(narrow, [0.0, 1.0], k=6.0)
    check(gate["is_wave_packet"], "narrow packet passes the gate")

    a = pc.WaveFunction.gaussian(grid, -10.0, 1.0)
    b = pc.WaveFunction.gaussian(grid, 10.0, 1.0)
    p = pc.geometric_probabilities([0.6, 0.8j], [a, b])
    check(abs(p[0] - 0.36) < 1e-8 and abs(p[1] - 0.64) < 1e-8, "geometric probabilities equal |c|^2")

    ones = sum(pc.sample_index([0.36, 0.64], seed) for seed in range(20000))
    check(abs(ones / 20000 - 0.64) < 0.011, "Born frequency")

    try:
        pc.WaveFunction.gaussian(grid, 39.0, 1.0)
    except pc.PacketCollapseError:
        check(True, "boundary clipping raises PacketCollapseError")
    else:
        raise AssertionError("expected PacketCollapseError")

    heavy = pc.PhysicalParams(mass=100.0)
    app_grid = pc.Grid1D(-20.0, 40.0, 1024)
    ready = pc.WaveFunction.gaussian(app_grid, 0.0, 1.0, params=heavy)
    out = pc.measure([0.6, 0.8], ready, seed=3, params=heavy)
    check(abs(out["t_star"] - 1.0) <= 0.1, "measurement transition time")
    check(out["object_mixture"] == [0.6 ** 2, 0.8 ** 2], "object mixture")

    with tempfile.TemporaryDirectory() as tmp:
        manifest = pc.run_scenario('scenario = "collapse_sample"\n[packet]\ncenter = -10.0\n', tmp, seed=5)
        check(manifest["status"] == "passed", "scenario run passes")
        check((Path(manifest["run_dir"]) / "manifest.json").exists(), "manifest written")

    print("smoke test passed")


if __name__ == "__main__":
    main()
