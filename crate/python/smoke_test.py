"""Smoke test for the henonlab_py extension.

Build and install first:
    pip install maturin
    maturin develop -m crates/py/Cargo.toml --release
"""

import math
import os
import sys
import tempfile

import henonlab_py as hl


def close(a, b, tol=1e-9):
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) <= tol


def main():
    f = hl.HenonMap(0.3, 0.1, [1, -0.5, 0.2])
    z = (0.4 - 0.2j, 1.1 + 0.7j)
    assert close(f.apply_inverse(f.apply(z)), z), "inverse roundtrip"
    j = f.jacobian(z)
    det = j[0][0] * j[1][1] - j[0][1] * j[1][0]
    assert abs(det - 0.1) < 1e-12, "jacobian determinant"
    g = f.inverse_as_plus()
    w = g.apply((z[1], z[0]))
    assert close((w[1], w[0]), f.apply_inverse(z)), "swap conjugation"

    quad = hl.HenonMap(0, 0.1, [1, 0, 0])
    pm = hl.MapDistribution.point_mass(quad)
    r, rho = pm.filtration()
    assert r > 1 and rho == 2.0

    verdict, n = hl.classify(pm, (0, 10 * r), 100, seed=1)
    assert verdict == "ESCAPED" and n == 0, (verdict, n)
    value, bound = hl.green(pm, (0, 10 * r), seed=1)
    assert abs(value - math.log(10 * r)) < 0.1 and bound <= 1e-6

    rep = hl.lyapunov(pm, (0, 0.05), samples=10, n_steps=20000, seed=3)
    oracle = 0.5 * math.log(0.1)
    assert abs(rep["exponent"] - oracle) < 1e-3, (rep["exponent"], oracle)

    census = hl.escape_census(pm, [(0, 0.1), (0, 0.2j)], 4, 500, seed=5)
    assert census["bounded_fraction"] == 1.0

    ms = hl.minimal_sets(pm, [(0, 0.1), (0, -0.1)], seed=7)
    finite = [d for d in ms if d["id"] != "INFINITY"]
    assert len(finite) == 1 and finite[0]["period"] == 1
    tl = hl.basin_probabilities(pm, ms, (0, 0.1), 200, 2000, seed=9)
    assert tl["probabilities"]["0"] == 1.0

    with tempfile.TemporaryDirectory() as out:
        assert hl.run_cli(["henonlab", "selftest"]) == 0
        cfg = os.path.join(out, "bad.json")
        with open(cfg, "w") as fh:
            fh.write('{"maps": [{"alpha": 0, "poly": [1, 0, 0]}]}')
        assert hl.run_cli(["henonlab", "minsets", "--config", cfg, "--out", out]) == 2

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
