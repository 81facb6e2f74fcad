"""
Regenerate ``frozen.json`` from the quadrature oracles in ``oracles.py``.

    python3 tests/make_frozen.py

The package code is never imported here.
"""

import json
from pathlib import Path

import numpy as np

from oracles import dlog_bessel_k_quad, gig_quad_moments, log_bessel_k_quad

GRID_LAM = list(range(-5, 6))
GRID_X = [0.1, 1.0, 10.0, 50.0]
DEBYE_POINTS = [(50.0, 100.0), (51.0, 1.0), (60.0, 10.0), (80.0, 0.5), (55.0, 55.0),
                (0.0, 60.0), (2.5, 75.0), (120.0, 30.0), (-70.0, 5.0), (-52.5, 200.0),
                (10.0, 51.0), (200.0, 300.0)]
DORDER_POINTS = [(0.3, 0.1), (-1.7, 1.0), (2.5, 3.0), (4.0, 10.0), (-0.5, 40.0), (12.0, 49.0),
                 (60.0, 20.0), (-14.5, 61.0), (1.0, 80.0)]


def main():
    out = {}
    out["log_bessel_k"] = [[lam, x, log_bessel_k_quad(lam, x)] for lam in GRID_LAM for x in GRID_X]
    out["log_bessel_k_debye"] = [[lam, x, log_bessel_k_quad(lam, x)] for lam, x in DEBYE_POINTS]
    out["dlog_bessel_k"] = [[lam, x, dlog_bessel_k_quad(lam, x)] for lam, x in DORDER_POINTS]
    rng = np.random.default_rng(20240611)
    pts = [(1.0, 2.0, 1.0), (4.0, 4.0, -0.5)]
    for _ in range(20):
        pts.append((float(np.exp(rng.uniform(-2, 3))), float(np.exp(rng.uniform(-2, 3))),
                    float(rng.uniform(-8, 8))))
    out["gig_moments"] = [[psi, chi, lam, *gig_quad_moments(psi, chi, lam)] for psi, chi, lam in pts]
    path = Path(__file__).with_name("frozen.json")
    path.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
