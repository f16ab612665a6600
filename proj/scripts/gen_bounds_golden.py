#!/usr/bin/env python3
"""Regenerates tests/data/bounds_golden.json.

Evaluates the critical-time, worst-case-envelope, and constant-regret
formulas in 50-digit arithmetic so the double-precision implementations
can be pinned against independently computed values.
"""

import json
import os

import mpmath as mp

mp.mp.dps = 50


def kappa(d_poly1, d_log1, d_poly2, d_log2, d, h, delta, dmin, lp, c1, c2):
    b1 = (
        48 * c1**2 * h**4 * d**d_poly1 / lp**2
        * mp.log(32 * c1**2 * h**5 * d**d_log1 / (lp**2 * delta))
    )
    b2 = (
        432 * c2**2 * h**4 * d**d_poly2 / (dmin**2 * lp**3)
        * mp.log(288 * d**d_log2 * h**5 * c2**2 / (dmin**2 * lp**3 * delta))
    )
    return b1, b2, max(b1, b2)


def beta_anytime(k, d, h, delta, c_beta):
    return c_beta * d * h * mp.sqrt(mp.log(2 * d * h * k / delta))


def g_worstcase(k, d, h, delta, beta_k, lam=1):
    return h * beta_k * mp.sqrt(2 * d * k * mp.log(1 + mp.mpf(k) / lam)) + 2 * h**2 * mp.sqrt(
        k * mp.log(2 * h * k / delta)
    )


def expressions(kbar, d, h, delta, dmin):
    lsvi = d**3 * h**5 / dmin * mp.log(d * h**2 * kbar / delta)
    tau = h * kbar
    eleanor = h ** mp.mpf("1.5") * d * mp.sqrt(tau * mp.log(tau / delta))
    return lsvi, eleanor


def main():
    lp_example_1 = (13 - 3 * mp.sqrt(17)) / 32
    lp_example_2 = (61 - mp.sqrt(2713)) / 128
    grid = [
        # (d, H, delta, delta_min, lambda_plus, c1, c2, c_beta)
        (2, 2, mp.mpf("0.05"), mp.mpf(3) / 32, lp_example_1, 8, 1, mp.mpf("0.2")),
        (2, 2, mp.mpf("0.05"), mp.mpf(3) / 32, lp_example_2, 8, 1, mp.mpf("0.2")),
        (1, 1, mp.mpf("0.05"), 1, 1, 8, 1, mp.mpf("0.2")),
        (1, 3, mp.mpf("0.01"), mp.mpf("0.25"), mp.mpf("0.5"), 8, 1, mp.mpf("0.2")),
        (2, 1, mp.mpf("0.1"), mp.mpf("0.1"), mp.mpf("0.05"), 8, 1, 1),
        (2, 4, mp.mpf("0.05"), mp.mpf("0.02"), mp.mpf("0.02"), 8, 1, mp.mpf("0.2")),
        (3, 2, mp.mpf("0.05"), mp.mpf("0.5"), mp.mpf("0.3"), 8, 1, mp.mpf("0.2")),
        (3, 3, mp.mpf("0.01"), mp.mpf("0.05"), mp.mpf("0.01"), 8, 2, mp.mpf("0.2")),
        (4, 2, mp.mpf("0.05"), mp.mpf("0.09375"), mp.mpf("0.07"), 8, 1, mp.mpf("0.2")),
        (4, 4, mp.mpf("0.02"), mp.mpf("0.2"), mp.mpf("0.15"), 10, 1, mp.mpf("0.5")),
        (4, 5, mp.mpf("0.05"), mp.mpf("0.01"), mp.mpf("0.005"), 8, 1, mp.mpf("0.2")),
        (5, 2, mp.mpf("0.05"), mp.mpf("0.3"), mp.mpf("0.25"), 8, 1, mp.mpf("0.2")),
        (5, 5, mp.mpf("0.01"), mp.mpf("0.05"), mp.mpf("0.05"), 8, 1, 1),
        (6, 3, mp.mpf("0.05"), mp.mpf("0.12"), mp.mpf("0.08"), 9, 1, mp.mpf("0.2")),
        (8, 2, mp.mpf("0.05"), mp.mpf("0.01"), mp.mpf("0.01"), 8, 1, mp.mpf("0.2")),
        (8, 8, mp.mpf("0.001"), mp.mpf("0.5"), mp.mpf("0.4"), 8, 2, mp.mpf("0.2")),
        (10, 4, mp.mpf("0.05"), mp.mpf("0.05"), mp.mpf("0.02"), 8, 1, mp.mpf("0.2")),
        (12, 2, mp.mpf("0.05"), mp.mpf("0.8"), mp.mpf("0.6"), 8, 1, mp.mpf("0.1")),
        (16, 3, mp.mpf("0.02"), mp.mpf("0.25"), mp.mpf("0.1"), 8, 1, mp.mpf("0.2")),
        (20, 5, mp.mpf("0.05"), mp.mpf("0.1"), mp.mpf("0.05"), 8, 1, mp.mpf("0.2")),
    ]

    entries = []
    for d, h, delta, dmin, lp, c1, c2, c_beta in grid:
        b1, b2, k_lsvi = kappa(3, 4, 2, 3, d, h, delta, dmin, lp, c1, c2)
        e1, e2, k_ele = kappa(2, 3, 1, 2, d, h, delta, dmin, lp, c1, c2)
        expr_lsvi, expr_ele = expressions(k_lsvi, d, h, delta, dmin)
        g_points = []
        for k in (1, 1000, 30000):
            beta_k = beta_anytime(k, d, h, delta, c_beta)
            g_points.append(
                {
                    "k": k,
                    "beta": float(beta_k),
                    "value": float(g_worstcase(k, d, h, delta, beta_k)),
                }
            )
        entries.append(
            {
                "d": int(d),
                "horizon": int(h),
                "delta": float(delta),
                "delta_min": float(dmin),
                "lambda_plus": float(lp),
                "c1": float(c1),
                "c2": float(c2),
                "c_beta": float(c_beta),
                "kappa_lsvi": float(k_lsvi),
                "kappa_lsvi_branch_exploration": float(b1),
                "kappa_lsvi_branch_gap": float(b2),
                "kappa_eleanor": float(k_ele),
                "kappa_eleanor_branch_exploration": float(e1),
                "kappa_eleanor_branch_gap": float(e2),
                "expr_lsvi": float(expr_lsvi),
                "expr_eleanor": float(expr_ele),
                "g": g_points,
            }
        )

    out_path = os.path.join(os.path.dirname(__file__), "..", "tests", "data",
                            "bounds_golden.json")
    os.makedirs(os.path.dirname(out_path), exist_ok=True)
    with open(out_path, "w") as f:
        json.dump({"entries": entries}, f, indent=1)
        f.write("\n")
    print(f"wrote {len(entries)} entries to {out_path}")


if __name__ == "__main__":
    main()
