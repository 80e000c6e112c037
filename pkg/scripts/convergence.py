"""Manufactured-solution convergence of the Darcy and elasticity blocks.

    python3 scripts/convergence.py
"""
import argparse

from _common import setup, write_rows

from poroperf.verification import darcy_convergence, elasticity_convergence, observed_orders, quadratic_reproduction


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/convergence")
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    args = ap.parse_args()
    out = setup(args.out)
    rows = []
    for name, fn in (("darcy_p2", darcy_convergence), ("elasticity_p1", elasticity_convergence)):
        h, e = fn(tuple(args.n))
        rates = [float("nan"), *observed_orders(h, e)]
        rows += [{"field": name, "h": hi, "l2_error": ei, "order": r} for hi, ei, r in zip(h, e, rates)]
    write_rows(out / "convergence.csv", rows)
    print(f"quadratic pressure reproduced to {quadratic_reproduction():.1e}")


if __name__ == "__main__":
    main()
