"""Peak pressure against the bell width factor b on fixed trees and mesh.

    python3 scripts/source_width_sweep.py --b 1 2 3 4
"""
import argparse

from _common import disk_pair, setup, write_rows

from poroperf.fem import Material
from poroperf.mesh import gen_disk_mesh
from poroperf.pipeline import CouplingSettings, solve_case


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/b_sweep")
    ap.add_argument("--b", type=float, nargs="+", default=[1.0, 2.0, 3.0, 4.0])
    ap.add_argument("--cells-per-radius", type=int, default=68)
    args = ap.parse_args()
    out = setup(args.out)
    pair = disk_pair(50)
    mesh = gen_disk_mesh(0.01, 0.01 / args.cells_per_radius)
    rows = []
    for b in args.b:
        res = solve_case(mesh, pair.supplying, pair.draining, Material(), CouplingSettings(b=b))
        s = res.summary()
        rows.append({"b": b, "max_pressure": s["max_pressure"], "max_velocity": s["max_velocity"],
                     "imbalance": s["mb_imbalance"]})
        res.write(out, f"b{b:g}")
    write_rows(out / "b_sweep.csv", rows)


if __name__ == "__main__":
    main()
