"""Displacement under spring contact compared with the fixed boundary.

    python3 scripts/contact_sweep.py --alpha 10 500 5000
"""
import argparse

import numpy as np
from _common import disk_pair, setup, write_rows

from poroperf.fem import Material
from poroperf.fem.constitutive import SpringBC, spring_stiffness
from poroperf.mesh import gen_disk_mesh
from poroperf.pipeline import CouplingSettings, relative_l2, solve_case


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/contact")
    ap.add_argument("--alpha", type=float, nargs="+", default=[1e1, 5e2])
    ap.add_argument("--c", type=float, default=15.0)
    ap.add_argument("--cells-per-radius", type=int, default=68)
    args = ap.parse_args()
    out = setup(args.out)
    pair = disk_pair(50)
    mesh = gen_disk_mesh(0.01, 0.01 / args.cells_per_radius)
    fixed = solve_case(mesh, pair.supplying, pair.draining, Material())
    fixed.write(out, "fixed")
    asm = fixed.assembler
    rows = [{"alpha": "fixed", "max_u": float(np.abs(fixed.displacement).max()), "rel_l2_vs_fixed": 0.0,
             "max_beta": ""}]
    for a in args.alpha:
        bc = SpringBC(a, args.c)
        res = solve_case(mesh, pair.supplying, pair.draining, Material(), CouplingSettings(contact="spring", spring=bc))
        u = res.displacement
        beta = float(np.max(spring_stiffness(np.linalg.norm(u, axis=1), bc)))
        rows.append({"alpha": a, "max_u": float(np.abs(u).max()),
                     "rel_l2_vs_fixed": relative_l2(asm, u, fixed.displacement), "max_beta": beta})
        res.write(out, f"alpha{a:g}")
    write_rows(out / "contact.csv", rows)


if __name__ == "__main__":
    main()
