"""Peak pressure for coarse and fine tree hierarchies at equal total flow.

The mesh edge length follows the terminal radius (r ~ N^(-1/3)).

    python3 scripts/tree_depth.py --n 250 1500
"""
import argparse
import math
import time

from _common import disk_pair, setup, write_rows

from poroperf.fem import Material
from poroperf.mesh import gen_disk_mesh
from poroperf.pipeline import solve_case
from poroperf.vascular import save_tree


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/depth")
    ap.add_argument("--n", type=int, nargs="+", default=[250, 1500])
    ap.add_argument("--cells-per-radius-at-250", type=int, default=68)
    args = ap.parse_args()
    out = setup(args.out)
    rows = []
    for n in args.n:
        t0 = time.perf_counter()
        pair = disk_pair(n)
        t_syn = time.perf_counter() - t0
        save_tree(pair.supplying, out / f"supplying_{n}.json")
        save_tree(pair.draining, out / f"draining_{n}.json")
        k = math.ceil(args.cells_per_radius_at_250 * (n / 250) ** (1 / 3))
        mesh = gen_disk_mesh(0.01, 0.01 / k)
        res = solve_case(mesh, pair.supplying, pair.draining, Material())
        rows.append({"n_terminals": n, "triangles": mesh.n_cells, "max_pressure": res.max_pressure,
                     "synthesis_s": round(t_syn, 1), "converged": pair.converged,
                     "imbalance": res.mass_balance.imbalance})
        res.write(out, f"N{n}")
    write_rows(out / "depth.csv", rows)


if __name__ == "__main__":
    main()
