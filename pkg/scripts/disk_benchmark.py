"""Disk benchmark: 50 terminals per tree, b = 3, fixed outer boundary.

    python3 scripts/disk_benchmark.py --out results/disk
"""
import argparse
import time

from _common import disk_pair, setup, write_json

from poroperf.fem import Material
from poroperf.mesh import gen_disk_mesh
from poroperf.pipeline import CouplingSettings, solve_case
from poroperf.vascular import save_tree


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/disk")
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--cells-per-radius", type=int, default=68, help="mesh has 8 n^2 triangles")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    out = setup(args.out)
    pair = disk_pair(args.n, args.seed)
    save_tree(pair.supplying, out / "supplying.json")
    save_tree(pair.draining, out / "draining.json")
    mesh = gen_disk_mesh(0.01, 0.01 / args.cells_per_radius)
    t0 = time.perf_counter()
    res = solve_case(mesh, pair.supplying, pair.draining, Material(), CouplingSettings(b=3.0))
    summary = {"triangles": mesh.n_cells, "solve_s": time.perf_counter() - t0, **res.summary()}
    res.write(out, "disk")
    write_json(out / "disk_summary.json", summary)
    for k, v in summary.items():
        print(f"{k:>22s}  {v}")


if __name__ == "__main__":
    main()
