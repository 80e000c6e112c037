"""Shared helpers for the experiment scripts."""
import csv
import json
import logging
import time
from pathlib import Path

from poroperf.domain import Disk
from poroperf.synthesis import SynthesisConfig, synthesize_pair


def setup(out):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def disk_pair(n, seed=1, q_perf=800e-9):
    t0 = time.perf_counter()
    res = synthesize_pair(Disk(), config=SynthesisConfig(n_terminals=n, seed=seed, q_perf=q_perf))
    logging.info("synthesized N=%d in %.1f s (converged=%s)", n, time.perf_counter() - t0, res.converged)
    return res


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(Path(path).read_text(), end="")


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
