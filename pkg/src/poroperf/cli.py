"""Command-line runner: ``poroperf {synth,solve,resect,report}``.

Exit codes: 0 success, 2 config error, 3 synthesis error, 4 solver error,
5 resection error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import __version__
from . import vascular as vm
from .config import ScenarioConfig, load_config
from .errors import (BindingError, ConfigError, InadmissibleStateError, MeshParseError, MeshResourceError,
                     NonlinearSolverError, PoroperfError, ResectionError, SolverError, SourcePlacementError)
from .pipeline import solve_case
from .synthesis import synthesize_pair, write_synthesis_log

log = logging.getLogger("poroperf")

EXIT_OK, EXIT_CONFIG, EXIT_SYNTH, EXIT_SOLVER, EXIT_RESECT = 0, 2, 3, 4, 5

_SOLVER_ERRORS = (SolverError, NonlinearSolverError, InadmissibleStateError, BindingError,
                  SourcePlacementError, MeshResourceError, MeshParseError)


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage, self.exc = stage, exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, cfg: ScenarioConfig, threads: int, files, extra=None):
    (out / "config_resolved.ini").write_text(cfg.to_ini())
    data = {
        "command": command,
        "version": __version__,
        "threads": threads,
        "config": cfg.to_ini(),
        "files": {str(f.relative_to(out)): _sha256(f) for f in sorted(files)},
    }
    if extra:
        data.update(extra)
    with open(out / "manifest.json", "w", newline="\n") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def run_synth(cfg: ScenarioConfig, out: Path):
    """Synthesize both trees and write them with the annealing log."""
    try:
        res = synthesize_pair(cfg.perfusion_domain(), cfg.roots(), cfg.synthesis())
    except PoroperfError as exc:
        raise StageError("synth", exc) from exc
    files = [out / "supplying.json", out / "draining.json", out / "synthesis_log.csv",
             out / "supplying_segments.csv", out / "draining_segments.csv"]
    vm.save_tree(res.supplying, files[0])
    vm.save_tree(res.draining, files[1])
    write_synthesis_log(res.log, files[2])
    vm.write_segment_csv(res.supplying, files[3])
    vm.write_segment_csv(res.draining, files[4])
    info = {"converged": res.converged, "intersections": res.intersections,
            "cost_supplying": vm.tree_cost(res.supplying), "cost_draining": vm.tree_cost(res.draining),
            "fan_costs": list(res.fan_costs)}
    return res.supplying, res.draining, files, info


def _trees(cfg, out, trees_dir):
    if trees_dir:
        d = Path(trees_dir)
        try:
            sup, dra = vm.load_tree(d / "supplying.json"), vm.load_tree(d / "draining.json")
        except (OSError, ValueError, PoroperfError) as exc:
            raise ConfigError(f"cannot load trees from {d}: {exc}") from exc
        return sup, dra, [], {"trees_from": str(d)}
    return run_synth(cfg, out)


def _write_summary(path: Path, summary: dict):
    with open(path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _case_files(result, out, stem, formats):
    files = []
    if "vtk" in formats or "csv" in formats or "json" in formats:
        result.write(out, stem)
        files += [out / f"{stem}.vtk", out / f"{stem}_mass_balance.csv", out / f"{stem}_newton.csv",
                  out / f"{stem}_coupling.json"]
    _write_summary(out / f"{stem}_summary.json", result.summary())
    files.append(out / f"{stem}_summary.json")
    return files


def run_solve(cfg: ScenarioConfig, out: Path, trees_dir=None):
    sup, dra, files, info = _trees(cfg, out, trees_dir)
    try:
        mesh = cfg.mesh()
        res = solve_case(mesh, sup, dra, cfg.material_obj(), cfg.coupling(), cfg.newton())
    except _SOLVER_ERRORS as exc:
        raise StageError("solve", exc) from exc
    files += _case_files(res, out, "fields", cfg.formats)
    info["summary"] = res.summary()
    return files, info


def run_resect(cfg: ScenarioConfig, out: Path, trees_dir=None):
    from .resection import ResectionScenario, run_resection_case
    if not cfg.planes:
        raise ConfigError("resect needs a [resection] section with at least one plane")
    sup, dra, files, info = _trees(cfg, out, trees_dir)
    try:
        mesh = cfg.mesh()
        sc = ResectionScenario(mesh, sup, dra, cfg.material_obj(), cfg.planes, cfg.coupling(), cfg.newton())
        res = run_resection_case(sc)
    except ResectionError as exc:
        raise StageError("resect", exc) from exc
    except _SOLVER_ERRORS as exc:
        raise StageError("solve", exc) from exc
    files += _case_files(res.pre, out, "pre", cfg.formats)
    files += _case_files(res.post, out, "post", cfg.formats)
    rows = res.comparison()
    path = out / "resection_comparison.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["quantity", "pre", "post"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    files.append(path)
    orphans = {"supplying": res.supplying.orphans, "draining": res.draining.orphans}
    path = out / "orphans.json"
    path.write_text(json.dumps(orphans, indent=1) + "\n")
    files.append(path)
    info["orphans"] = {k: len(v) for k, v in orphans.items()}
    return files, info


# -- report -------------------------------------------------------------

def collect_run(run_dir) -> tuple[dict, list[str]]:
    """Flatten every ``*_summary.json`` of a run directory into one dict."""
    d = Path(run_dir)
    out, missing = {}, []
    if not d.is_dir():
        return out, [f"{d}: not a directory"]
    summaries = sorted(d.glob("*_summary.json"))
    if not summaries:
        missing.append(f"{d}: no *_summary.json files")
    for p in summaries:
        stem = p.name[: -len("_summary.json")]
        try:
            data = json.loads(p.read_text())
        except (OSError, ValueError) as exc:
            missing.append(f"{p}: unreadable ({exc})")
            continue
        for k, v in data.items():
            out[f"{stem}.{k}"] = v
        if not (d / f"{stem}_newton.csv").is_file():
            missing.append(f"{d / (stem + '_newton.csv')}: missing")
        if not (d / f"{stem}_mass_balance.csv").is_file():
            missing.append(f"{d / (stem + '_mass_balance.csv')}: missing")
    man = d / "manifest.json"
    if man.is_file():
        try:
            m = json.loads(man.read_text())
            out["manifest.command"] = m.get("command")
        except ValueError:
            missing.append(f"{man}: unreadable")
    else:
        missing.append(f"{man}: missing")
    return out, missing


def _cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return "-" if v is None else str(v)


def format_report(runs: list[dict], names: list[str]) -> str:
    keys = sorted(set().union(*runs)) if runs else []
    if not keys:
        return "(empty summary)\n"
    rows = [["quantity", *names]] + [[k, *(_cell(r.get(k)) for r in runs)] for k in keys]
    if len(runs) == 2:
        rows[0].append("diff")
        for row, k in zip(rows[1:], keys):
            a, b = runs[0].get(k), runs[1].get(k)
            ok = all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (a, b))
            row.append(_cell(float(b) - float(a)) if ok else "")
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in rows)


def cmd_report(dirs) -> tuple[str, list[str]]:
    runs, warnings = [], []
    for d in dirs:
        data, miss = collect_run(d)
        runs.append(data)
        warnings += miss
    return format_report(runs, [str(d) for d in dirs]), warnings


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poroperf", description="Vascular trees coupled to a poroelastic continuum.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("synth", "synthesize supplying and draining trees"),
                      ("solve", "solve the coupled perfusion problem"),
                      ("resect", "solve before and after a planar resection")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=True, help="scenario INI file")
        s.add_argument("--seed", type=int, default=None, help="override [tree] seed")
        s.add_argument("--out", default=None, help="output directory (overrides config and POROPERF_OUT)")
        s.add_argument("--threads", type=int, default=1, help="recorded in the manifest; runs are serial")
        if name != "synth":
            s.add_argument("--trees", default=None, help="directory holding supplying.json/draining.json")
    r = sub.add_parser("report", help="summarize one run directory or compare two")
    r.add_argument("runs", nargs="+", help="run directories")
    r.add_argument("--out", default=None, help="also write the summary to this file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "report":
        text, warnings = cmd_report(args.runs)
        for w in warnings:
            log.warning(w)
        sys.stdout.write(text)
        if args.out:
            Path(args.out).write_text(text)
        return EXIT_OK
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        if args.command == "resect" and not cfg.planes:
            raise ConfigError("resect needs a [resection] section with at least one plane")
        out = Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        if args.command == "synth":
            _, _, files, info = run_synth(cfg, out)
        elif args.command == "solve":
            files, info = run_solve(cfg, out, args.trees)
        else:
            files, info = run_resect(cfg, out, args.trees)
        info["wall_time_s"] = round(time.perf_counter() - t0, 3)
        write_manifest(out, args.command, cfg, args.threads, files, {"results": _jsonable(info)})
    except ConfigError as exc:
        log.error("config: %s", exc)
        return EXIT_CONFIG
    except StageError as exc:
        log.error("%s failed: %s", exc.stage, exc.exc)
        if isinstance(exc.exc, ResectionError):
            return EXIT_RESECT
        return {"synth": EXIT_SYNTH, "solve": EXIT_SOLVER, "resect": EXIT_RESECT}[exc.stage]
    log.info("%s finished in %.1f s; outputs in %s", args.command, info["wall_time_s"], out)
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "item"):
        return obj.item()
    return obj


if __name__ == "__main__":
    sys.exit(main())
