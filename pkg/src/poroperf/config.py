"""Scenario configuration: flat INI sections with explicit defaults.

Schema (units in brackets)::

    [domain]
    shape = disk              ; disk | ball
    radius = 0.01             ; [m]
    mesh_h = 1.5e-4           ; [m] target edge length of the generated mesh
    mesh_path =               ; optional mesh file, overrides shape meshing
    max_cells = 2000000

    [tree]
    n_terminals = 50          ; terminals per tree
    seed = 0
    q_perf = 8e-7             ; [m^3/s] root flow
    t0_factor = 0.1           ; initial temperature / initial cost
    cooling = 0.95
    proposals_per_terminal = 2
    patience = 3              ; levels without improvement before stopping
    max_levels = 400
    polish_rounds = 5
    clearance = 1.0           ; supplying/draining pairs closer than clearance*(ra+rb) intersect
    b = 3                     ; bell width factor
    s = 3                     ; outlet capture factor
    normalize = true          ; rescale bells to their discrete integral
    supplying_root =          ; "x y [z]" [m]; default -radius on the x axis
    draining_root =           ; default +radius on the x axis

    [material]
    E = 1                     ; [Pa]
    nu = 0.3
    phi0 = 0.5
    k = 3.6e-3                ; [m^2]
    eta = 3.6e-3              ; [Pa s]

    [contact]
    mode = fixed              ; fixed | spring
    alpha = 500               ; [Pa/m]
    c = 15                    ; [1/m]

    [solver]
    atol = 1e-9
    rtol = 1e-8
    max_iter = 50
    linear = auto             ; auto | direct | gmres

    [resection]
    # one plane per key: point ; normal [; keep]
    # keep = -1 (default) keeps (x - point).normal <= 0, keep = 1 the other side
    plane_1 = 0 0 ; 1 0

    [output]
    directory = out
    formats = vtk, csv, json

``POROPERF_OUT`` overrides ``[output] directory``; nothing else is read from
the environment.
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .fem.constitutive import Material, SpringBC
from .fem.linalg import LinearSolverSettings
from .fem.newton import NewtonSettings
from .pipeline import CouplingSettings
from .resection import CutPlane
from .synthesis import AnnealingSchedule, SynthesisConfig

FORMATS = ("vtk", "csv", "json")


@dataclass
class DomainConfig:
    shape: str = "disk"
    radius: float = 0.01
    mesh_h: float = 1.5e-4
    mesh_path: str = ""
    max_cells: int = 2_000_000


@dataclass
class TreeConfig:
    n_terminals: int = 50
    seed: int = 0
    q_perf: float = 8e-7
    t0_factor: float = 0.1
    cooling: float = 0.95
    proposals_per_terminal: int = 2
    patience: int = 3
    max_levels: int = 400
    polish_rounds: int = 5
    clearance: float = 1.0
    b: float = 3.0
    s: float = 3.0
    normalize: bool = True
    supplying_root: str = ""
    draining_root: str = ""


@dataclass
class MaterialConfig:
    E: float = 1.0
    nu: float = 0.3
    phi0: float = 0.5
    k: float = 3.6e-3
    eta: float = 3.6e-3


@dataclass
class ContactConfig:
    mode: str = "fixed"
    alpha: float = 5e2
    c: float = 15.0


@dataclass
class SolverConfig:
    atol: float = 1e-9
    rtol: float = 1e-8
    max_iter: int = 50
    linear: str = "auto"


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: str = "vtk, csv, json"


@dataclass
class ScenarioConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    material: MaterialConfig = field(default_factory=MaterialConfig)
    contact: ContactConfig = field(default_factory=ContactConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    planes: list | None = None          # None: no [resection] section

    # -- derived objects ------------------------------------------------
    @property
    def dim(self) -> int:
        return 2 if self.domain.shape == "disk" else 3

    def perfusion_domain(self):
        from .domain import Disk, Sphere
        if self.domain.shape == "disk":
            return Disk(radius=self.domain.radius)
        return Sphere(radius=self.domain.radius)

    def roots(self):
        r = self.domain.radius
        out = []
        for txt, sign in ((self.tree.supplying_root, -1.0), (self.tree.draining_root, 1.0)):
            if txt.strip():
                out.append(tuple(float(v) for v in txt.split()))
            else:
                out.append((sign * r,) + (0.0,) * (self.dim - 1))
        return tuple(out)

    def synthesis(self) -> SynthesisConfig:
        t = self.tree
        return SynthesisConfig(
            n_terminals=t.n_terminals, seed=t.seed, q_perf=t.q_perf, clearance=t.clearance,
            polish_rounds=t.polish_rounds,
            schedule=AnnealingSchedule(t0_factor=t.t0_factor, cooling=t.cooling,
                                       proposals_per_terminal=t.proposals_per_terminal,
                                       patience=t.patience, max_levels=t.max_levels))

    def material_obj(self) -> Material:
        m = self.material
        return Material(E=m.E, nu=m.nu, phi0=m.phi0, k=m.k, eta=m.eta)

    def coupling(self) -> CouplingSettings:
        return CouplingSettings(b=self.tree.b, s=self.tree.s, normalize=self.tree.normalize,
                                contact=self.contact.mode, spring=SpringBC(self.contact.alpha, self.contact.c))

    def newton(self) -> NewtonSettings:
        s = self.solver
        return NewtonSettings(atol=s.atol, rtol=s.rtol, max_iter=s.max_iter,
                              linear=LinearSolverSettings(method=s.linear))

    def mesh(self):
        from .mesh import gen_ball_mesh, gen_disk_mesh, read_mesh
        d = self.domain
        if d.mesh_path:
            return read_mesh(d.mesh_path)
        gen = gen_disk_mesh if d.shape == "disk" else gen_ball_mesh
        return gen(radius=d.radius, h=d.mesh_h, max_cells=d.max_cells)

    @property
    def formats(self) -> set:
        return {f.strip() for f in self.output.formats.split(",") if f.strip()}

    # -- serialization --------------------------------------------------
    def to_ini(self) -> str:
        """Resolved configuration with every default written out."""
        lines = []
        for name in ("domain", "tree", "material", "contact", "solver", "output"):
            lines.append(f"[{name}]")
            for k, v in asdict(getattr(self, name)).items():
                lines.append(f"{k} = {_fmt(v)}")
            lines.append("")
        if self.planes is not None:
            lines.append("[resection]")
            for i, p in enumerate(self.planes, 1):
                lines.append(f"plane_{i} = {' '.join(map(repr, p.point))} ; {' '.join(map(repr, p.normal))}")
            lines.append("")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(section, name, raw, typ):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {name}: cannot read {raw!r} as {typ.__name__}") from None


_TYPES = {"float": float, "int": int, "bool": bool, "str": str}


def _section(cp, name, cls):
    obj = cls()
    if not cp.has_section(name):
        return obj
    known = {f.name: _TYPES[f.type] if isinstance(f.type, str) else f.type for f in fields(cls)}
    for key, raw in cp.items(name):
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        setattr(obj, key, _coerce(name, key, raw, known[key]))
    return obj


def parse_plane(text: str, dim: int) -> CutPlane:
    parts = [p.strip() for p in text.split(";")]
    if len(parts) not in (2, 3):
        raise ConfigError(f"cut plane {text!r}: expected 'point ; normal [; keep]'")
    try:
        point = [float(v) for v in parts[0].split()]
        normal = [float(v) for v in parts[1].split()]
        keep = int(parts[2]) if len(parts) == 3 else -1
    except ValueError:
        raise ConfigError(f"cut plane {text!r}: non-numeric entry") from None
    if len(point) != dim or len(normal) != dim:
        raise ConfigError(f"cut plane {text!r}: expected {dim} coordinates")
    if keep not in (-1, 1):
        raise ConfigError(f"cut plane {text!r}: keep must be -1 or 1")
    if not math.hypot(*normal) > 0:
        raise ConfigError(f"cut plane {text!r}: zero normal")
    # removed side is (x - p).n > 0; keep=+1 flips the normal
    return CutPlane.through(point, [-keep * v for v in normal])


def validate(cfg: ScenarioConfig) -> None:
    d, t = cfg.domain, cfg.tree
    checks = [
        (d.shape in ("disk", "ball"), "[domain] shape must be disk or ball"),
        (d.radius > 0, "[domain] radius must be positive"),
        (d.mesh_path or 0 < d.mesh_h < d.radius, "[domain] need 0 < mesh_h < radius"),
        (not d.mesh_path or Path(d.mesh_path).is_file(), f"[domain] mesh_path {d.mesh_path!r} does not exist"),
        (t.n_terminals >= 1, "[tree] n_terminals must be at least 1"),
        (t.q_perf > 0, "[tree] q_perf must be positive"),
        (0 < t.cooling < 1, "[tree] cooling must lie in (0, 1)"),
        (t.t0_factor >= 0, "[tree] t0_factor must be non-negative"),
        (t.proposals_per_terminal >= 1 and t.patience >= 1 and t.max_levels >= 1,
         "[tree] proposals_per_terminal, patience and max_levels must be positive"),
        (t.b > 0 and t.s > 0, "[tree] b and s must be positive"),
        (t.clearance >= 0, "[tree] clearance must be non-negative"),
        (cfg.contact.mode in ("fixed", "spring"), "[contact] mode must be fixed or spring"),
        (cfg.solver.linear in ("auto", "direct", "gmres"), "[solver] linear must be auto, direct or gmres"),
        (cfg.solver.max_iter >= 1, "[solver] max_iter must be positive"),
        (cfg.formats <= set(FORMATS), f"[output] formats must be a subset of {FORMATS}"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    for txt in (t.supplying_root, t.draining_root):
        if txt.strip() and len(txt.split()) != cfg.dim:
            raise ConfigError(f"[tree] root {txt!r} needs {cfg.dim} coordinates")
    try:
        cfg.material_obj()
        cfg.coupling()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def loads_config(text: str, seed: int | None = None, out: str | None = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    # plane entries use ';' as a separator, so read them raw first
    try:
        cp.read_string(text)
        raw = configparser.ConfigParser(interpolation=None)
        raw.optionxform = str
        raw.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    allowed = {"domain", "tree", "material", "contact", "solver", "output", "resection"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown section(s): {sorted(extra)}")
    cfg = ScenarioConfig(
        domain=_section(cp, "domain", DomainConfig), tree=_section(cp, "tree", TreeConfig),
        material=_section(cp, "material", MaterialConfig), contact=_section(cp, "contact", ContactConfig),
        solver=_section(cp, "solver", SolverConfig), output=_section(cp, "output", OutputConfig))
    if seed is not None:
        cfg.tree.seed = int(seed)
    env = os.environ.get("POROPERF_OUT")
    if out is not None:
        cfg.output.directory = out
    elif env:
        cfg.output.directory = env
    validate(cfg)
    if raw.has_section("resection"):
        cfg.planes = []
        for key, val in sorted(raw.items("resection"), key=lambda kv: _plane_order(kv[0])):
            if not key.startswith("plane"):
                raise ConfigError(f"[resection] unknown key {key!r}")
            txt = val.split("#")[0]
            cfg.planes.append(parse_plane(txt, cfg.dim))
    return cfg


def _plane_order(key):
    tail = key.split("_")[-1]
    return (int(tail) if tail.isdigit() else math.inf, key)


def load_config(path, seed: int | None = None, out: str | None = None) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} not found")
    return loads_config(p.read_text(), seed=seed, out=out)
