"""Structured run configuration: TOML parsing, serialization, factories.

A config file has up to seven sections (`problem` is required, the rest
optional with defaults):

    [problem]
    dim = 1
    bounds = [0.0, 1.0]
    subdivisions = 64
    q = 1.5
    p = 3.0
    lambda = 5.0
    phi = { family = "power", r = 2.0 }
    weight = { kind = "constant", value = 1.0 }

    [solver]      # tol, max_iters, starts, seed, force
    [estimate]    # starts, max_iters, step, seed
    [ray]         # direction, mode, seed, scale, t_min, t_max, samples
    [continuation]# k_max
    [sweep]       # relative, lambda_min, lambda_max, count
    [output]      # directory

Unknown keys anywhere are an error that lists every offending dotted
path; parse -> serialize -> parse is the identity on the parsed object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from . import domain as dm
from . import nfunction as nf
from .energy import Problem
from .errors import ConfigError

PHI_FAMILIES = ("power", "double_power", "log_type")
WEIGHT_KINDS = ("constant", "preset", "csv")
WEIGHT_PRESETS = ("one_plus_x_squared",)
RAY_DIRECTIONS = ("bump", "sine", "random")


@dataclass(frozen=True)
class PhiSpec:
    family: str
    r: float | None = None
    r1: float | None = None
    r2: float | None = None


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    value: float | None = None
    name: str | None = None
    path: str | None = None


@dataclass(frozen=True)
class ProblemSpec:
    dim: int
    bounds: tuple
    subdivisions: tuple
    q: float
    p: float
    lam: float
    phi: PhiSpec
    weight: WeightSpec


@dataclass(frozen=True)
class SolverSpec:
    tol: float = 1e-8
    max_iters: int = 200
    starts: int = 1
    seed: int = 0
    force: bool = False


@dataclass(frozen=True)
class EstimateSpec:
    starts: int = 4
    max_iters: int = 2000
    step: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class RaySpec:
    direction: str = "bump"
    mode: int = 1
    seed: int = 0
    scale: float = 1.0
    t_min: float = 1e-2
    t_max: float = 1e2
    samples: int = 50


@dataclass(frozen=True)
class ContinuationSpec:
    k_max: int = 6


@dataclass(frozen=True)
class SweepSpec:
    # bounds are fractions of the lambda_star estimate when relative
    relative: bool = True
    lambda_min: float = 0.4
    lambda_max: float = 1.1
    count: int = 12


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    solver: SolverSpec
    estimate: EstimateSpec
    ray: RaySpec
    continuation: ContinuationSpec
    sweep: SweepSpec
    output: OutputSpec


def _collect_unknown(table: dict, allowed, prefix: str, bad: list):
    for key in table:
        if key not in allowed:
            bad.append(f"{prefix}{key}")


def _section(data: dict, name: str, cls, bad: list):
    """Build a defaults-dataclass section from an optional TOML table."""
    table = data.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"section [{name}] must be a table")
    names = [f.name for f in fields(cls)]
    _collect_unknown(table, names, f"{name}.", bad)
    kwargs = {}
    for f in fields(cls):
        if f.name in table:
            kwargs[f.name] = table[f.name]
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"section [{name}]: {exc}") from exc


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key {where}.{key}")
    return table[key]


def _parse_phi(table, bad: list) -> PhiSpec:
    if not isinstance(table, dict):
        raise ConfigError("problem.phi must be an inline table")
    _collect_unknown(table, ("family", "r", "r1", "r2"), "problem.phi.", bad)
    family = _require(table, "family", "problem.phi")
    if family not in PHI_FAMILIES:
        raise ConfigError(
            f"problem.phi.family must be one of {PHI_FAMILIES}, got {family!r}"
        )
    if family == "power":
        return PhiSpec(family=family, r=float(_require(table, "r", "problem.phi")))
    if family == "double_power":
        return PhiSpec(
            family=family,
            r1=float(_require(table, "r1", "problem.phi")),
            r2=float(_require(table, "r2", "problem.phi")),
        )
    return PhiSpec(family=family)


def _parse_weight(table, bad: list) -> WeightSpec:
    if table is None:
        return WeightSpec(kind="constant", value=1.0)
    if not isinstance(table, dict):
        raise ConfigError("problem.weight must be an inline table")
    _collect_unknown(table, ("kind", "value", "name", "path"), "problem.weight.", bad)
    kind = _require(table, "kind", "problem.weight")
    if kind not in WEIGHT_KINDS:
        raise ConfigError(
            f"problem.weight.kind must be one of {WEIGHT_KINDS}, got {kind!r}"
        )
    if kind == "constant":
        return WeightSpec(kind=kind, value=float(_require(table, "value", "problem.weight")))
    if kind == "preset":
        name = _require(table, "name", "problem.weight")
        if name not in WEIGHT_PRESETS:
            raise ConfigError(
                f"problem.weight.name must be one of {WEIGHT_PRESETS}, got {name!r}"
            )
        return WeightSpec(kind=kind, name=name)
    return WeightSpec(kind=kind, path=str(_require(table, "path", "problem.weight")))


def _parse_problem(data: dict, bad: list) -> ProblemSpec:
    if "problem" not in data:
        raise ConfigError("missing required section [problem]")
    table = data["problem"]
    allowed = ("dim", "bounds", "subdivisions", "q", "p", "lambda", "phi", "weight")
    _collect_unknown(table, allowed, "problem.", bad)
    dim = int(_require(table, "dim", "problem"))
    if dim not in (1, 2):
        raise ConfigError(f"problem.dim must be 1 or 2, got {dim}")
    raw_bounds = _require(table, "bounds", "problem")
    raw_subs = _require(table, "subdivisions", "problem")
    if dim == 1:
        if len(raw_bounds) != 2 or any(isinstance(b, list) for b in raw_bounds):
            raise ConfigError("problem.bounds for dim = 1 must be [lo, hi]")
        bounds = (float(raw_bounds[0]), float(raw_bounds[1]))
        subdivisions = (int(raw_subs),) if np.isscalar(raw_subs) else tuple(
            int(s) for s in raw_subs
        )
        if len(subdivisions) != 1:
            raise ConfigError("problem.subdivisions for dim = 1 must be one integer")
    else:
        if len(raw_bounds) != 2 or not all(
            isinstance(b, list) and len(b) == 2 for b in raw_bounds
        ):
            raise ConfigError(
                "problem.bounds for dim = 2 must be [[xlo, xhi], [ylo, yhi]]"
            )
        bounds = tuple((float(b[0]), float(b[1])) for b in raw_bounds)
        if np.isscalar(raw_subs):
            subdivisions = (int(raw_subs), int(raw_subs))
        else:
            subdivisions = tuple(int(s) for s in raw_subs)
        if len(subdivisions) != 2:
            raise ConfigError("problem.subdivisions for dim = 2 must be two integers")
    return ProblemSpec(
        dim=dim,
        bounds=bounds,
        subdivisions=subdivisions,
        q=float(_require(table, "q", "problem")),
        p=float(_require(table, "p", "problem")),
        lam=float(_require(table, "lambda", "problem")),
        phi=_parse_phi(_require(table, "phi", "problem"), bad),
        weight=_parse_weight(table.get("weight"), bad),
    )


TOP_SECTIONS = ("problem", "solver", "estimate", "ray", "continuation", "sweep", "output")


def parse_config_text(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    bad: list[str] = []
    _collect_unknown(data, TOP_SECTIONS, "", bad)
    problem = _parse_problem(data, bad)
    cfg = RunConfig(
        problem=problem,
        solver=_section(data, "solver", SolverSpec, bad),
        estimate=_section(data, "estimate", EstimateSpec, bad),
        ray=_section(data, "ray", RaySpec, bad),
        continuation=_section(data, "continuation", ContinuationSpec, bad),
        sweep=_section(data, "sweep", SweepSpec, bad),
        output=_section(data, "output", OutputSpec, bad),
    )
    if bad:
        raise ConfigError("unknown config keys: " + ", ".join(sorted(bad)))
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def _validate(cfg: RunConfig):
    pr = cfg.problem
    checks = [
        (pr.q > 1.0, "problem.q must exceed 1"),
        (pr.p > pr.q, "problem.p must exceed problem.q"),
        (pr.lam >= 0.0, "problem.lambda must be nonnegative"),
        (cfg.solver.tol > 0.0, "solver.tol must be positive"),
        (cfg.solver.max_iters > 0, "solver.max_iters must be positive"),
        (cfg.solver.starts > 0, "solver.starts must be positive"),
        (cfg.estimate.starts > 0, "estimate.starts must be positive"),
        (cfg.estimate.max_iters > 0, "estimate.max_iters must be positive"),
        (cfg.estimate.step > 0.0, "estimate.step must be positive"),
        (cfg.ray.direction in RAY_DIRECTIONS,
         f"ray.direction must be one of {RAY_DIRECTIONS}"),
        (cfg.ray.mode >= 1, "ray.mode must be a positive mode index"),
        (cfg.ray.scale > 0.0, "ray.scale must be positive"),
        (0.0 < cfg.ray.t_min < cfg.ray.t_max, "ray needs 0 < t_min < t_max"),
        (cfg.ray.samples >= 2, "ray.samples must be at least 2"),
        (cfg.continuation.k_max >= 1, "continuation.k_max must be at least 1"),
        (0.0 < cfg.sweep.lambda_min < cfg.sweep.lambda_max,
         "sweep needs 0 < lambda_min < lambda_max"),
        (cfg.sweep.count >= 2, "sweep.count must be at least 2"),
    ]
    errors = [msg for ok, msg in checks if not ok]
    if errors:
        raise ConfigError("; ".join(errors))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"unserializable config value {value!r}")


def _inline(pairs) -> str:
    body = ", ".join(f"{k} = {_fmt(v)}" for k, v in pairs if v is not None)
    return "{ " + body + " }"


def serialize_config(cfg: RunConfig) -> str:
    """Render a RunConfig as TOML; parsing the result reproduces it."""
    pr = cfg.problem
    lines = ["[problem]"]
    lines.append(f"dim = {pr.dim}")
    if pr.dim == 1:
        lines.append(f"bounds = {_fmt(list(pr.bounds))}")
        lines.append(f"subdivisions = {pr.subdivisions[0]}")
    else:
        lines.append(f"bounds = {_fmt([list(b) for b in pr.bounds])}")
        lines.append(f"subdivisions = {_fmt(list(pr.subdivisions))}")
    lines.append(f"q = {_fmt(pr.q)}")
    lines.append(f"p = {_fmt(pr.p)}")
    lines.append(f"lambda = {_fmt(pr.lam)}")
    lines.append(
        "phi = "
        + _inline([("family", pr.phi.family), ("r", pr.phi.r),
                   ("r1", pr.phi.r1), ("r2", pr.phi.r2)])
    )
    lines.append(
        "weight = "
        + _inline([("kind", pr.weight.kind), ("value", pr.weight.value),
                   ("name", pr.weight.name), ("path", pr.weight.path)])
    )
    for name, spec in (
        ("solver", cfg.solver),
        ("estimate", cfg.estimate),
        ("ray", cfg.ray),
        ("continuation", cfg.continuation),
        ("sweep", cfg.sweep),
        ("output", cfg.output),
    ):
        lines.append("")
        lines.append(f"[{name}]")
        for f in fields(spec):
            lines.append(f"{f.name} = {_fmt(getattr(spec, f.name))}")
    return "\n".join(lines) + "\n"


def build_model(phi: PhiSpec) -> nf.NFunctionModel:
    if phi.family == "power":
        return nf.power(phi.r)
    if phi.family == "double_power":
        return nf.double_power(phi.r1, phi.r2)
    return nf.log_type()


def _preset_weight(mesh: dm.Mesh, name: str) -> dm.Weight:
    if name == "one_plus_x_squared":
        if mesh.dim == 1:
            return dm.weight_from_function(mesh, lambda x: 1.0 + x**2)
        return dm.weight_from_function(mesh, lambda x, y: 1.0 + x**2 + y**2)
    raise ConfigError(f"unknown weight preset {name!r}")


def build_weight(mesh: dm.Mesh, spec: WeightSpec) -> dm.Weight:
    if spec.kind == "constant":
        return dm.weight_constant(mesh, spec.value)
    if spec.kind == "preset":
        return _preset_weight(mesh, spec.name)
    values = dm.read_nodal_csv(spec.path, mesh.n_nodes)
    return dm.weight_from_nodal(mesh, values)


def build_problem(cfg: RunConfig) -> Problem:
    pr = cfg.problem
    subs = pr.subdivisions if pr.dim == 2 else pr.subdivisions[0]
    mesh = dm.build_mesh(pr.dim, pr.bounds, subs)
    model = build_model(pr.phi)
    weight = build_weight(mesh, pr.weight)
    return Problem(
        mesh=mesh, model=model, weight=weight, q=pr.q, p=pr.p, lam=pr.lam
    )
