"""Experiment configuration: JSON parsing, schema validation and serialization."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass
from importlib import resources

import jsonschema

from .errors import ConfigError, DomainError
from .flees import CLOSURE_MODES, ModelParams
from .asymptotics import FORMULAS
from .spatial import SpatialGrid

#: dimensions log 2 / log q for the contraction denominators q
DEFAULT_ALPHAS = tuple(math.log(2.0) / math.log(q) for q in (4.0, 3.0, 2.5, 2.2, 2.07)) + (1.0,)
DEFAULT_SNAPSHOTS = (0.0, 0.3, 0.6, 1.0)


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class TimeGridSpec:
    dt: float = 1e-4
    n_tau: int = 20_000


@dataclass(frozen=True)
class ReferenceSpec:
    enabled: bool = False
    scheme: str = "euler"
    convolution: str = "direct"
    courant: float = 0.2
    laplacian_order: int = 4


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    generation: int = 5
    time_grid: TimeGridSpec = TimeGridSpec()
    space_grid: SpatialGrid = SpatialGrid()
    snapshots: tuple[float, ...] = DEFAULT_SNAPSHOTS
    closure_mode: str = "strict"
    formulas: str = "consistent"
    reference: ReferenceSpec = ReferenceSpec()
    output: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "snapshots", tuple(float(t) for t in self.snapshots))
        problems = []
        if any(not (0 < a <= 1) for a in self.alphas):
            problems.append("alphas: every value must lie in (0, 1]")
        if any(not (0 <= t <= 1) for t in self.snapshots):
            problems.append("snapshots: every time must lie in [0, 1]")
        if self.closure_mode not in CLOSURE_MODES:
            problems.append(f"closure_mode: must be one of {CLOSURE_MODES}")
        if self.formulas not in FORMULAS:
            problems.append(f"formulas: must be one of {FORMULAS}")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def default(cls, **overrides) -> "ExperimentConfig":
        return cls(params=ModelParams.example(), **overrides)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "params": {
                "epsilon": p.epsilon, "kappa": p.kappa, "a": p.a_const, "b0": p.b0, "xi": p.xi,
                "N": list(p.N), "sigma": list(p.sigma), "x0": list(p.x0),
            },
            "alphas": list(self.alphas),
            "generation": self.generation,
            "time_grid": asdict(self.time_grid),
            "space_grid": {"x_min": self.space_grid.x_min, "x_max": self.space_grid.x_max,
                           "points": int(self.space_grid.points)},
            "snapshots": list(self.snapshots),
            "closure_mode": self.closure_mode,
            "formulas": self.formulas,
            "reference": asdict(self.reference),
            "output": self.output,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical serialization (output directory excluded)."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def serialize(config: ExperimentConfig) -> str:
    # repr-exact floats keep the round trip lossless
    return json.dumps(config.to_dict(), indent=2) + "\n"


def _line_of(raw: str, path) -> int | None:
    pos = 0
    found = False
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(raw, pos)
        if m is None:
            break
        pos, found = m.start(), True
    return raw.count("\n", 0, pos) + 1 if found else None


def _fmt(raw: str, path, message: str) -> str:
    where = ".".join(str(k) for k in path) or "<root>"
    line = _line_of(raw, path)
    return f"line {line}: {where}: {message}" if line else f"{where}: {message}"


def validate_config(raw: str) -> ExperimentConfig:
    """Parse and validate a JSON configuration.

    Every problem is collected before raising :class:`ConfigError`, whose
    ``errors`` list carries one ``line N: path: message`` entry per problem.
    """
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}: invalid JSON: {exc.msg}"]) from None

    validator = jsonschema.Draft202012Validator(load_schema())
    errors = []
    for err in sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path]):
        path = list(err.absolute_path)
        if err.validator == "required":
            missing = re.findall(r"'([^']+)' is a required property", err.message)
            for key in missing:
                errors.append(_fmt(raw, path, f"missing required field '{key}'"))
        elif err.validator == "additionalProperties":
            for key in re.findall(r"'([^']+)'", err.message.split("(")[-1]):
                errors.append(_fmt(raw, path + [key], "unknown key"))
        else:
            errors.append(_fmt(raw, path, err.message))

    if isinstance(data, dict) and isinstance(data.get("params"), dict):
        pr = data["params"]
        lengths = {k: len(pr[k]) for k in ("N", "sigma", "x0") if isinstance(pr.get(k), list)}
        if len(set(lengths.values())) > 1:
            errors.append(_fmt(raw, ["params", "N"], f"N, sigma and x0 differ in length: {lengths}"))
    sg = data.get("space_grid") if isinstance(data, dict) else None
    if isinstance(sg, dict) and isinstance(sg.get("x_min"), (int, float)) and isinstance(sg.get("x_max"), (int, float)):
        if not sg["x_min"] < sg["x_max"]:
            errors.append(_fmt(raw, ["space_grid", "x_max"], "x_max must exceed x_min"))
    if errors:
        raise ConfigError(errors)
    return from_dict(data)


def from_dict(data: dict) -> ExperimentConfig:
    pr = data["params"]
    try:
        params = ModelParams(
            epsilon=pr["epsilon"], kappa=pr["kappa"], a_const=pr["a"], b0=pr["b0"], xi=pr["xi"],
            N=pr["N"], sigma=pr["sigma"], x0=pr["x0"],
        )
    except DomainError as exc:
        raise ConfigError([f"params: {exc}"]) from None
    kw = {"params": params}
    for key in ("alphas", "snapshots"):
        if key in data:
            kw[key] = tuple(data[key])
    for key in ("generation", "closure_mode", "formulas", "output"):
        if key in data:
            kw[key] = data[key]
    if "time_grid" in data:
        kw["time_grid"] = TimeGridSpec(**data["time_grid"])
    if "space_grid" in data:
        kw["space_grid"] = SpatialGrid(**{**asdict_grid(SpatialGrid()), **data["space_grid"]})
    if "reference" in data:
        kw["reference"] = ReferenceSpec(**data["reference"])
    return ExperimentConfig(**kw)


def asdict_grid(g: SpatialGrid) -> dict:
    return {"x_min": g.x_min, "x_max": g.x_max, "points": int(g.points)}


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return validate_config(raw)
