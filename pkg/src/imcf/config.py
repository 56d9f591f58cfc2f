"""Run configuration: JSON schema, defaults and conversion to solver objects."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import jsonschema

from .errors import ConfigError, GridTooCoarse, InadmissibleData
from .flow import SCHEMES, TimeStepPolicy
from .geometry import GraphFunction
from .initial_data import cap, perturbed_cap

OUTPUT_DIR_ENV = "IMCF_OUTPUT_DIR"
FORMATS = ("jsonl", "csv", "png")
DEFAULT_MODE = {1: "interval", 2: "axisymmetric"}

_POLICY_KEYS = {f.name for f in fields(TimeStepPolicy)} - {"record_every", "record_times"}

_NUMBER = {"type": "number"}

RUN_SCHEMA = {
    "type": "object",
    "required": ["n", "m", "initial"],
    "additionalProperties": False,
    "properties": {
        "n": {"enum": [1, 2]},
        "mode": {"enum": ["interval", "axisymmetric", "polar2d"]},
        "m": {"type": "integer"},
        "initial": {
            "type": "object",
            "required": ["kind", "lambda0"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["cap", "perturbed_cap"]},
                "lambda0": {"type": "number", "exclusiveMinimum": 1},
                "amplitude": _NUMBER,
            },
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cfl": _NUMBER,
                "dt_max": _NUMBER,
                "eps_H": _NUMBER,
                "eps_flat": _NUMBER,
                "t_max": _NUMBER,
                "du_max": _NUMBER,
                "scheme": {"enum": list(SCHEMES)},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "record_every": {"type": "integer", "minimum": 1},
                "record_times": {"type": "array", "items": _NUMBER},
                "formats": {"type": "array", "items": {"enum": list(FORMATS)}, "uniqueItems": True},
            },
        },
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "required": ["base"],
    "additionalProperties": False,
    "properties": {
        "base": {"type": "object"},
        "lambda0": {"type": "array", "items": _NUMBER, "minItems": 1},
        "amplitude": {"type": "array", "items": _NUMBER, "minItems": 1},
        "m": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "directory": {"type": "string"},
    },
}


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    lambda0: float
    amplitude: float = 0.0


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "imcf-run"
    record_every: int = 20
    record_times: tuple[float, ...] = ()
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class RunConfig:
    n: int
    mode: str
    m: int
    initial: InitialSpec
    policy: TimeStepPolicy
    outputs: OutputSpec = field(default_factory=OutputSpec)

    def as_dict(self) -> dict:
        pol = asdict(self.policy)
        pol.pop("record_every")
        pol.pop("record_times")
        out = asdict(self.outputs)
        out["record_times"] = list(out["record_times"])
        out["formats"] = list(out["formats"])
        return {"n": self.n, "mode": self.mode, "m": self.m, "initial": asdict(self.initial),
                "policy": pol, "outputs": out}

    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.outputs.directory)

    def initial_graph(self) -> GraphFunction:
        """Build the initial data; generator and grid failures surface as :class:`ConfigError`."""
        ini = self.initial
        try:
            if ini.kind == "cap":
                return cap(ini.lambda0, self.m, self.mode)
            return perturbed_cap(ini.lambda0, ini.amplitude, self.m, self.mode)
        except (GridTooCoarse, InadmissibleData) as exc:
            raise ConfigError(f"initial data: {exc}") from exc


def _validate(data, schema, what: str):
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{what} at {where}: {exc.message}") from None


def parse_run_config(data: dict) -> RunConfig:
    _validate(data, RUN_SCHEMA, "run config")
    n = data["n"]
    mode = data.get("mode", DEFAULT_MODE[n])
    if mode == "polar2d":
        raise ConfigError("polar2d supports static geometry only; runs need interval or axisymmetric")
    if DEFAULT_MODE[n] != mode:
        raise ConfigError(f"mode {mode!r} does not describe a graph over the {n}-disk")
    if data["m"] < 5:
        raise ConfigError(f"grid too coarse: m = {data['m']} < 5")
    ini = data["initial"]
    initial = InitialSpec(ini["kind"], float(ini["lambda0"]), float(ini.get("amplitude", 0.0)))
    outputs = OutputSpec(**{k: tuple(v) if isinstance(v, list) else v
                            for k, v in data.get("outputs", {}).items()})
    pol = {k: v for k, v in data.get("policy", {}).items() if k in _POLICY_KEYS}
    try:
        policy = TimeStepPolicy(**pol, record_every=outputs.record_every,
                                record_times=outputs.record_times)
    except ValueError as exc:
        raise ConfigError(f"policy: {exc}") from None
    return RunConfig(n=n, mode=mode, m=data["m"], initial=initial, policy=policy, outputs=outputs)


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def load_run_config(path) -> RunConfig:
    return parse_run_config(load_json(path))


@dataclass(frozen=True)
class SweepConfig:
    base: dict
    lambda0: tuple[float, ...]
    amplitude: tuple[float, ...]
    m: tuple[int, ...]
    directory: str

    def entries(self):
        """Cartesian product in a fixed order, yielding ``(label, RunConfig)``."""
        for lam in self.lambda0:
            for a in self.amplitude:
                for m in self.m:
                    data = json.loads(json.dumps(self.base))
                    data["m"] = m
                    data["initial"] = {"kind": "perturbed_cap" if a else "cap", "lambda0": lam,
                                       "amplitude": a}
                    label = f"lam{lam:g}_a{a:g}_m{m}"
                    outputs = data.setdefault("outputs", {})
                    outputs["directory"] = str(Path(self.output_dir()) / label)
                    yield label, parse_run_config(data)

    def output_dir(self) -> str:
        return os.environ.get(OUTPUT_DIR_ENV) or self.directory


def load_sweep_config(path) -> SweepConfig:
    data = load_json(path)
    _validate(data, SWEEP_SCHEMA, "sweep config")
    base = data["base"]
    ini = base.get("initial", {})
    return SweepConfig(
        base=base,
        lambda0=tuple(data.get("lambda0", [ini.get("lambda0", 2.0)])),
        amplitude=tuple(data.get("amplitude", [ini.get("amplitude", 0.0)])),
        m=tuple(data.get("m", [base.get("m", 201)])),
        directory=data.get("directory", "imcf-sweep"),
    )
