"""Scene configuration: a single JSON document, schema-checked, built into dataclasses."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .cbfm import CbfGenerationConfig
from .emcore import Medium, quadrature_rule
from .errors import ConfigError, DualCbfError
from .postprocess import SOLVERS, SweepSpec

_NUM = {"type": "number"}
_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_UNIT_OPEN = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_POL = {"enum": ["theta", "phi"]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mesh"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "mesh": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["file"],
                    "properties": {"file": {"type": "string"}, "format": {"enum": ["obj", "json"]}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["generator"],
                    "properties": {
                        "generator": {"enum": ["sphere", "cube", "cylinder", "array"]},
                        "params": {"type": "object"},
                    },
                },
            ]
        },
        "medium": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"eps_r": _COMPLEX, "mu_r": _COMPLEX},
        },
        "partition": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["cube", "component"]},
                "side": _POS,
                "origin": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
            },
        },
        "cbf": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generator": {"enum": ["primary", "ipcbf-gmres", "ipcbf-jacobi"]},
                "theta_start": _NUM,
                "theta_step": _NUM,
                "n_theta": _POS_INT,
                "phi_start": _NUM,
                "phi_step": _NUM,
                "n_phi": _POS_INT,
                "pols": {"type": "array", "items": _POL, "minItems": 1, "uniqueItems": True},
                "delta_r": _UNIT_OPEN,
                "delta_svd": _UNIT_OPEN,
                "group_l": _POS_INT,
                "jacobi_p": _POS_INT,
                "max_iter": _POS_INT,
            },
            "not": {"required": ["delta_svd", "group_l"]},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"enum": list(SOLVERS)},
                "tol": _UNIT_OPEN,
                "max_iter": _POS_INT,
                "restart": {"oneOf": [_POS_INT, {"type": "null"}]},
                "inner_tol": _UNIT_OPEN,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theta_start": _NUM,
                "theta_step": _NUM,
                "n_theta": _POS_INT,
                "phi": _NUM,
                "pol": _POL,
            },
        },
        "rcs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "solvers": {"type": "array", "items": {"enum": list(SOLVERS)}, "minItems": 1, "uniqueItems": True},
                "reference": {"enum": list(SOLVERS)},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"points": {"enum": [1, 3, 6, 12]}, "near_factor": _POS},
        },
        "mie": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"diameter": _POS, "eps_r": _COMPLEX, "mu_r": _COMPLEX},
        },
        "output": {"type": "string"},
    },
}


@dataclass(frozen=True)
class SolverConfig:
    name: str = "cbfm-cmp"
    tol: float = 1e-4
    max_iter: int = 1000
    restart: int | None = None
    inner_tol: float = 1e-5


@dataclass(frozen=True)
class SceneConfig:
    name: str
    mesh: dict
    medium: Medium
    partition: dict
    cbf: CbfGenerationConfig
    solver: SolverConfig
    sweep: SweepSpec
    rcs_solvers: tuple[str, ...]
    rcs_reference: str
    quad_points: int = 6
    near_factor: float = 3.0
    mie: dict = field(default_factory=dict)
    output: str | None = None
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict, compare=False)


def _complex(val, default=1.0) -> complex:
    if val is None:
        return default
    if isinstance(val, list):
        return complex(val[0], val[1])
    return val


def _field_name(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        return f"{path}.{missing}" if path else missing
    if err.validator == "additionalProperties" and "'" in err.message:
        extra = err.message.split("'")[1]
        return f"{path}.{extra}" if path else extra
    if err.validator == "not" and path == "cbf":
        return "cbf.delta_svd"
    return path or "<root>"


def parse_config(doc: dict, base_dir=".") -> SceneConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), str(e.absolute_path)))
    if errors:
        err = max(errors, key=lambda e: len(list(e.absolute_path)))
        name = _field_name(err)
        raise ConfigError(f"invalid config field '{name}': {err.message}", field=name)
    base_dir = Path(base_dir)
    try:
        med = doc.get("medium", {})
        medium = Medium(_complex(med.get("eps_r")), _complex(med.get("mu_r")))
    except DualCbfError as exc:
        raise ConfigError(str(exc), field="medium") from None
    cb = dict(doc.get("cbf", {}))
    if "group_l" in cb:
        cb["delta_svd"] = None
    if "pols" in cb:
        cb["pols"] = tuple(cb["pols"])
    try:
        cbf = CbfGenerationConfig(**cb)
    except DualCbfError as exc:
        raise ConfigError(str(exc), field="cbf") from None
    solver = SolverConfig(**doc.get("solver", {}))
    sweep = SweepSpec(**doc.get("sweep", {}))
    rcs = doc.get("rcs", {})
    solvers = tuple(rcs.get("solvers", ("mom-baseline", solver.name)))
    reference = rcs.get("reference", "mom-baseline")
    quad = doc.get("quadrature", {})
    mesh = dict(doc["mesh"])
    if "file" in mesh:
        path = Path(mesh["file"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"mesh file {path} does not exist", field="mesh.file")
        mesh["file"] = str(path)
    return SceneConfig(
        name=doc.get("name", "scene"),
        mesh=mesh,
        medium=medium,
        partition=dict(doc.get("partition", {"mode": "component"})),
        cbf=cbf,
        solver=solver,
        sweep=sweep,
        rcs_solvers=solvers,
        rcs_reference=reference,
        quad_points=int(quad.get("points", 6)),
        near_factor=float(quad.get("near_factor", 3.0)),
        mie=dict(doc.get("mie", {})),
        output=doc.get("output"),
        base_dir=base_dir,
        raw=doc,
    )


def load_config(path) -> SceneConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", field="<file>") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", field="<file>") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", field="<root>")
    return parse_config(doc, path.parent)


def build_mesh(cfg: SceneConfig):
    from .mesh import generate_geometry, load_mesh

    if "file" in cfg.mesh:
        return load_mesh(cfg.mesh["file"], cfg.mesh.get("format"))
    return generate_geometry(cfg.mesh["generator"], **cfg.mesh.get("params", {}))


def build_scene(cfg: SceneConfig, mesh=None):
    from .scene import Scene

    mesh = mesh if mesh is not None else build_mesh(cfg)
    return Scene(
        mesh,
        cfg.medium,
        partition_spec=cfg.partition,
        quad=quadrature_rule(cfg.quad_points),
        near_factor=cfg.near_factor,
    )
