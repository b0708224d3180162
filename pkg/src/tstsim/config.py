"""JSON configuration: schema checks, model construction and run settings."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import SchemaError, ValidationError
from .model import (
    CompetitionFamily,
    DemographicModel,
    RateFamily,
    TraitFamilies,
    TraitRecord,
)

SCHEMA_VERSION = 1
ENV_PREFIX = "TSTSIM_"
COMMANDS = (
    "check",
    "simulate-ode",
    "limit-profile",
    "verify-convergence",
    "simulate-tst",
    "simulate-two-scale",
    "stability",
)
STOCHASTIC = ("simulate-tst", "simulate-two-scale")

SECTIONS = {"schema_version", "traits", "rates", "kernels", "scales", "space", "run"}
TRAIT_FIELDS = {"id", "value", "parent_id", "birth_event"}
TABULAR_RATES = {"b", "d", "mu"}
FAMILY_RATES = {"birth", "death", "mutation"}
FAMILY_FIELDS = {"const", "linear", "quadratic"}
TABULAR_KERNELS = {"alpha", "m"}
FAMILY_KERNELS = {"competition", "mutation_sd"}
COMPETITION_FIELDS = {"scale", "kernel", "width"}
SCALE_FIELDS = {"epsilon", "sigma", "rho"}
SPACE_FIELDS = {"lower", "upper"}
RUN_FIELDS = {"command", "seed", "eps", "eta", "t_end", "tol", "replicas", "migration_mode", "output_dir"}


@dataclass(frozen=True)
class RunConfig:
    command: str = "check"
    output_dir: str = "out"
    seed: int | None = None
    eps: tuple[float, ...] = ()
    eta: float | None = None
    t_end: float | None = None
    tol: float = 1e-9
    replicas: int = 1
    migration_mode: str | None = None
    model_path: str | None = None
    config_sha256: str | None = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ValidationError(f"run.command: {self.command!r} is not one of {COMMANDS}")
        if self.command in STOCHASTIC and self.seed is None:
            raise ValidationError(f"run.seed: required for {self.command}")
        if self.tol <= 0:
            raise ValidationError("run.tol: must be > 0")
        if self.replicas < 1:
            raise ValidationError("run.replicas: must be >= 1")
        if any(not 0 < e < 1 for e in self.eps):
            raise ValidationError("run.eps: values must lie in (0, 1)")
        if self.t_end is not None and self.t_end < 0:
            raise ValidationError("run.t_end: must be >= 0")
        return self


def _unknown(section: str, got: dict, allowed: set) -> None:
    extra = sorted(set(got) - allowed)
    if extra:
        raise SchemaError(f"{section}: unknown field {extra[0]!r}")


def _require(obj, path: str, kind):
    if not isinstance(obj, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(f"{path}: expected {names}")
    return obj


def _numbers(obj, path: str) -> list[float]:
    _require(obj, path, list)
    for i, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{path}[{i}]: expected a number")
    return [float(v) for v in obj]


def _matrix(obj, path: str) -> np.ndarray:
    _require(obj, path, list)
    return np.array([_numbers(row, f"{path}[{i}]") for i, row in enumerate(obj)])


def _number(obj, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise SchemaError(f"{path}: expected a number")
    return float(obj)


def _family(obj, path: str) -> RateFamily:
    _require(obj, path, dict)
    _unknown(path, obj, FAMILY_FIELDS)
    if "const" not in obj:
        raise SchemaError(f"{path}.const: missing")
    return RateFamily(
        _number(obj["const"], f"{path}.const"),
        tuple(_numbers(obj.get("linear", []), f"{path}.linear")),
        tuple(_numbers(obj.get("quadratic", []), f"{path}.quadratic")),
    )


def _traits(doc) -> list[TraitRecord]:
    out = []
    for i, t in enumerate(_require(doc, "traits", list)):
        path = f"traits[{i}]"
        _require(t, path, dict)
        _unknown(path, t, TRAIT_FIELDS)
        if "value" not in t:
            raise SchemaError(f"{path}.value: missing")
        value = t["value"] if isinstance(t["value"], list) else [t["value"]]
        try:
            out.append(TraitRecord(
                int(t.get("id", i)), tuple(_numbers(value, f"{path}.value")),
                t.get("parent_id"), int(t.get("birth_event", 0)),
            ))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    if not out:
        raise ValidationError("traits: at least one trait is required")
    return out


def _model(doc: dict) -> DemographicModel:
    traits = _traits(doc.get("traits"))
    rates = _require(doc.get("rates"), "rates", dict)
    kernels = _require(doc.get("kernels", {}), "kernels", dict)
    scales = _require(doc.get("scales", {}), "scales", dict)
    space = _require(doc.get("space", {}), "space", dict)
    _unknown("scales", scales, SCALE_FIELDS)
    _unknown("space", space, SPACE_FIELDS)
    scale_kw = {k: _number(v, f"scales.{k}") for k, v in scales.items()}
    bounds = {}
    if space:
        if set(space) != SPACE_FIELDS:
            raise SchemaError("space: both lower and upper are required")
        bounds = {k: tuple(_numbers(space[k], f"space.{k}")) for k in ("lower", "upper")}

    if set(rates) & TABULAR_RATES:
        _unknown("rates", rates, TABULAR_RATES)
        _unknown("kernels", kernels, TABULAR_KERNELS)
        for k in ("b", "d"):
            if k not in rates:
                raise SchemaError(f"rates.{k}: missing")
        if "alpha" not in kernels:
            raise SchemaError("kernels.alpha: missing")
        n = len(traits)
        arrays = {k: np.array(_numbers(rates[k], f"rates.{k}")) for k in rates}
        alpha = _matrix(kernels["alpha"], "kernels.alpha")
        m = _matrix(kernels["m"], "kernels.m") if "m" in kernels else None
        mu = arrays.get("mu", np.zeros(n))
        return DemographicModel(tuple(traits), arrays["b"], arrays["d"], alpha, mu, m=m, **scale_kw, **bounds)

    _unknown("rates", rates, FAMILY_RATES)
    _unknown("kernels", kernels, FAMILY_KERNELS)
    for k in ("birth", "death"):
        if k not in rates:
            raise SchemaError(f"rates.{k}: missing")
    comp = _require(kernels.get("competition"), "kernels.competition", dict)
    _unknown("kernels.competition", comp, COMPETITION_FIELDS)
    if "scale" not in comp:
        raise SchemaError("kernels.competition.scale: missing")
    if not bounds:
        raise ValidationError("space: parametric models need lower and upper bounds")
    families = TraitFamilies(
        birth=_family(rates["birth"], "rates.birth"),
        death=_family(rates["death"], "rates.death"),
        competition=CompetitionFamily(
            _family(comp["scale"], "kernels.competition.scale"),
            str(comp.get("kernel", "constant")),
            _number(comp.get("width", 1.0), "kernels.competition.width"),
        ),
        mutation_rate=_family(rates.get("mutation", {"const": 0.0}), "rates.mutation"),
        mutation_sd=_number(kernels.get("mutation_sd", 0.1), "kernels.mutation_sd"),
    )
    values = np.array([t.value for t in traits])
    model = DemographicModel.from_families(families, values, bounds["lower"], bounds["upper"], **scale_kw)
    return replace(model, traits=tuple(traits))


def _run(doc: dict) -> RunConfig:
    run = _require(doc.get("run", {}), "run", dict)
    _unknown("run", run, RUN_FIELDS)
    kw = {}
    for k, v in run.items():
        if k == "eps":
            kw[k] = tuple(_numbers(v if isinstance(v, list) else [v], "run.eps"))
        elif k in ("eta", "t_end", "tol"):
            kw[k] = _number(v, f"run.{k}")
        elif k in ("seed", "replicas"):
            if isinstance(v, bool) or not isinstance(v, int):
                raise SchemaError(f"run.{k}: expected an integer")
            kw[k] = v
        else:
            kw[k] = str(v)
    return RunConfig(**kw)


def _env_overrides(env) -> dict:
    out = {}
    casts = {
        "SEED": ("seed", int),
        "REPLICAS": ("replicas", int),
        "ETA": ("eta", float),
        "T_END": ("t_end", float),
        "TOL": ("tol", float),
        "MIGRATION_MODE": ("migration_mode", str),
        "OUT": ("output_dir", str),
        "EPS": ("eps", lambda s: tuple(float(x) for x in s.split(",") if x.strip())),
    }
    for suffix, (name, cast) in casts.items():
        raw = env.get(ENV_PREFIX + suffix)
        if raw is None:
            continue
        try:
            out[name] = cast(raw)
        except ValueError:
            raise ValidationError(f"{ENV_PREFIX}{suffix}: cannot parse {raw!r}") from None
    return out


def parse_config(document, overrides: dict | None = None, env=None) -> tuple[DemographicModel, RunConfig]:
    """Build (model, run settings); precedence is overrides > environment > document."""
    if isinstance(document, (str, bytes)):
        text = document.decode() if isinstance(document, bytes) else document
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config is not valid JSON: {exc}") from None
    else:
        doc = document
        text = json.dumps(doc, sort_keys=True)
    _require(doc, "config", dict)
    _unknown("config", doc, SECTIONS)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"schema_version: expected {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    model = _model(doc)
    run = _run(doc)
    merged = _env_overrides(os.environ if env is None else env)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    valid = {f.name for f in fields(RunConfig)}
    run = replace(run, **{k: v for k, v in merged.items() if k in valid})
    run = replace(run, config_sha256=hashlib.sha256(text.encode()).hexdigest())
    return model, run.validate()


def model_document(model: DemographicModel, run: dict | None = None) -> dict:
    """Inverse of :func:`parse_config` for tabular models and parametric families."""
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "traits": [{"id": t.id, "value": list(t.value)} for t in model.traits],
        "scales": {"epsilon": model.epsilon, "sigma": model.sigma, "rho": model.rho},
    }
    if model.families is None:
        doc["rates"] = {"b": model.b.tolist(), "d": model.d.tolist(), "mu": model.mu.tolist()}
        doc["kernels"] = {"alpha": np.asarray(model.alpha).tolist()}
        if model.m is not None:
            doc["kernels"]["m"] = np.asarray(model.m).tolist()
    else:
        fam = model.families

        def enc(f: RateFamily) -> dict:
            return {"const": f.const, "linear": list(f.linear), "quadratic": list(f.quadratic)}

        doc["rates"] = {"birth": enc(fam.birth), "death": enc(fam.death), "mutation": enc(fam.mutation_rate)}
        doc["kernels"] = {
            "competition": {"scale": enc(fam.competition.scale), "kernel": fam.competition.kernel,
                            "width": fam.competition.width},
            "mutation_sd": fam.mutation_sd,
        }
    if model.lower is not None:
        doc["space"] = {"lower": list(model.lower), "upper": list(model.upper)}
    if run:
        doc["run"] = run
    return doc
