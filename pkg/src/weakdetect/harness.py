"""Reproducible experiments: configuration, synthetic scenes, file formats and
the pipeline runner.

Configs and results are JSON documents carrying ``schema_version``.  Matrices
are CSV files whose first line is ``#d=<dim>,<col>,<col>,...``; values are
written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .detectors import DetectionProblem, DetectorSpec
from .errors import ConfigError, ContractError, DomainError
from .evaluation import (
    DEFAULT_CONFIDENCE,
    convergence_study,
    dominance_check,
    empirical_roc,
    power_curve,
    rank_agreement,
    sculpt_optimize,
)
from .models import MODEL_KINDS, GaussianBackground, TargetInteractionModel
from .priors import MixedPriorSchedule, Prior, mixed_prior, prior_density
from .sampling import RNG_FAMILY, draw_background, draw_targets, substream

SCHEMA_VERSION = 1
STAGES = ("generate", "score", "roc", "power", "converge", "sculpt", "fig1")

_number_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_prior_schema = {
    "type": "object",
    "properties": {
        "point_masses": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                    "minItems": 2, "maxItems": 2}},
        "continuous": {"type": "array", "items": {
            "type": "object",
            "properties": {"kind": {"enum": ["uniform01", "exponential"]},
                           "weight": {"type": "number"}, "epsilon": {"type": "number"}},
            "required": ["kind", "weight"], "additionalProperties": False}},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "background": {
            "type": "object",
            "properties": {
                "mean": {"oneOf": [_number_list, {"type": "number"}]},
                "covariance": {"type": "array", "items": _number_list},
                "variance": {"type": "number", "exclusiveMinimum": 0},
                "dim": {"type": "integer", "minimum": 1},
            },
            "required": ["mean"],
            "additionalProperties": False,
        },
        "model": {
            "type": "object",
            "properties": {"kind": {"enum": list(MODEL_KINDS)}, "signature": _number_list,
                           "a_max": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["kind", "signature"],
            "additionalProperties": False,
        },
        "detectors": {"type": "array", "minItems": 1, "items": {
            "type": "object", "properties": {"kind": {"type": "string"}}, "required": ["kind"]}},
        "scene": {
            "type": "object",
            "properties": {"n_background": {"type": "integer", "minimum": 0},
                           "n_target": {"type": "integer", "minimum": 0},
                           "abundances": _number_list},
            "additionalProperties": False,
        },
        "evaluation": {
            "type": "object",
            "properties": {
                "far": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "a_grid": _number_list,
                "n_bkg": {"type": "integer", "minimum": 1},
                "n_tgt_per_a": {"type": "integer", "minimum": 1},
                "confidence": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "convergence": {"type": "object", "properties": {
                    "epsilons": _number_list, "beta": {"type": "number"}, "base_prior": _prior_schema,
                    "n_pixels": {"type": "integer", "minimum": 1}}, "additionalProperties": False},
                "sculpt": {"type": "object", "properties": {
                    "candidates": _number_list, "include_lmp": {"type": "boolean"},
                    "budget": {"type": "integer", "minimum": 1}}, "additionalProperties": False},
                "fig1": {"type": "object", "properties": {
                    "beta": {"type": "number"}, "epsilons": _number_list, "a_grid": _number_list,
                    "base_prior": _prior_schema}, "additionalProperties": False},
            },
            "additionalProperties": False,
        },
        "pipeline": {"type": "array", "items": {"enum": list(STAGES)}},
    },
    "required": ["schema_version", "seed", "background", "model", "detectors"],
    "additionalProperties": False,
}

_DEFAULT_SCENE = {"n_background": 1000, "n_target": 1000, "abundances": [0.5]}
_DEFAULT_EVALUATION = {
    "far": 0.01,
    "a_grid": [0.0, 0.25, 0.5, 0.75, 1.0],
    "n_bkg": 5000,
    "n_tgt_per_a": 2000,
    "confidence": DEFAULT_CONFIDENCE,
    "convergence": {"epsilons": [0.02, 0.01, 0.005, 0.0025], "beta": 0.5,
                    "base_prior": Prior.uniform().to_dict(), "n_pixels": 200},
    "sculpt": {"candidates": [0.25, 0.75], "include_lmp": True, "budget": 200},
    "fig1": {"beta": 0.5, "epsilons": [0.1, 0.05, 0.025, 0.0125],
             "a_grid": [0.001, 0.01, 0.1, 0.25, 0.5, 1.0], "base_prior": Prior.uniform().to_dict()},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated, normalized experiment description."""

    seed: int
    problem: DetectionProblem
    detectors: tuple[DetectorSpec, ...]
    scene: dict
    evaluation: dict
    pipeline: tuple[str, ...]

    def to_dict(self) -> dict:
        bg = self.problem.background
        model = self.problem.model
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "background": {"mean": bg.mean.tolist(), "covariance": bg.covariance.tolist()},
            "model": {"kind": model.kind, "signature": model.signature.tolist(), "a_max": model.a_max},
            "detectors": [spec.to_dict() for spec in self.detectors],
            "scene": copy.deepcopy(self.scene),
            "evaluation": copy.deepcopy(self.evaluation),
            "pipeline": list(self.pipeline),
        }

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(int(seed), self.problem, self.detectors, self.scene,
                                self.evaluation, self.pipeline)


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _background(spec: dict) -> GaussianBackground:
    mean = spec["mean"]
    if isinstance(mean, (int, float)):
        if "dim" not in spec:
            raise ConfigError("scalar background mean needs 'dim'")
        mean = [float(mean)] * spec["dim"]
    d = len(mean)
    if "dim" in spec and spec["dim"] != d:
        raise ConfigError(f"background dim {spec['dim']} != mean length {d}")
    if "covariance" in spec and "variance" in spec:
        raise ConfigError("give either 'covariance' or 'variance', not both")
    if "covariance" in spec:
        cov = spec["covariance"]
    else:
        cov = (spec.get("variance", 1.0) * np.eye(d)).tolist()
    return GaussianBackground(mean, cov)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config document and build the objects it describes.

    Schema problems and inconsistent parameters both raise
    :class:`ConfigError` before any computation happens.
    """
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from exc
    try:
        bg = _background(data["background"])
        m = data["model"]
        model = TargetInteractionModel(m["kind"], m["signature"], m.get("a_max"))
        problem = DetectionProblem(bg, model)
        detectors = tuple(DetectorSpec.from_dict(problem, d) for d in data["detectors"])
        scene = _merge(_DEFAULT_SCENE, data.get("scene", {}))
        evaluation = _merge(_DEFAULT_EVALUATION, data.get("evaluation", {}))
        _check_abundances(model, scene["abundances"], "scene.abundances")
        _check_abundances(model, evaluation["a_grid"], "evaluation.a_grid")
        _check_abundances(model, evaluation["sculpt"]["candidates"], "evaluation.sculpt.candidates")
        if np.any(np.diff(evaluation["a_grid"]) <= 0):
            raise ConfigError("evaluation.a_grid must be strictly increasing")
        conv = evaluation["convergence"]
        for e in conv["epsilons"]:
            MixedPriorSchedule(conv["beta"], e, Prior.from_dict(conv["base_prior"]))
        fig1 = evaluation["fig1"]
        for e in fig1["epsilons"]:
            MixedPriorSchedule(fig1["beta"], e, Prior.from_dict(fig1["base_prior"]))
        if any(not 0 < a <= 1 for a in fig1["a_grid"]):
            raise ConfigError("evaluation.fig1.a_grid must lie in (0, 1]")
        pipeline = tuple(s for s in STAGES if s in data.get("pipeline", STAGES))
    except ConfigError:
        raise
    except (ContractError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(int(data["seed"]), problem, detectors, scene, evaluation, pipeline)


def _check_abundances(model, values, where):
    for a in values:
        if not 0 <= a <= model.a_max:
            raise ConfigError(f"{where}: abundance {a} outside [0, {model.a_max}]")


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data)


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def format_matrix_csv(matrix, columns, d: int) -> str:
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[1] != len(columns):
        raise ContractError(f"matrix shape {M.shape} does not match {len(columns)} columns")
    buf = io.StringIO()
    buf.write(f"#d={d}," + ",".join(columns) + "\n")
    for row in M:
        buf.write(",".join(format(v, ".17g") for v in row) + "\n")
    return buf.getvalue()


def parse_matrix_csv(text: str) -> tuple[np.ndarray, list[str], int]:
    """Inverse of :func:`format_matrix_csv`: ``(matrix, column names, d)``."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#d="):
        raise ContractError("matrix CSV must start with a '#d=<int>,...' header")
    head = lines[0][1:].split(",")
    try:
        d = int(head[0][2:])
    except ValueError as exc:
        raise ContractError(f"bad dimension field {head[0]!r}") from exc
    columns = head[1:]
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()]
    M = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return M, columns, d


def write_matrix_csv(path, matrix, columns=None) -> None:
    M = np.asarray(matrix, dtype=float)
    columns = columns or [f"x{i}" for i in range(M.shape[1])]
    write_atomic(path, format_matrix_csv(M, columns, M.shape[1]))


def read_matrix_csv(path) -> tuple[np.ndarray, list[str], int]:
    return parse_matrix_csv(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Scene:
    """Synthetic pixels with labels (0 background, 1 target) and abundances."""

    pixels: np.ndarray
    labels: np.ndarray
    abundances: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def background_pixels(self) -> np.ndarray:
        return self.pixels[self.labels == 0]

    @property
    def target_pixels(self) -> np.ndarray:
        return self.pixels[self.labels == 1]

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.pixels, self.labels, self.abundances):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def to_csv(self) -> str:
        d = self.pixels.shape[1]
        cols = [f"x{i}" for i in range(d)] + ["label", "abundance"]
        M = np.column_stack([self.pixels, self.labels.astype(float), self.abundances])
        return format_matrix_csv(M.reshape(-1, d + 2), cols, d)

    @classmethod
    def from_csv(cls, text: str, provenance: dict | None = None) -> "Scene":
        M, columns, d = parse_matrix_csv(text)
        if columns[d:] != ["label", "abundance"]:
            raise ContractError("scene CSV must end with 'label' and 'abundance' columns")
        return cls(M[:, :d], M[:, d].astype(np.int8), M[:, d + 1], provenance or {})


def generate_scene(config: ExperimentConfig, seed: int | None = None) -> Scene:
    """Background draws followed by target draws at the configured abundances.

    Target ``i`` gets ``abundances[i % len(abundances)]``.  Background and
    targets come from separate substreams of ``seed`` (default: the config's).
    """
    seed = config.seed if seed is None else int(seed)
    problem = config.problem
    n_b = config.scene["n_background"]
    n_t = config.scene["n_target"]
    levels = np.asarray(config.scene["abundances"], dtype=float)
    if n_t and np.any(levels <= 0):
        raise ConfigError("target abundances must be > 0")
    bkg, rej_b = draw_background(problem, substream(seed, "scene", "background"), n_b)
    tgt_a = levels[np.arange(n_t) % levels.size] if n_t else np.empty(0)
    tgt, rej_t = draw_targets(problem, substream(seed, "scene", "target"), tgt_a)
    pixels = np.concatenate([bkg, tgt.reshape(-1, problem.dim)])
    labels = np.concatenate([np.zeros(n_b, dtype=np.int8), np.ones(n_t, dtype=np.int8)])
    abundances = np.concatenate([np.zeros(n_b), tgt_a])
    provenance = {
        "seed": seed,
        "rng": RNG_FAMILY,
        "model": problem.model.kind,
        "background": {"mean": problem.background.mean.tolist(),
                       "covariance": problem.background.covariance.tolist()},
        "n_background": n_b,
        "n_target": n_t,
        "rejected_draws": rej_b + rej_t,
    }
    return Scene(pixels, labels, abundances, provenance)


def emit_prior_curves(beta: float, epsilons, base_prior: Prior, a_grid) -> list[dict]:
    """Rows ``(epsilon, a, q)`` of the mixed prior density for log-log plotting."""
    a = np.asarray(a_grid, dtype=float)
    if np.any(a <= 0) or np.any(a > 1):
        raise ContractError("a_grid must lie in (0, 1]")
    rows = []
    for e in epsilons:
        q = prior_density(mixed_prior(MixedPriorSchedule(beta, e, base_prior)), a)
        rows += [{"epsilon": float(e), "a": float(ai), "q": float(qi)} for ai, qi in zip(a, np.atleast_1d(q))]
    return rows


def _labels(detectors) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for spec in detectors:
        name = spec.label
        if name in seen:
            seen[name] += 1
            name = f"{name}#{seen[name]}"
        else:
            seen[name] = 0
        out.append(name)
    return out


def score_scene(config: ExperimentConfig, pixels) -> dict[str, np.ndarray]:
    return {name: np.asarray(spec.score(pixels), dtype=float).reshape(-1)
            for name, spec in zip(_labels(config.detectors), config.detectors)}


def run_experiment(config, stages=None) -> dict:
    """Run the configured pipeline and return a self-contained results document.

    ``config`` is an :class:`ExperimentConfig` or a raw config dict.  The
    document echoes the normalized config, so ``run_experiment(doc["config"])``
    reproduces every entry of ``doc["tables"]`` bit for bit.
    """
    if isinstance(config, dict):
        config = parse_config(config)
    stages = tuple(s for s in STAGES if s in (stages or config.pipeline))
    ev = config.evaluation
    problem = config.problem
    names = _labels(config.detectors)
    tables: dict = {}
    timings: dict = {}

    def timed(stage, fn):
        start = time.perf_counter()
        tables[stage] = fn()
        timings[stage] = time.perf_counter() - start

    scene = None
    scores = None
    if any(s in stages for s in ("generate", "score", "roc")):
        start = time.perf_counter()
        scene = generate_scene(config)
        timings["generate"] = time.perf_counter() - start
        tables["generate"] = {"digest": scene.digest(), "provenance": scene.provenance}
    if "score" in stages or "roc" in stages:
        start = time.perf_counter()
        scores = score_scene(config, scene.pixels)
        timings["score"] = time.perf_counter() - start
        if "score" in stages:
            tables["score"] = {
                "scores": {k: v.tolist() for k, v in scores.items()},
                "rank_agreement": rank_agreement(scores),
            }
    if "roc" in stages:
        def roc():
            is_t = scene.labels == 1
            if not is_t.any() or is_t.all():
                raise ConfigError("ROC needs both background and target pixels in the scene")
            return [{"detector": k, **empirical_roc(v[~is_t], v[is_t]).to_dict()} for k, v in scores.items()]
        timed("roc", roc)
    if "power" in stages:
        def power():
            curves = [power_curve(spec, ev["a_grid"], ev["far"], ev["n_bkg"], ev["n_tgt_per_a"], config.seed)
                      for spec in config.detectors]
            curves = [replace(c, label=n) for n, c in zip(names, curves)]
            reports = [dominance_check(a, b, ev["confidence"]).to_dict()
                       for i, a in enumerate(curves) for b in curves[i + 1:]]
            return {"curves": [c.to_dict() for c in curves], "dominance": reports}
        timed("power", power)
    if "converge" in stages:
        def converge():
            conv = ev["convergence"]
            X, _ = draw_background(problem, substream(config.seed, "convergence"), conv["n_pixels"])
            study = convergence_study(problem, conv["epsilons"], Prior.from_dict(conv["base_prior"]),
                                      conv["beta"], X)
            return {"beta": conv["beta"], **study.to_dict()}
        timed("converge", converge)
    if "sculpt" in stages:
        def sculpt():
            sc = ev["sculpt"]
            res = sculpt_optimize(problem, sc["candidates"], sc["include_lmp"], ev["a_grid"], ev["far"],
                                  ev["n_bkg"], ev["n_tgt_per_a"], config.seed, sc["budget"])
            return res.to_dict()
        timed("sculpt", sculpt)
    if "fig1" in stages:
        def fig1():
            f = ev["fig1"]
            return {"beta": f["beta"],
                    "rows": emit_prior_curves(f["beta"], f["epsilons"], Prior.from_dict(f["base_prior"]),
                                              f["a_grid"])}
        timed("fig1", fig1)

    return {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "rng": RNG_FAMILY,
        "seed": config.seed,
        "stages": list(stages),
        "config": {**config.to_dict(), "pipeline": list(stages)},
        "tables": tables,
        "timings": timings,
    }
