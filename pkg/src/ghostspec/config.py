"""Run configuration files.

Grammar, one setting per line::

    # comment
    section.key = value
    scene.<name>.key = value

Blank lines and ``#`` comments are ignored; repeated keys are an error.
Sections: ``source``, ``detector``, ``scene.<name>``, ``plan`` and
``analysis``.  Transmission profiles are written as

    blank
    neutral <T0>
    bandpass <center_nm> <fwhm_nm> [peak]
    tabulated <file>          # two columns: wavelength_nm T

A scene is either uniform (``profile`` key) or split at ``boundary_mm`` on
the object plane (``lower`` and ``upper`` keys).  Relative tabulated paths
are resolved against the config file's directory.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

from .detection import DetectorConfig
from .scene import Bandpass, Blank, Neutral, SceneMask, load_tabulated
from .source import SourceConfig

__all__ = [
    "ConfigError",
    "SceneSpec",
    "PlanConfig",
    "AnalysisConfig",
    "RunConfig",
    "parse_profile",
    "load_config",
    "parse_config",
    "default_config_path",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or line."""


@dataclass(frozen=True)
class SceneSpec:
    name: str
    mask: SceneMask
    label: Optional[str] = None  # uniform scenes
    boundary_mm: Optional[float] = None  # split scenes, object plane
    label_lower: Optional[str] = None
    label_upper: Optional[str] = None

    @property
    def is_split(self) -> bool:
        return self.boundary_mm is not None


@dataclass(frozen=True)
class PlanConfig:
    references: tuple = ()
    reference_duration_s: float = 3600.0
    split_scenes: tuple = ()
    split_duration_s: float = 3600.0
    repetitions: int = 5
    base_seed: int = 1000
    guard_rows: int = 2
    # (scene, duration) pairs simulated by reproduce-paper for the imaging test
    imaging: tuple = ()


@dataclass(frozen=True)
class AnalysisConfig:
    seed: int = 7
    k_max: int = 6
    restarts: int = 20
    max_iter: int = 300
    nmf_rank: int = 3
    nmf_tol: float = 1e-9
    nmf_max_iter: int = 5000
    lda_regularization: float = 1e-6
    lda_pca_predim: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    source: SourceConfig
    detector: DetectorConfig
    scenes: dict
    plan: PlanConfig
    analysis: AnalysisConfig
    digest: str = ""
    path: Optional[Path] = field(default=None, compare=False)

    def scene(self, name: str) -> SceneSpec:
        try:
            return self.scenes[name]
        except KeyError:
            raise ConfigError(f"unknown scene {name!r}; defined: {', '.join(sorted(self.scenes))}") from None


def default_config_path() -> Path:
    return Path(__file__).parent / "data" / "default.cfg"


def parse_profile(text: str, base_dir: Optional[Path] = None):
    words = text.split()
    if not words:
        raise ConfigError("empty transmission profile")
    kind, args = words[0].lower(), words[1:]
    try:
        if kind == "blank" and not args:
            return Blank()
        if kind == "neutral" and len(args) == 1:
            return Neutral(float(args[0]))
        if kind == "bandpass" and len(args) in (2, 3):
            return Bandpass(*(float(a) for a in args))
        if kind == "tabulated" and len(args) == 1:
            path = Path(args[0])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_tabulated(path)
    except OSError as exc:
        raise ConfigError(f"cannot read tabulated profile: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad profile {text!r}: {exc}") from exc
    raise ConfigError(f"bad profile {text!r}")


def _convert(value: str, kind, key: str):
    try:
        if kind is int:
            return int(value)
        if kind is float:
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None
    return value


def _build(cls, values: dict, prefix: str, types: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(prefix + k for k in sorted(unknown))}")
    kwargs = {k: _convert(v, types.get(k, float), prefix + k) for k, v in values.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{prefix.rstrip('.')}] {exc}") from exc


_SCENE_KEYS = {"profile", "label", "boundary_mm", "lower", "upper", "label_lower", "label_upper",
               "magnification", "prefilter"}


def _build_scene(name: str, values: dict, base_dir) -> SceneSpec:
    prefix = f"scene.{name}."
    unknown = set(values) - _SCENE_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(prefix + k for k in sorted(unknown))}")
    mag = _convert(values.get("magnification", "1.5"), float, prefix + "magnification")
    pre = values.get("prefilter")
    prefilter = parse_profile(pre, base_dir) if pre else None
    try:
        if "profile" in values:
            if {"boundary_mm", "lower", "upper"} & set(values):
                raise ConfigError(f"{prefix}profile cannot be combined with a split definition")
            mask = SceneMask.uniform(parse_profile(values["profile"], base_dir), mag, prefilter)
            return SceneSpec(name, mask, label=values.get("label"))
        missing = {"boundary_mm", "lower", "upper"} - set(values)
        if missing:
            raise ConfigError(f"scene {name!r} needs 'profile' or all of boundary_mm/lower/upper "
                              f"(missing {', '.join(sorted(missing))})")
        boundary = _convert(values["boundary_mm"], float, prefix + "boundary_mm")
        mask = SceneMask.split(boundary, parse_profile(values["lower"], base_dir),
                               parse_profile(values["upper"], base_dir), mag, prefilter)
        return SceneSpec(name, mask, boundary_mm=boundary, label=values.get("label"),
                         label_lower=values.get("label_lower"), label_upper=values.get("label_upper"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"scene {name!r}: {exc}") from exc


def parse_config(text: str, base_dir: Optional[Path] = None, source_name: str = "<config>") -> RunConfig:
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source_name}:{lineno}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key or not value:
            raise ConfigError(f"{source_name}:{lineno}: expected 'section.key = value'")
        if key in entries:
            raise ConfigError(f"{source_name}:{lineno}: duplicate key {key!r}")
        entries[key] = value

    sections: dict = {"source": {}, "detector": {}, "plan": {}, "analysis": {}}
    scenes: dict = {}
    for key, value in entries.items():
        head, rest = key.split(".", 1)
        if head == "scene":
            if "." not in rest:
                raise ConfigError(f"{key}: expected scene.<name>.<key>")
            name, sub = rest.split(".", 1)
            scenes.setdefault(name, {})[sub] = value
        elif head in sections:
            sections[head][rest] = value
        else:
            raise ConfigError(f"{key}: unknown section {head!r}")

    source = _build(SourceConfig, sections["source"], "source.", {})
    detector = _build(DetectorConfig, sections["detector"], "detector.",
                      {"n_spectral_pixels": int, "n_spatial_pixels": int})
    plan_raw = dict(sections["plan"])
    for k in ("references", "split_scenes"):
        if k in plan_raw:
            plan_raw[k] = tuple(plan_raw[k].split())
    if "imaging" in plan_raw:
        pairs = []
        for item in plan_raw["imaging"].split():
            scene, _, dur = item.partition(":")
            pairs.append((scene, _convert(dur, float, "plan.imaging")))
        plan_raw["imaging"] = tuple(pairs)
    plan = _build(PlanConfig, plan_raw, "plan.",
                  {"references": str, "split_scenes": str, "imaging": str, "repetitions": int,
                   "base_seed": int, "guard_rows": int})
    if plan.repetitions < 0 or plan.guard_rows < 0:
        raise ConfigError("plan.repetitions and plan.guard_rows must be >= 0")
    analysis = _build(AnalysisConfig, sections["analysis"], "analysis.",
                      {"seed": int, "k_max": int, "restarts": int, "max_iter": int,
                       "nmf_rank": int, "nmf_max_iter": int, "lda_pca_predim": int})

    scene_specs = {name: _build_scene(name, vals, base_dir) for name, vals in scenes.items()}
    for name in plan.references + plan.split_scenes + tuple(s for s, _ in plan.imaging):
        if name not in scene_specs:
            raise ConfigError(f"plan references undefined scene {name!r}")
    for name in plan.references:
        if scene_specs[name].is_split or not scene_specs[name].label:
            raise ConfigError(f"reference scene {name!r} must be uniform and carry a label")
    for name in plan.split_scenes:
        s = scene_specs[name]
        if not s.is_split or not (s.label_lower and s.label_upper):
            raise ConfigError(f"split scene {name!r} needs boundary_mm and label_lower/label_upper")

    canonical = "\n".join(f"{k} = {entries[k]}" for k in sorted(entries))
    digest = hashlib.sha256(canonical.encode()).hexdigest()[:16]
    return RunConfig(source, detector, scene_specs, plan, analysis, digest)


def load_config(path: Union[str, Path, None] = None) -> RunConfig:
    path = Path(path) if path is not None else default_config_path()
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    cfg = parse_config(text, path.parent, str(path))
    return RunConfig(cfg.source, cfg.detector, cfg.scenes, cfg.plan, cfg.analysis, cfg.digest, path)
