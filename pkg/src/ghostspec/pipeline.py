"""Dataset construction and analysis runs shared by the CLI and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis.kmeans import kmeans_elbow
from .analysis.lda import lda
from .analysis.nmf import dominant_component, nmf
from .analysis.spectra import SpectrumVector, extract_spectrum, match_components, normalize, stack
from .config import AnalysisConfig, RunConfig, SceneSpec
from .detection import DetectorConfig, simulate_acquisition

__all__ = [
    "PlannedRun",
    "Dataset",
    "plan_runs",
    "region_rows",
    "build_dataset",
    "run_kmeans",
    "run_nmf",
    "run_lda",
    "ELBOW_BEFORE",
    "ELBOW_AFTER",
    "select_k",
]

# residual(k)/residual(k-1) must fall below ELBOW_BEFORE at the elbow and
# stay above ELBOW_AFTER for the next step
ELBOW_BEFORE = 0.5
ELBOW_AFTER = 0.8


@dataclass(frozen=True)
class PlannedRun:
    name: str
    scene: str
    duration: float
    seed: int
    kind: str  # "reference", "split" or "imaging"


@dataclass
class Dataset:
    runs: list
    maps: dict  # run name -> LambdaYMap
    spectra: list  # SpectrumVector with metadata name/role/map/rows
    references: list = field(default_factory=list)  # the reference spectra, plan order

    def labels(self) -> list:
        return [s.label for s in self.spectra]


def plan_runs(cfg: RunConfig, include_imaging: bool = False) -> list:
    """Every acquisition of the plan, in order; run ``i`` gets seed ``base_seed + i``."""
    plan = cfg.plan
    items = [(f"ref_{name}", name, plan.reference_duration_s, "reference") for name in plan.references]
    for name in plan.split_scenes:
        for rep in range(1, plan.repetitions + 1):
            items.append((f"{name}_r{rep}", name, plan.split_duration_s, "split"))
    if include_imaging:
        for name, duration in plan.imaging:
            items.append((f"{name}_{duration:g}s", name, duration, "imaging"))
    return [PlannedRun(n, s, float(d), plan.base_seed + i, k) for i, (n, s, d, k) in enumerate(items)]


def region_rows(scene: SceneSpec, det: DetectorConfig, guard: int = 0):
    """Row ranges ``(lower, upper)`` of a split scene, each ``(start, stop)``.

    The object-plane boundary is mapped back to the crystal plane and on to
    the ICCD; ``guard`` rows on either side of it are left out.
    """
    if not scene.is_split:
        raise ValueError(f"scene {scene.name!r} has no region boundary")
    b = det.iccd_magnification * scene.boundary_mm / scene.mask.magnification
    step = (det.y_max - det.y_min) / det.n_spatial_pixels
    pos = (b - det.y_min) / step
    n = int(det.n_spatial_pixels)
    lower_stop = min(max(math.floor(pos) - guard, 0), n)
    upper_start = max(min(math.ceil(pos) + guard, n), 0)
    if lower_stop <= 0 or upper_start >= n:
        raise ValueError(f"scene {scene.name!r}: boundary leaves an empty region on the detector")
    return (0, lower_stop), (upper_start, n)


def _tag(spec: SpectrumVector, name: str, role: str, run: str) -> SpectrumVector:
    spec.metadata.update({"name": name, "role": role, "map": run})
    return spec


def build_dataset(cfg: RunConfig, workers: int = 1, progress=None) -> Dataset:
    """Simulate every reference and split-scene run and cut out the spectra.

    References give one spectrum each (all rows); split scenes give a lower
    and an upper region spectrum per repetition.
    """
    runs = plan_runs(cfg)
    maps, spectra, refs = {}, [], []
    for run in runs:
        scene = cfg.scene(run.scene)
        if progress:
            progress(run)
        m = simulate_acquisition(cfg.source, scene.mask, cfg.detector, run.duration, run.seed,
                                 workers=workers, metadata={"name": run.name, "scene": run.scene})
        maps[run.name] = m
        if run.kind == "reference":
            s = _tag(extract_spectrum(m, (0, m.shape[0]), scene.label), run.name, "reference", run.name)
            spectra.append(s)
            refs.append(s)
        else:
            lower, upper = region_rows(scene, cfg.detector, cfg.plan.guard_rows)
            spectra.append(_tag(extract_spectrum(m, lower, scene.label_lower),
                                f"{run.name}_lower", "region", run.name))
            spectra.append(_tag(extract_spectrum(m, upper, scene.label_upper),
                                f"{run.name}_upper", "region", run.name))
    return Dataset(runs, maps, spectra, refs)


def select_k(curve) -> int:
    """Smallest k whose residual drop is large (ratio < ELBOW_BEFORE) while
    the following step barely helps (ratio > ELBOW_AFTER); 0 if none."""
    res = [r for _, r in curve]
    for i in range(1, len(res) - 1):
        before = res[i] / res[i - 1] if res[i - 1] > 0 else 1.0
        after = res[i + 1] / res[i] if res[i] > 0 else 1.0
        if before < ELBOW_BEFORE and after > ELBOW_AFTER:
            return curve[i][0]
    return 0


def _normalized(spectra) -> list:
    return [normalize(s) for s in spectra]


def run_kmeans(spectra, references, params: AnalysisConfig, workers: int = 1) -> dict:
    X = stack(_normalized(spectra))
    R = stack(_normalized(references))
    k_max = min(params.k_max, len(X))
    curve, results = kmeans_elbow(X, k_max, params.seed, restarts=params.restarts,
                                  max_iter=params.max_iter, workers=workers)
    k_sel = select_k(curve)
    out = {"curve": curve, "results": results, "k_selected": k_sel}
    k_match = len(R)
    if k_match <= k_max:
        best = results[k_match - 1]
        assignment, sims = match_components(best.centroids, R)
        out.update(centroids=best.centroids, assignments=best.assignments,
                   match=assignment, match_similarity=sims)
    return out


def run_nmf(spectra, references, params: AnalysisConfig) -> dict:
    V = stack(_normalized(spectra))
    R = stack(_normalized(references))
    res = nmf(V, params.nmf_rank, params.seed, max_iter=params.nmf_max_iter, tol=params.nmf_tol)
    out = {"result": res, "dominant": [dominant_component(res.W, i) for i in range(len(V))]}
    if params.nmf_rank == len(R):
        assignment, sims = match_components(res.H, R)
        out.update(match=assignment, match_similarity=sims)
    return out


def run_lda(spectra, labels, params: AnalysisConfig) -> dict:
    X = stack(_normalized(spectra))
    res = lda(X, labels, regularization=params.lda_regularization, pca_predim=params.lda_pca_predim)
    predicted = res.predict_projected(res.projected)
    classes = res.classes
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(labels, predicted):
        confusion[classes.index(t), classes.index(p)] += 1
    return {"result": res, "predicted": predicted, "confusion": confusion}
