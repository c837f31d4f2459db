"""Command-line driver: ``ghostspec simulate|dataset|analyze|render|reproduce-paper``.

Exit status: 0 success, 2 usage error, 3 configuration error, 4 I/O or
file-format error, 5 analysis failure.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import AnalysisConfig, ConfigError, RunConfig, _build, load_config
from .detection import simulate_acquisition
from .io import (
    DatasetManifest,
    FormatError,
    Report,
    RunEntry,
    SpectrumEntry,
    Table,
    load_manifest,
    load_map,
    load_spectrum,
    save_manifest,
    save_map,
    save_report,
    save_spectrum,
    write_table_tsv,
    atomic_write,
)
from .pipeline import (
    ELBOW_AFTER,
    ELBOW_BEFORE,
    build_dataset,
    plan_runs,
    run_kmeans,
    run_lda,
    run_nmf,
)
from .render import render_map

log = logging.getLogger("ghostspec")

EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_ANALYSIS = 5

METHODS = ("kmeans", "nmf", "lda")


class AnalysisError(RuntimeError):
    pass


# ------------------------------------------------------------ simulate


def cmd_simulate(config_path, scene: str, duration: float, seed: int, out, workers: int = 1) -> Path:
    cfg = load_config(config_path)
    spec = cfg.scene(scene)
    if not duration > 0:
        raise ConfigError(f"--duration-s must be > 0, got {duration}")
    m = simulate_acquisition(cfg.source, spec.mask, cfg.detector, duration, seed, workers=workers,
                             metadata={"scene": scene})
    out = Path(out)
    save_map(m, out)
    log.info("wrote %s (%d counts)", out, m.total)
    return out


# ------------------------------------------------------------- dataset


def _write_dataset(cfg: RunConfig, root: Path, workers: int) -> DatasetManifest:
    (root / "maps").mkdir()
    (root / "spectra").mkdir()
    ds = build_dataset(cfg, workers=workers,
                       progress=lambda r: log.info("simulating %s (%s, %g s)", r.name, r.scene, r.duration))
    runs, entries = [], []
    for run in ds.runs:
        scene = cfg.scene(run.scene)
        rel = f"maps/{run.name}.map"
        save_map(ds.maps[run.name], root / rel)
        runs.append(RunEntry(run.name, run.scene, run.duration, run.seed, rel,
                             scene.label or scene.label_upper))
    for s in ds.spectra:
        name = s.metadata["name"]
        rel = f"spectra/{name}.spec"
        save_spectrum(s, root / rel)
        start, stop = (int(v) for v in s.metadata["rows"].split())
        entries.append(SpectrumEntry(name, rel, s.metadata["map"], start, stop, s.label,
                                     s.metadata["role"]))
    analysis = {f.name: str(getattr(cfg.analysis, f.name)) for f in fields(AnalysisConfig)
                if getattr(cfg.analysis, f.name) is not None}
    man = DatasetManifest(runs, entries, cfg.digest, analysis)
    save_manifest(man, root / "manifest.txt")
    return man


def _replace_dir(tmp: Path, out: Path) -> None:
    if out.exists():
        if not out.is_dir() or (any(out.iterdir()) and not (out / "manifest.txt").exists()
                                and not (out / ".ghostspec").exists()):
            raise FileExistsError(f"{out} exists and is not a ghostspec output directory")
        shutil.rmtree(out)
    tmp.rename(out)


def _staging(out: Path) -> Path:
    out.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))


def cmd_dataset(config_path, out, workers: int = 1) -> DatasetManifest:
    """Simulate the full plan into ``out``; nothing is left behind on failure."""
    cfg = load_config(config_path)
    out = Path(out)
    tmp = _staging(out)
    try:
        man = _write_dataset(cfg, tmp, workers)
        _replace_dir(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    log.info("dataset: %d runs, %d spectra in %s", len(man.runs), len(man.spectra), out)
    return man


# ------------------------------------------------------------- analyze


def _load_dataset(manifest_path: Path):
    man = load_manifest(manifest_path)
    base = manifest_path.parent
    spectra = []
    for e in man.spectra:
        s = load_spectrum(base / e.path)
        if s.label != e.label:
            raise FormatError(f"{e.path}: label {s.label!r} does not match manifest ({e.label!r})")
        if s.metadata.get("name", e.name) != e.name:
            raise FormatError(f"{e.path}: spectrum name does not match manifest entry {e.name!r}")
        spectra.append(s)
    if not spectra:
        raise FormatError(f"{manifest_path}: manifest lists no spectra")
    n = len(spectra[0])
    for e, s in zip(man.spectra, spectra):
        if len(s) != n or not np.array_equal(s.wavelengths, spectra[0].wavelengths):
            raise FormatError(f"{e.path}: wavelength calibration differs from {man.spectra[0].path}")
        if not s.values.sum() > 0:
            raise FormatError(f"{e.path}: spectrum is empty")
    refs = [s for e, s in zip(man.spectra, spectra) if e.role == "reference"]
    return man, spectra, refs


def _params(man: DatasetManifest, k_max=None) -> AnalysisConfig:
    types = {f.name: (int if f.type in ("int", "Optional[int]") else float) for f in fields(AnalysisConfig)}
    params = _build(AnalysisConfig, man.analysis, "analysis.", types)
    if k_max is not None:
        params = AnalysisConfig(**{**params.__dict__, "k_max": int(k_max)})
    return params


def _long_table(rows_label: str, names: list, matrix: np.ndarray, wavelengths: np.ndarray) -> Table:
    return Table(
        [(rows_label, "int"), ("reference", "str"), ("wavelength_nm", "float"), ("value", "float")],
        [(i, names[i], lam, v) for i in range(len(matrix)) for lam, v in zip(wavelengths, matrix[i])],
    )


def kmeans_report(spectra, refs, params) -> Report:
    out = run_kmeans(spectra, refs, params)
    curve = out["curve"]
    elbow_rows = []
    for i, (k, res) in enumerate(curve):
        ratio = 1.0 if i == 0 or curve[i - 1][1] == 0 else res / curve[i - 1][1]
        elbow_rows.append((k, res, ratio))
    tables = {"elbow": Table([("k", "int"), ("residual", "float"), ("ratio_to_previous", "float")],
                             elbow_rows)}
    summary = [f"k-means elbow (best of {params.restarts} restarts, unit-sum spectra):"]
    summary += [f"  k={k}: residual {res:.6g}, ratio {ratio:.4f}" for k, res, ratio in elbow_rows]
    k_sel = out["k_selected"]
    summary.append(f"  ratio test (< {ELBOW_BEFORE} at the elbow, > {ELBOW_AFTER} after): "
                   + (f"k = {k_sel}" if k_sel else "no elbow found"))
    if "match" in out:
        ref_names = [r.label for r in refs]
        names = [ref_names[j] for j in out["match"]]
        tables["centroids"] = _long_table("cluster", names, out["centroids"], refs[0].wavelengths)
        tables["match"] = Table([("cluster", "int"), ("reference", "str"), ("cosine", "float")],
                                [(i, names[i], s) for i, s in enumerate(out["match_similarity"])])
        tables["assignments"] = Table(
            [("spectrum", "str"), ("label", "str"), ("cluster", "int"), ("matched", "str")],
            [(s.metadata.get("name", str(i)), s.label or "none", int(c), names[int(c)])
             for i, (s, c) in enumerate(zip(spectra, out["assignments"]))],
        )
        summary.append(f"k = {len(refs)} centroids matched to references:")
        summary += [f"  cluster {i} -> {names[i]} (cosine {s:.4f})"
                    for i, s in enumerate(out["match_similarity"])]
        summary.append("spectrum assignments:")
        summary += [f"  {row[0]}: cluster {row[2]} = {row[3]} (label {row[1]})"
                    for row in tables["assignments"].rows]
    return Report("kmeans", tables, summary)


def nmf_report(spectra, refs, params) -> Report:
    out = run_nmf(spectra, refs, params)
    res = out["result"]
    r = res.H.shape[0]
    ref_names = [s.label for s in refs]
    names = [ref_names[j] for j in out["match"]] if "match" in out else [f"c{i}" for i in range(r)]
    tables = {
        "fit": Table([("rank", "int"), ("residue_norm", "float"), ("iterations", "int")],
                     [(r, res.residue_norm, res.iterations)]),
        "components": _long_table("component", names, res.H, refs[0].wavelengths),
        "weights": Table(
            [("spectrum", "str"), ("label", "str")] + [(f"w{i}", "float") for i in range(r)]
            + [("dominant", "int"), ("matched", "str")],
            [(s.metadata.get("name", str(i)), s.label or "none", *res.W[i], d, names[d])
             for i, (s, d) in enumerate(zip(spectra, out["dominant"]))],
        ),
    }
    summary = [f"NMF rank {r}: residue norm {res.residue_norm:.6g} after {res.iterations} iterations"]
    if "match" in out:
        tables["match"] = Table([("component", "int"), ("reference", "str"), ("cosine", "float")],
                                [(i, names[i], s) for i, s in enumerate(out["match_similarity"])])
        summary += [f"  component {i} -> {names[i]} (cosine {s:.4f})"
                    for i, s in enumerate(out["match_similarity"])]
        agree = sum(row[-1] == row[1] for row in tables["weights"].rows)
        summary.append(f"dominant component agrees with the label for {agree}/{len(spectra)} spectra:")
    summary += [f"  {row[0]}: component {row[-2]} = {row[-1]} (label {row[1]})"
                for row in tables["weights"].rows]
    return Report("nmf", tables, summary)


def lda_report(spectra, params) -> Report:
    labels = [s.label for s in spectra]
    if any(lab is None for lab in labels):
        raise AnalysisError("LDA needs a label on every spectrum")
    out = run_lda(spectra, labels, params)
    res = out["result"]
    m = res.directions.shape[1]
    within = res.within_class_variance(labels).max(axis=0)
    tables = {
        "directions": Table([("direction", "int"), ("eigenvalue", "float"), ("max_within_variance", "float")],
                            [(j + 1, res.eigenvalues[j], within[j]) for j in range(m)]),
        "projection": Table(
            [("spectrum", "str"), ("label", "str")] + [(f"ld{j + 1}", "float") for j in range(m)]
            + [("predicted", "str")],
            [(s.metadata.get("name", str(i)), s.label, *res.projected[i], out["predicted"][i])
             for i, s in enumerate(spectra)],
        ),
        "confusion": Table([("true", "str")] + [(c, "int") for c in res.classes],
                           [(c, *out["confusion"][i]) for i, c in enumerate(res.classes)]),
    }
    correct = int(np.trace(out["confusion"]))
    summary = [f"LDA: {m} discriminant(s) for {len(res.classes)} classes; "
               f"nearest-mean classification {correct}/{len(spectra)} correct"]
    summary += [f"  LD{j + 1}: eigenvalue {res.eigenvalues[j]:.6g}, largest within-class variance "
                f"{within[j]:.4g}" for j in range(m)]
    summary += [f"  {row[0]}: {row[-1]} (label {row[1]})" for row in tables["projection"].rows]
    return Report("lda", tables, summary)


def cmd_analyze(manifest_path, method: str, out, k_max=None) -> dict:
    manifest_path = Path(manifest_path)
    man, spectra, refs = _load_dataset(manifest_path)
    params = _params(man, k_max)
    methods = METHODS if method == "all" else (method,)
    if method not in METHODS + ("all",):
        raise ConfigError(f"unknown method {method!r}")
    if not refs and ("kmeans" in methods or "nmf" in methods):
        raise AnalysisError("the manifest lists no reference spectra")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    try:
        for name in methods:
            if name == "kmeans":
                rep = kmeans_report(spectra, refs, params)
            elif name == "nmf":
                rep = nmf_report(spectra, refs, params)
            else:
                rep = lda_report(spectra, params)
            reports[name] = rep
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise AnalysisError(str(exc)) from exc
    summary = []
    for name, rep in reports.items():
        save_report(rep, out / f"{name}_report.txt")
        for tname, table in rep.tables.items():
            write_table_tsv(table, out / f"{name}_{tname}.tsv")
        summary += rep.summary + [""]
    atomic_write(out / "summary.txt", "\n".join(summary))
    log.info("analysis written to %s", out)
    return reports


# -------------------------------------------------------------- render


def cmd_render(map_path, out) -> Path:
    return render_map(load_map(map_path), out)


# ----------------------------------------------------- reproduce-paper


def cmd_reproduce(config_path, out, workers: int = 1) -> Path:
    """Imaging maps, dataset, all analyses and heatmaps in one tree."""
    cfg = load_config(config_path)
    out = Path(out)
    tmp = _staging(out)
    try:
        (tmp / ".ghostspec").write_text("reproduce-paper output\n")
        cmd_dataset(cfg.path, tmp / "dataset", workers)
        cmd_analyze(tmp / "dataset" / "manifest.txt", "all", tmp / "analysis")
        (tmp / "imaging").mkdir()
        (tmp / "figures").mkdir()
        for run in plan_runs(cfg, include_imaging=True):
            if run.kind != "imaging":
                continue
            scene = cfg.scene(run.scene)
            m = simulate_acquisition(cfg.source, scene.mask, cfg.detector, run.duration, run.seed,
                                     workers=workers, metadata={"name": run.name, "scene": run.scene})
            save_map(m, tmp / "imaging" / f"{run.name}.map")
            render_map(m, tmp / "figures" / f"{run.name}.ppm")
        for path in sorted((tmp / "dataset" / "maps").glob("*.map")):
            render_map(load_map(path), tmp / "figures" / f"{path.stem}.ppm")
        _replace_dir(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    log.info("reproduction written to %s", out)
    return out


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghostspec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one acquisition and write its map")
    s.add_argument("--config", help="run configuration (default: shipped config)")
    s.add_argument("--scene", required=True)
    s.add_argument("--duration-s", type=float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)

    d = sub.add_parser("dataset", help="simulate the reference and split-scene runs")
    d.add_argument("--config")
    d.add_argument("--out", required=True)
    d.add_argument("--workers", type=int, default=1)

    a = sub.add_parser("analyze", help="k-means, NMF and LDA on a dataset")
    a.add_argument("manifest")
    a.add_argument("--method", choices=METHODS + ("all",), default="all")
    a.add_argument("--out", required=True)
    a.add_argument("--k-max", type=int)

    r = sub.add_parser("render", help="write a map as a PPM heatmap")
    r.add_argument("map")
    r.add_argument("--out", required=True)

    rp = sub.add_parser("reproduce-paper", help="dataset + analyses + heatmaps in one go")
    rp.add_argument("--config")
    rp.add_argument("--out", required=True)
    rp.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.scene, args.duration_s, args.seed, args.out, args.workers)
        elif args.command == "dataset":
            cmd_dataset(args.config, args.out, args.workers)
        elif args.command == "analyze":
            cmd_analyze(args.manifest, args.method, args.out, args.k_max)
        elif args.command == "render":
            cmd_render(args.map, args.out)
        else:
            cmd_reproduce(args.config, args.out, args.workers)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except AnalysisError as exc:
        log.error("analysis failed: %s", exc)
        return EXIT_ANALYSIS
    except (OSError, FormatError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
