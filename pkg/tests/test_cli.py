import hashlib
from pathlib import Path

import numpy as np
import pytest

from ghostspec import cli
from ghostspec.config import default_config_path
from ghostspec.io import load_manifest, load_map, load_report, load_spectrum
from ghostspec.render import read_ppm


def fast_config(tmp_path, **overrides):
    """The shipped config with short acquisitions."""
    settings = {"plan.reference_duration_s": "200", "plan.split_duration_s": "200",
                "plan.imaging": "imaging_blank:5 imaging_nd:5", **overrides}
    lines = []
    for line in default_config_path().read_text().splitlines():
        key = line.split("=", 1)[0].strip()
        lines.append(f"{key} = {settings[key]}" if key in settings else line)
    path = tmp_path / "fast.cfg"
    path.write_text("\n".join(lines) + "\n")
    return path


def tree_digest(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_simulate_shipped_protocols(tmp_path):
    cfg = fast_config(tmp_path)
    for scene, dur in [("imaging_blank", 120), ("imaging_nd", 180), ("filterA", 3600)]:
        out = tmp_path / f"{scene}.map"
        assert cli.main(["-q", "simulate", "--config", str(cfg), "--scene", scene, "--duration-s", str(dur),
                         "--seed", "1", "--out", str(out)]) == 0
        m = load_map(out)
        assert m.acquisition_time == dur and m.seed == 1 and m.total > 0


def test_simulate_errors(tmp_path):
    cfg = fast_config(tmp_path)
    base = ["-q", "simulate", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "x.map")]
    assert cli.main(base + ["--scene", "nowhere", "--duration-s", "1"]) == 3
    assert cli.main(base + ["--scene", "blank", "--duration-s", "-1"]) == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("source.pump_wavelength = 900\n")
    assert cli.main(["-q", "simulate", "--config", str(bad), "--scene", "blank", "--duration-s", "1",
                     "--seed", "1", "--out", str(tmp_path / "x.map")]) == 3
    assert cli.main(["-q", "simulate", "--config", str(tmp_path / "missing.cfg"), "--scene", "blank",
                     "--duration-s", "1", "--seed", "1", "--out", str(tmp_path / "x.map")]) == 3
    assert cli.main(base[:-1] + [str(tmp_path / "no" / "dir" / "x.map"), "--scene", "blank",
                                 "--duration-s", "1"]) == 4
    assert not (tmp_path / "x.map").exists()
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--scene", "blank"])
    assert exc.value.code == 2


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("ds")
    out = tmp / "dataset"
    assert cli.main(["-q", "dataset", "--config", str(fast_config(tmp)), "--out", str(out)]) == 0
    return out


def test_dataset_layout(dataset_dir):
    man = load_manifest(dataset_dir / "manifest.txt")
    assert len(man.runs) == 13
    assert len(man.spectra) == 23
    assert sum(e.role == "reference" for e in man.spectra) == 3
    labels = [e.label for e in man.spectra]
    assert labels.count("blank") == 11 and labels.count("filterA") == 6 and labels.count("filterB") == 6
    for e in man.spectra:
        s = load_spectrum(dataset_dir / e.path)
        run = next(r for r in man.runs if r.name == e.run)
        m = load_map(dataset_dir / run.map_path)
        assert np.array_equal(s.values, m.counts[e.row_start:e.row_stop].sum(axis=0))


def test_dataset_rerun_identical(tmp_path, dataset_dir):
    out = tmp_path / "again"
    assert cli.main(["-q", "dataset", "--config", str(fast_config(tmp_path)), "--out", str(out)]) == 0
    assert tree_digest(out) == tree_digest(dataset_dir)


def test_zero_repetitions(tmp_path):
    out = tmp_path / "ds"
    cfg = fast_config(tmp_path, **{"plan.repetitions": "0"})
    assert cli.main(["-q", "dataset", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(load_manifest(out / "manifest.txt").spectra) == 3


def test_dataset_failure_leaves_nothing(tmp_path, monkeypatch):
    out = tmp_path / "ds"

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "save_spectrum", boom)
    assert cli.main(["-q", "dataset", "--config", str(fast_config(tmp_path)), "--out", str(out)]) == 4
    assert sorted(p.name for p in tmp_path.iterdir()) == ["fast.cfg"]


def test_dataset_refuses_foreign_directory(tmp_path):
    out = tmp_path / "ds"
    out.mkdir()
    (out / "precious.txt").write_text("keep")
    cfg = fast_config(tmp_path, **{"plan.repetitions": "0"})
    assert cli.main(["-q", "dataset", "--config", str(cfg), "--out", str(out)]) == 4
    assert (out / "precious.txt").read_text() == "keep"


def test_analyze_all(tmp_path, dataset_dir):
    out = tmp_path / "an"
    assert cli.main(["-q", "analyze", str(dataset_dir / "manifest.txt"), "--method", "all", "--out", str(out)]) == 0
    km = load_report(out / "kmeans_report.txt")
    assert km.tables["elbow"].column("k") == [1, 2, 3, 4, 5, 6]
    assert sorted(km.tables["match"].column("reference")) == ["blank", "filterA", "filterB"]
    nm = load_report(out / "nmf_report.txt")
    assert len(nm.tables["weights"].rows) == 23
    ld = load_report(out / "lda_report.txt")
    assert len(ld.tables["directions"].rows) == 2
    assert (out / "kmeans_elbow.tsv").read_text().startswith("k:int\tresidual:float\tratio_to_previous:float\n")
    summary = (out / "summary.txt").read_text()
    assert "ratio test" in summary and "LDA" in summary


def test_analyze_single_method_and_k_max(tmp_path, dataset_dir):
    out = tmp_path / "an"
    assert cli.main(["-q", "analyze", str(dataset_dir / "manifest.txt"), "--method", "kmeans",
                     "--k-max", "4", "--out", str(out)]) == 0
    assert load_report(out / "kmeans_report.txt").tables["elbow"].column("k") == [1, 2, 3, 4]
    assert not (out / "nmf_report.txt").exists()


def test_analyze_inconsistent_manifest(tmp_path, dataset_dir):
    import shutil

    ds = tmp_path / "ds"
    shutil.copytree(dataset_dir, ds)
    spec = next((ds / "spectra").iterdir())
    spec.write_text(spec.read_text().replace("label: ", "label: x"))
    assert cli.main(["-q", "analyze", str(ds / "manifest.txt"), "--out", str(tmp_path / "an")]) == 4
    assert cli.main(["-q", "analyze", str(tmp_path / "none.txt"), "--out", str(tmp_path / "an")]) == 4


def test_analysis_failure_exit_code(tmp_path, dataset_dir):
    import shutil

    ds = tmp_path / "ds"
    shutil.copytree(dataset_dir, ds)
    text = (ds / "manifest.txt").read_text().replace("analysis.nmf_rank: 3", "analysis.nmf_rank: 999")
    (ds / "manifest.txt").write_text(text)
    assert cli.main(["-q", "analyze", str(ds / "manifest.txt"), "--method", "nmf",
                     "--out", str(tmp_path / "an")]) == 5


def test_render(tmp_path, dataset_dir):
    out = tmp_path / "ref.ppm"
    assert cli.main(["-q", "render", str(dataset_dir / "maps" / "ref_blank.map"), "--out", str(out)]) == 0
    assert read_ppm(out).shape == (128, 256, 3)
    (tmp_path / "bad.map").write_text("format: ghostspec-map 1\n")
    assert cli.main(["-q", "render", str(tmp_path / "bad.map"), "--out", str(out)]) == 4


def test_reproduce_tree(tmp_path):
    out = tmp_path / "repro"
    assert cli.main(["-q", "reproduce-paper", "--config", str(fast_config(tmp_path)), "--out", str(out)]) == 0
    names = set(tree_digest(out))
    assert "dataset/manifest.txt" in names and "analysis/summary.txt" in names
    assert {"imaging/imaging_blank_5s.map", "imaging/imaging_nd_5s.map",
            "figures/imaging_nd_5s.ppm", "figures/imaging_nd_5s.ppm.axes.txt"} <= names
    assert sum(n.startswith("figures/") and n.endswith(".ppm") for n in names) == 15
