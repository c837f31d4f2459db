import pytest

from ghostspec.config import ConfigError, load_config, parse_config, parse_profile
from ghostspec.pipeline import plan_runs, region_rows
from ghostspec.scene import Bandpass, Blank, Neutral, transmission_at

MINIMAL = """
scene.blank.profile = blank
scene.blank.label = blank
plan.references = blank
"""


def minimal(extra=""):
    return MINIMAL + extra


def test_default_config_matches_protocol(default_config):
    cfg = default_config
    assert cfg.source.pump_wavelength == 405 and cfg.source.center_signal_wavelength == 810
    assert cfg.scene("imaging_nd").mask.magnification == 1.5
    assert cfg.plan.reference_duration_s == 3600
    assert cfg.plan.repetitions == 5
    assert dict(cfg.plan.imaging) == {"imaging_blank": 120.0, "imaging_nd": 180.0}
    runs = plan_runs(cfg)
    assert len(runs) == 3 + 2 * 5
    assert [r.seed for r in runs] == list(range(1000, 1013))
    assert len({r.name for r in plan_runs(cfg, include_imaging=True)}) == 15


def test_minimal_config_uses_defaults():
    cfg = parse_config(minimal())
    assert cfg.detector.n_spectral_pixels == 256
    assert cfg.scene("blank").label == "blank"


@pytest.mark.parametrize("text,msg", [
    ("source.pump_wavelength 405", "expected 'section.key = value'"),
    ("pump_wavelength = 405", "expected 'section.key = value'"),
    ("source.pump_wavelength = 405\nsource.pump_wavelength = 406", "duplicate key"),
    ("source.pump_wavelength = fast", "source.pump_wavelength: expected float"),
    ("source.colour = red", "unknown key"),
    ("laser.power = 1", "unknown section"),
    ("source.center_signal_wavelength = 300", r"\[source\]"),
    ("detector.n_spatial_pixels = 2.5", "expected int"),
    ("plan.split_scenes = nowhere", "undefined scene 'nowhere'"),
    ("scene.x.profile = bandpass 800", "bad profile"),
    ("scene.x.profile = blank\nscene.x.upper = blank", "cannot be combined"),
    ("scene.x.boundary_mm = 0\nscene.x.lower = blank", "missing upper"),
    ("scene.x.profile = neutral 2", "scene 'x'|bad profile"),
    ("scene.x.shape = round", "unknown key"),
    ("plan.repetitions = -1", ">= 0"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(minimal(text + "\n"))


def test_error_reports_line_number():
    with pytest.raises(ConfigError, match=r"^cfg:3: "):
        parse_config("# header\n\nbroken line\n", source_name="cfg")


def test_split_scene_needs_region_labels():
    text = minimal("scene.s.boundary_mm = 0\nscene.s.lower = blank\nscene.s.upper = neutral 0.5\n"
                   "plan.split_scenes = s\n")
    with pytest.raises(ConfigError, match="label_lower"):
        parse_config(text)


def test_profiles():
    assert parse_profile("blank") == Blank()
    assert parse_profile("neutral 0.5") == Neutral(0.5)
    assert parse_profile("bandpass 800 10") == Bandpass(800.0, 10.0, 1.0)
    assert parse_profile("BANDPASS 800 10 0.9") == Bandpass(800.0, 10.0, 0.9)
    with pytest.raises(ConfigError):
        parse_profile("")
    with pytest.raises(ConfigError):
        parse_profile("tabulated /nonexistent/curve.txt")


def test_tabulated_path_relative_to_config(tmp_path):
    (tmp_path / "curves").mkdir()
    (tmp_path / "curves" / "f.txt").write_text("# measured\n790 0\n810 1\n")
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(minimal("scene.t.profile = tabulated curves/f.txt\n"))
    cfg = load_config(cfg_path)
    assert transmission_at(cfg.scene("t").mask, 0.0, 800.0) == pytest.approx(0.5)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/run.cfg")


def test_digest_ignores_comments_and_order():
    a = parse_config(minimal("source.pair_rate = 10\nsource.beam_waist = 2\n"))
    b = parse_config("# c\n" + minimal("source.beam_waist = 2   # w\nsource.pair_rate = 10\n"))
    c = parse_config(minimal("source.pair_rate = 11\nsource.beam_waist = 2\n"))
    assert a.digest == b.digest != c.digest


def test_region_rows(default_config):
    det = default_config.detector
    lower, upper = region_rows(default_config.scene("splitA"), det, guard=2)
    # boundary at y = 0 falls on the edge between rows 63 and 64
    assert lower == (0, 62) and upper == (66, 128)
    with pytest.raises(ValueError):
        region_rows(default_config.scene("blank"), det)
