import json

import pytest

from mre_spring.config import (WORKERS_ENV, apply_overrides, default_run_config, gripper_materials,
                               load_run_config, resolve_library, resolve_workers)
from mre_spring.core.errors import ConfigError


def test_default_config_geometry():
    cfg = load_run_config()
    g = cfg.geometry.to_geometry()
    assert g.r_frame == pytest.approx(18e-3)
    assert g.d_pm == pytest.approx(20e-3)
    assert g.w == pytest.approx(15e-3)
    assert cfg.sweep.step_deg == 5.0
    assert cfg.spline.lam == "auto"
    assert cfg.deterministic
    assert cfg.geometry.anchor() is None


def test_overrides_parse_json_values():
    cfg = load_run_config(overrides=[
        "sweep.step_deg=10",
        "spline.lam=0.5",
        "materials.stripe=MRE_DS15",
        "geometry.anchor_mm=[0, -40]",
    ])
    assert cfg.sweep.step_deg == 10.0
    assert cfg.spline.lam == 0.5
    assert cfg.materials.stripe == "MRE_DS15"
    assert cfg.geometry.anchor() == pytest.approx((0.0, -40e-3))


def test_apply_overrides_creates_sections():
    data = apply_overrides({}, ["payload.friction_coeff=0.3"])
    assert data == {"payload": {"friction_coeff": 0.3}}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["no_equals_sign"])
    with pytest.raises(ConfigError):
        apply_overrides({"output_dir": "x"}, ["output_dir.sub=1"])


def test_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({
        "geometry": {"r_frame_mm": 20.0},
        "mesh": {"h_max_mm": 0.8},
    }), encoding="utf-8")
    cfg = load_run_config(path, ["geometry.n_fingers=4"])
    assert cfg.geometry.r_frame_mm == 20.0
    assert cfg.geometry.d_pm_mm == 20.0
    assert cfg.geometry.n_fingers == 4
    assert cfg.mesh.to_params().h_max == pytest.approx(0.8e-3)


def test_missing_geometry_section(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"mesh": {"h_max_mm": 1.0}}', encoding="utf-8")
    with pytest.raises(ConfigError, match="geometry"):
        load_run_config(path)


def test_json_syntax_error_reports_line(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{\n  "geometry": {},\n  "mesh": {"h_max_mm": }\n}', encoding="utf-8")
    with pytest.raises(ConfigError, match=r"run\.json:3:"):
        load_run_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "nope.json")


@pytest.mark.parametrize("override, field", [
    ("sweep.step_deg=0", "sweep.step_deg"),
    ("geometry.r_frame_mm=10", "geometry"),
    ("mesh.h_max_mm=30", "mesh"),
    ("spline.lam=-1", "spline"),
    ("geometry.colour=1", "geometry.colour"),
])
def test_validation_errors_name_the_field(override, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        load_run_config(overrides=[override])


def test_resolve_library_checks_names():
    cfg = load_run_config(overrides=["materials.stripe=MRE_XYZ"])
    with pytest.raises(ConfigError, match="materials.stripe"):
        resolve_library(cfg)


def test_gripper_materials_from_config():
    cfg = default_run_config()
    library = resolve_library(cfg)
    mats = gripper_materials(cfg, library)
    assert mats.stripe.name == "MRE_RTV"
    assert mats.magnet.is_magnet
    assert gripper_materials(cfg, library, "MRE_DS15").stripe.name == "MRE_DS15"


def test_material_overrides_in_config():
    cfg = load_run_config(overrides=['materials.overrides={"MRE_RTV": {"mu_r": 5.0}}'])
    assert resolve_library(cfg).model("MRE_RTV").mu_r == 5.0


def test_deterministic_forces_direct_solver():
    cfg = load_run_config(overrides=["solver.method=cg"])
    assert cfg.solver_options().method == "direct"
    relaxed = cfg.model_copy(update={"deterministic": False})
    assert relaxed.solver_options().method == "cg"


def test_config_hash_is_stable():
    a = default_run_config()
    b = load_run_config()
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != load_run_config(overrides=["sweep.step_deg=10"]).config_hash()


def test_resolve_workers_precedence():
    cfg = default_run_config()
    assert resolve_workers(None, cfg, {}) == 1
    assert resolve_workers(None, cfg, {WORKERS_ENV: "3"}) == 3
    assert resolve_workers(2, cfg, {WORKERS_ENV: "3"}) == 2
    with pytest.raises(ConfigError):
        resolve_workers(None, cfg, {WORKERS_ENV: "many"})
    with pytest.raises(ConfigError):
        resolve_workers(0, cfg, {})
