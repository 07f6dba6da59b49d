import dataclasses

import numpy as np
import pytest

from mre_spring.core.errors import ConfigError, DomainError
from mre_spring.core.grip_model import (G0, FingerForceModel, PayloadModel, beam_stiffness,
                                        calibrate_friction, capacity_table, finger_force_model,
                                        force_consistency, force_displacement_curve,
                                        implied_plateau_torque, max_payload, tip_force)
from mre_spring.core.materials import MechanicalProperties

RTV = MechanicalProperties(0.81e6, 1.64e6)
MS10 = MechanicalProperties(0.78e6, 0.93e6, 4.04e6)
DS15 = MechanicalProperties(0.36e6, 0.48e6, 2.24e6)


def test_beam_stiffness_rtv(default_geometry):
    k = beam_stiffness(RTV, default_geometry)
    assert k == pytest.approx(3 * 0.81e6 * 3.375e-11 / 2.16e-4, rel=1e-12)
    assert k == pytest.approx(0.380, rel=1e-2)


def test_beam_stiffness_cubic_in_thickness(default_geometry):
    thick = dataclasses.replace(default_geometry, finger_thickness=6e-3)
    assert beam_stiffness(RTV, thick) == pytest.approx(8 * beam_stiffness(RTV, default_geometry), rel=1e-12)


def test_beam_stiffness_free_length(default_geometry):
    short = beam_stiffness(RTV, default_geometry, free_length=30e-3)
    assert short == pytest.approx(8 * beam_stiffness(RTV, default_geometry), rel=1e-12)
    with pytest.raises(DomainError):
        beam_stiffness(RTV, default_geometry, free_length=0.0)


def test_tip_force_superposition():
    f = FingerForceModel(plateau_torque=8.05e-3, lever_arm=11.5e-3, elastic_stiffness=0.38)
    assert tip_force(f, 0.0) == pytest.approx(0.7)
    assert tip_force(f, 2e-3) == pytest.approx(0.7 + 0.38 * 2e-3)
    assert tip_force(FingerForceModel(0.0, 11.5e-3), 5e-3) == 0.0
    with pytest.raises(DomainError):
        tip_force(f, -1e-3)


def test_force_model_validation():
    with pytest.raises(DomainError):
        FingerForceModel(1e-3, lever_arm=0.0)
    with pytest.raises(DomainError):
        FingerForceModel(1e-3, lever_arm=1e-2, elastic_stiffness=-1.0)


def test_implied_plateau_torque():
    assert implied_plateau_torque(0.7, 11.5e-3) == pytest.approx(8.05e-3)


def test_finger_force_model_from_measured_force(default_geometry):
    f = finger_force_model(default_geometry, RTV, force=0.7)
    assert f.lever_arm == pytest.approx(11.5e-3)
    assert f.plateau_torque == pytest.approx(8.05e-3)
    assert f.elastic_stiffness == pytest.approx(beam_stiffness(RTV, default_geometry))
    with pytest.raises(DomainError):
        finger_force_model(default_geometry, RTV)
    with pytest.raises(DomainError):
        finger_force_model(default_geometry, RTV, force=0.7, plateau_torque=1e-3)



def test_force_consistency_with_measured_force(default_geometry):
    check = force_consistency(default_geometry, plateau_torque=8.05e-3, measured_force=0.7)
    assert check.lever_arm == pytest.approx(11.5e-3)
    assert check.simulated_force == pytest.approx(0.7)
    assert check.ratio == pytest.approx(1.0)
    assert check.implied_torque == pytest.approx(8.05e-3)
    data = check.to_dict()
    assert data["plateau_torque_mNm"] == pytest.approx(8.05)
    assert data["force_ratio"] == pytest.approx(1.0)


def test_force_consistency_custom_lever_arm(default_geometry):
    check = force_consistency(default_geometry, plateau_torque=10e-3, measured_force=0.7, lever_arm=20e-3)
    assert check.simulated_force == pytest.approx(0.5)
    assert check.ratio == pytest.approx(0.5 / 0.7)
    assert force_consistency(default_geometry, 1e-3, 0.0).to_dict()["force_ratio"] is None
    with pytest.raises(DomainError):
        force_consistency(default_geometry, 1e-3, -0.1)

def test_force_displacement_curve(default_geometry):
    grid = np.arange(11) * 1e-3
    flat = force_displacement_curve(finger_force_model(default_geometry, force=0.7), grid)
    assert len(flat) == 11
    assert all(force == pytest.approx(0.7) for _, force in flat)

    rtv = force_displacement_curve(finger_force_model(default_geometry, RTV, force=0.7), grid)
    ds15 = force_displacement_curve(finger_force_model(default_geometry, DS15, force=0.7), grid)
    xs = [x for x, _ in rtv]
    assert xs == sorted(xs)
    forces = np.array([f for _, f in rtv])
    assert np.all(np.diff(forces) >= 0)
    diff = np.abs(forces - np.array([f for _, f in ds15])) / forces
    assert diff.max() < 0.05

    with pytest.raises(DomainError):
        force_displacement_curve(finger_force_model(default_geometry, force=0.7), [0.0, 2e-3, 1e-3])


def test_zero_friction_lifts_nothing(default_geometry):
    p = PayloadModel(friction_coeff=0.0)
    assert max_payload(p, RTV, default_geometry, 2e-3) == 0.0


def test_payload_validation():
    with pytest.raises(DomainError):
        PayloadModel(friction_coeff=2.5)
    with pytest.raises(DomainError):
        PayloadModel(friction_coeff=0.5, n_fingers=1)


def test_calibration_reproduces_rtv_mass(default_geometry):
    mu = calibrate_friction(97.4e-3, RTV, default_geometry, 2e-3)
    assert mu == pytest.approx(0.455, abs=1e-3)
    mass = max_payload(PayloadModel(mu), RTV, default_geometry, 2e-3)
    assert mass == pytest.approx(97.4e-3, rel=1e-12)
    with pytest.raises(DomainError):
        calibrate_friction(10.0, RTV, default_geometry, 2e-3)


def test_payload_monotone(default_geometry):
    g = default_geometry
    base = max_payload(PayloadModel(0.4), RTV, g, 2e-3)
    assert max_payload(PayloadModel(0.5), RTV, g, 2e-3) > base
    assert max_payload(PayloadModel(0.4, n_fingers=4), RTV, g, 2e-3) > base
    assert max_payload(PayloadModel(0.4, normal_force_per_finger=0.8), RTV, g, 2e-3) > base
    masses = [max_payload(PayloadModel(0.4), m, g, 2e-3) for m in (RTV, MS10, DS15)]
    assert masses[0] > masses[1] > masses[2]
    assert masses[0] == pytest.approx(3 * 0.4 * (0.7 + beam_stiffness(RTV, g) * 2e-3) / G0)


def test_capacity_table_calibrated(library, default_geometry):
    rows = capacity_table(library, default_geometry, grip_deflection=2e-3, calibrate_on="MRE_RTV")
    assert [r.material for r in rows] == ["MRE_RTV", "MRE_MS10", "MRE_DS15"]
    assert rows[0].predicted_mass_g == pytest.approx(97.4, rel=1e-9)
    assert rows[0].predicted_mass_g > rows[1].predicted_mass_g > rows[2].predicted_mass_g
    assert [r.paper_mass_g for r in rows] == [97.4, 86.5, 40.2]
    assert rows[2].e_mod_mpa == pytest.approx(0.36)


def test_capacity_table_zero_friction(library, default_geometry):
    rows = capacity_table(library, default_geometry, grip_deflection=2e-3, friction_coeff=0.0)
    assert all(r.predicted_mass_g == 0.0 for r in rows)


def test_capacity_table_needs_calibration_source(library, default_geometry):
    with pytest.raises(DomainError):
        capacity_table(library, default_geometry, grip_deflection=2e-3)
    with pytest.raises(DomainError):
        capacity_table(library, default_geometry, grip_deflection=2e-3, calibrate_on="NdFeB")
    with pytest.raises(ConfigError):
        capacity_table(library, default_geometry, grip_deflection=2e-3, calibrate_on="MRE_XYZ")
