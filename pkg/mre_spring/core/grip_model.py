"""由扭矩与材料数据推算夹爪层面的指尖力、力-位移特性与最大载荷"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .geometry import GripperGeometry
from .materials import MaterialLibrary, MechanicalProperties

logger = logging.getLogger(__name__)

G0 = 9.81
MAX_FRICTION_COEFF = 2.0


@dataclass(frozen=True)
class FingerForceModel:
    """
    指尖力模型 F = T_plateau / lever_arm + k · δ

    Args:
        plateau_torque: 平台扭矩 (N·m)
        lever_arm: 磁体中心到接触点的有效力臂 (m)
        elastic_stiffness: 悬臂梁刚度 (N/m)
    """
    plateau_torque: float
    lever_arm: float
    elastic_stiffness: float = 0.0

    def __post_init__(self):
        if not self.lever_arm > 0:
            raise DomainError(f"lever_arm 必须为正数, 当前值: {self.lever_arm}")
        if self.elastic_stiffness < 0:
            raise DomainError(f"elastic_stiffness 不能为负, 当前值: {self.elastic_stiffness}")

    @property
    def magnetic_force(self) -> float:
        return self.plateau_torque / self.lever_arm


@dataclass(frozen=True)
class PayloadModel:
    """
    库仑摩擦载荷模型

    Args:
        friction_coeff: 摩擦系数 μ，允许 0（无摩擦时载荷为 0）
        n_fingers: 手指数量
        normal_force_per_finger: 每指法向力 (N)
    """
    friction_coeff: float
    n_fingers: int = 3
    normal_force_per_finger: float = 0.7

    def __post_init__(self):
        if not (0 <= self.friction_coeff <= MAX_FRICTION_COEFF):
            raise DomainError(
                f"friction_coeff 必须位于 [0, {MAX_FRICTION_COEFF}], 当前值: {self.friction_coeff}"
            )
        if self.n_fingers < 2:
            raise DomainError(f"n_fingers 至少为 2, 当前值: {self.n_fingers}")
        if self.normal_force_per_finger < 0:
            raise DomainError(f"normal_force_per_finger 不能为负, 当前值: {self.normal_force_per_finger}")


@dataclass(frozen=True)
class CapacityRow:
    material: str
    e_mod_mpa: float
    predicted_mass_g: float
    paper_mass_g: Optional[float]


def beam_stiffness(mech: MechanicalProperties, g: GripperGeometry,
                   free_length: Optional[float] = None) -> float:
    """悬臂梁端部刚度 k = 3EI/L³，I = w·t³/12"""
    length = g.finger_length if free_length is None else free_length
    if length <= 0:
        raise DomainError(f"悬臂长度必须为正数, 当前值: {length}")
    inertia = g.w * g.finger_thickness ** 3 / 12.0
    return 3.0 * mech.e_mod * inertia / length ** 3


def tip_force(f: FingerForceModel, deflection: float) -> float:
    if deflection < 0:
        raise DomainError(f"deflection 不能为负, 当前值: {deflection}")
    return f.magnetic_force + f.elastic_stiffness * deflection


def force_displacement_curve(f: FingerForceModel,
                             displacements: Sequence[float]) -> List[Tuple[float, float]]:
    """力-位移特性，位移需非负且严格递增"""
    x = np.asarray(displacements, dtype=float)
    if len(x) and (x.min() < 0 or np.any(np.diff(x) <= 0)):
        raise DomainError("位移网格必须非负且严格递增")
    return [(float(xi), tip_force(f, float(xi))) for xi in x]


def implied_plateau_torque(force: float, lever_arm: float) -> float:
    """由实测零位移指尖力反推平台扭矩"""
    if lever_arm <= 0:
        raise DomainError(f"lever_arm 必须为正数, 当前值: {lever_arm}")
    return force * lever_arm


def finger_force_model(g: GripperGeometry, mech: Optional[MechanicalProperties] = None, *,
                       plateau_torque: Optional[float] = None, force: Optional[float] = None,
                       lever_arm: Optional[float] = None) -> FingerForceModel:
    """
    构造指尖力模型；力臂缺省为接触圆半径

    plateau_torque 与 force 二选一，后者按力臂换算为扭矩。
    """
    arm = g.contact_radius if lever_arm is None else lever_arm
    if (plateau_torque is None) == (force is None):
        raise DomainError("plateau_torque 与 force 必须且只能给出一个")
    torque = plateau_torque if plateau_torque is not None else implied_plateau_torque(force, arm)
    k = beam_stiffness(mech, g) if mech is not None else 0.0
    return FingerForceModel(plateau_torque=torque, lever_arm=arm, elastic_stiffness=k)


@dataclass(frozen=True)
class ForceConsistency:
    """
    仿真平台扭矩换算的指尖磁力与零位移实测力的比较

    Args:
        plateau_torque: 仿真平台扭矩 (N·m)
        lever_arm: 力臂 (m)
        simulated_force: plateau_torque / lever_arm (N)
        measured_force: 实测零位移指尖力 (N)
    """
    plateau_torque: float
    lever_arm: float
    simulated_force: float
    measured_force: float

    @property
    def ratio(self) -> float:
        if self.measured_force == 0:
            return math.inf
        return self.simulated_force / self.measured_force

    @property
    def implied_torque(self) -> float:
        return implied_plateau_torque(self.measured_force, self.lever_arm)

    def to_dict(self) -> Dict[str, float]:
        return {
            "plateau_torque_mNm": self.plateau_torque * 1e3,
            "lever_arm_mm": self.lever_arm * 1e3,
            "simulated_force_n": self.simulated_force,
            "measured_force_n": self.measured_force,
            "implied_torque_mNm": self.implied_torque * 1e3,
            "force_ratio": self.ratio if math.isfinite(self.ratio) else None,
        }


def force_consistency(g: GripperGeometry, plateau_torque: float, measured_force: float,
                      lever_arm: Optional[float] = None) -> ForceConsistency:
    """由仿真平台扭矩构造指尖力模型，并与实测零位移力比较"""
    if measured_force < 0:
        raise DomainError(f"measured_force 不能为负, 当前值: {measured_force}")
    model = finger_force_model(g, plateau_torque=plateau_torque, lever_arm=lever_arm)
    result = ForceConsistency(
        plateau_torque=plateau_torque,
        lever_arm=model.lever_arm,
        simulated_force=model.magnetic_force,
        measured_force=measured_force,
    )
    logger.info(
        f"[ force_consistency ] 仿真指尖力 {result.simulated_force:.4f} N, "
        f"实测 {measured_force:.4f} N, 比值 {result.ratio:.3f}"
    )
    return result


def max_payload(p: PayloadModel, mech: MechanicalProperties, g: GripperGeometry,
                grip_deflection: float) -> float:
    """最大可提起质量 m = n·μ·(F_mag + k·δ)/g0 (kg)"""
    if grip_deflection < 0:
        raise DomainError(f"grip_deflection 不能为负, 当前值: {grip_deflection}")
    k = beam_stiffness(mech, g)
    normal = p.normal_force_per_finger + k * grip_deflection
    return p.n_fingers * p.friction_coeff * normal / G0


def calibrate_friction(target_mass: float, mech: MechanicalProperties, g: GripperGeometry,
                       grip_deflection: float, n_fingers: int = 3,
                       normal_force_per_finger: float = 0.7) -> float:
    """单点标定：使 max_payload 恰好等于目标质量 (kg) 的 μ"""
    if target_mass < 0:
        raise DomainError(f"目标质量不能为负, 当前值: {target_mass}")
    normal = normal_force_per_finger + beam_stiffness(mech, g) * grip_deflection
    if normal <= 0:
        raise DomainError("法向力为 0, 无法标定摩擦系数")
    mu = target_mass * G0 / (n_fingers * normal)
    if mu > MAX_FRICTION_COEFF:
        raise DomainError(f"标定得到 μ={mu:.3f} 超过上限 {MAX_FRICTION_COEFF}")
    logger.info(f"[ calibrate_friction ] 目标 {target_mass * 1e3:.1f} g -> μ={mu:.4f}")
    return mu


def capacity_table(library: MaterialLibrary, g: GripperGeometry, *, grip_deflection: float,
                   n_fingers: int = 3, normal_force_per_finger: float = 0.7,
                   friction_coeff: Optional[float] = None,
                   calibrate_on: Optional[str] = None) -> List[CapacityRow]:
    """
    对材料库中所有可用作手指的 MRE 计算最大载荷

    friction_coeff 为 None 时以 calibrate_on 材料的实测质量标定 μ。
    """
    names = library.gripper_materials()
    if friction_coeff is None:
        if calibrate_on is None:
            raise DomainError("未给出 friction_coeff 时必须指定 calibrate_on")
        entry = library[calibrate_on]
        if entry.mechanical is None or entry.paper_mass_g is None:
            raise DomainError(f"标定材料 '{calibrate_on}' 缺少力学数据或实测质量")
        friction_coeff = calibrate_friction(
            entry.paper_mass_g / 1e3, entry.mechanical, g, grip_deflection,
            n_fingers, normal_force_per_finger,
        )
    payload = PayloadModel(friction_coeff, n_fingers, normal_force_per_finger)
    rows = []
    for name in names:
        entry = library[name]
        mass = max_payload(payload, entry.mechanical, g, grip_deflection)
        rows.append(CapacityRow(
            material=name,
            e_mod_mpa=entry.mechanical.e_mod / 1e6,
            predicted_mass_g=mass * 1e3,
            paper_mass_g=entry.paper_mass_g,
        ))
    return rows
