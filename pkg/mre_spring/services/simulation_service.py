import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..config import RunConfig, gripper_materials, resolve_library
from ..core.energy_torque import (CoenergyCurve, PlateauStats, SplineModel, TorqueCurve,
                                  default_theta_grid, fit_spline, plateau_statistics,
                                  sweep_coenergy, torque_curve, torque_fd_oracle)
from ..core.errors import InsufficientDataError
from ..core.geometry import GraspReport, grasp_report, wrap_path
from ..core.grip_model import CapacityRow, ForceConsistency, capacity_table, force_consistency
from ..core.magnetostatics import FieldSolution, solve_field
from ..core.mesh import Mesh, build_geometry_outline, triangulate
from .result_cache import ResultCache

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SweepResult:
    curve: CoenergyCurve
    spline: SplineModel
    torque: TorqueCurve
    fd_torque: TorqueCurve
    plateau: Optional[PlateauStats]
    fd_rms: float
    integral: float
    rise: float
    force_check: Optional[ForceConsistency] = None

    @property
    def integral_rel_error(self) -> float:
        if self.rise == 0:
            return 0.0 if self.integral == 0 else math.inf
        return abs(self.integral - self.rise) / abs(self.rise)

    def summary(self) -> Dict[str, Any]:
        plateau = None
        if self.plateau is not None:
            plateau = {
                "mean_mNm": self.plateau.mean * 1e3,
                "std_mNm": self.plateau.std * 1e3,
                "cv": self.plateau.cv,
                "window_deg": [math.degrees(v) for v in self.plateau.window],
            }
        return {
            "n_samples": len(self.curve),
            "spline": {"method": self.spline.method, "lam": self.spline.lam},
            "plateau": plateau,
            "fd_rms_mNm": self.fd_rms * 1e3,
            "coenergy_rise_J": self.rise,
            "torque_integral_J": self.integral,
            "integral_rel_error": self.integral_rel_error,
            "finger_force": None if self.force_check is None else self.force_check.to_dict(),
        }


class SimulationService:
    """CLI 与 HTTP 接口共用的仿真编排"""

    def __init__(self, config: RunConfig, cache_dir: Optional[Union[str, Path]] = None,
                 workers: int = 1):
        self.config = config
        self.geometry = config.geometry.to_geometry()
        self.library = resolve_library(config)
        self.cache = ResultCache(cache_dir) if cache_dir is not None else None
        self.workers = workers
        self.solve_count = 0

    def derive(self, **sections) -> "SimulationService":
        """替换若干配置节，得到共享同一缓存的新服务"""
        config = self.config.model_copy(update=sections)
        derived = SimulationService(config, workers=self.workers)
        derived.cache = self.cache
        return derived

    def geometry_report(self) -> GraspReport:
        return grasp_report(self.geometry)

    def theta_grid(self) -> np.ndarray:
        s = self.config.sweep
        return default_theta_grid(self.geometry, step_deg=s.step_deg, stop_fraction=s.stop_fraction,
                                  start_deg=s.start_deg, stop_deg=s.stop_deg)

    def run_sweep(self, stripe: Optional[str] = None) -> SweepResult:
        """
        扫描 -> 样条 -> 扭矩，并用差分结果做对照

        Args:
            stripe: 条带材料名，None 时使用配置中的 materials.stripe
        """
        cfg = self.config
        curve = sweep_coenergy(
            self.geometry,
            gripper_materials(cfg, self.library, stripe),
            cfg.mesh.to_params(),
            self.theta_grid(),
            solver_opts=cfg.solver_options(),
            excitation=cfg.sweep.excitation,
            anchor=cfg.geometry.anchor(),
            cache=self.cache,
            workers=self.workers,
        )
        self.solve_count += curve.sweep_meta["solve_count"]
        spline = fit_spline(curve, cfg.spline.lam)
        torque = torque_curve(spline, curve.thetas)
        fd = torque_fd_oracle(curve)

        try:
            plateau = plateau_statistics(torque)
        except InsufficientDataError as e:
            logger.warning(f"[ run_sweep ] {e}")
            plateau = None
        interior = slice(1, -1) if len(curve) > 2 else slice(None)
        fd_rms = float(np.sqrt(np.mean((torque.t_co[interior] - fd.t_co[interior]) ** 2)))
        integral = spline.torque_integral(float(curve.thetas[0]), float(curve.thetas[-1]))
        rise = float(curve.w_co[-1] - curve.w_co[0])
        force_check = None
        if plateau is not None:
            force_check = force_consistency(self.geometry, plateau.mean, cfg.payload.normal_force_n,
                                            lever_arm=self.lever_arm())
        result = SweepResult(curve, spline, torque, fd, plateau, fd_rms, integral, rise, force_check)
        if plateau is not None:
            logger.info(
                f"[ run_sweep ] 平台扭矩 {plateau.mean * 1e3:.3f} mN·m, CV={plateau.cv:.3f}, "
                f"差分对照 RMS {fd_rms * 1e3:.3f} mN·m"
            )
        return result

    def lever_arm(self) -> Optional[float]:
        """配置的力臂 (m)，None 表示取接触圆半径"""
        mm = self.config.payload.lever_arm_mm
        return None if mm is None else mm * 1e-3

    def capacity(self) -> List[CapacityRow]:
        cfg = self.config
        return capacity_table(
            self.library,
            self.geometry,
            grip_deflection=cfg.payload.grip_deflection_mm * 1e-3,
            n_fingers=cfg.payload_fingers(),
            normal_force_per_finger=cfg.payload.normal_force_n,
            friction_coeff=cfg.payload.friction_coeff,
            calibrate_on=cfg.payload.calibrate_on,
        )

    def mesh_at(self, theta_deg: float) -> Mesh:
        params = self.config.mesh.to_params()
        path = wrap_path(self.geometry, math.radians(theta_deg), self.config.geometry.anchor())
        return triangulate(build_geometry_outline(self.geometry, path, params), params)

    def field_at(self, theta_deg: float) -> FieldSolution:
        """单个 θ 的场解，永磁体取材料库中的磁化方向"""
        mesh = self.mesh_at(theta_deg)
        materials = gripper_materials(self.config, self.library).region_map()
        sol = solve_field(mesh, materials, self.config.solver_options())
        self.solve_count += 1
        return sol
