"""运行配置：JSON 文件 + --set 覆盖，pydantic 校验

配置文件中长度以毫米 (*_mm)、角度以度 (*_deg) 表示，只在构造内核对象时
换算为 SI 单位与弧度。
"""
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core.energy_torque import GripperMaterials
from .core.errors import ConfigError
from .core.geometry import GripperGeometry
from .core.magnetostatics import SolverOptions
from .core.materials import MaterialLibrary, load_material_library
from .core.mesh import MeshParams

logger = logging.getLogger(__name__)

MM = 1e-3
WORKERS_ENV = "MRE_SPRING_WORKERS"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryConfig(_Section):
    r_frame_mm: float = Field(18.0, gt=0, description="安装框架半径")
    d_pm_mm: float = Field(20.0, gt=0, description="永磁体外径")
    w_mm: float = Field(15.0, gt=0, description="手指宽度")
    finger_length_mm: float = Field(60.0, gt=0)
    finger_thickness_mm: float = Field(3.0, gt=0)
    n_fingers: int = Field(3, ge=2)
    wrap_gap_deg: float = Field(5.0, gt=0, lt=360)
    anchor_mm: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def _magnets_do_not_meet(self):
        if self.r_frame_mm <= self.d_pm_mm / 2:
            raise ValueError(f"r_frame_mm ({self.r_frame_mm}) 必须大于 d_pm_mm/2 ({self.d_pm_mm / 2})")
        return self

    def to_geometry(self) -> GripperGeometry:
        return GripperGeometry(
            r_frame=self.r_frame_mm * MM,
            d_pm=self.d_pm_mm * MM,
            w=self.w_mm * MM,
            finger_length=self.finger_length_mm * MM,
            finger_thickness=self.finger_thickness_mm * MM,
            n_fingers=self.n_fingers,
            wrap_gap=math.radians(self.wrap_gap_deg),
        )

    def anchor(self) -> Optional[Tuple[float, float]]:
        if self.anchor_mm is None:
            return None
        return (self.anchor_mm[0] * MM, self.anchor_mm[1] * MM)


class MaterialsConfig(_Section):
    library: Optional[str] = None
    air: str = "air"
    stripe: str = "MRE_RTV"
    magnet: str = "NdFeB"
    overrides: Dict[str, Dict[str, Any]] = Field(default_factory=dict)


class MeshConfig(_Section):
    h_max_mm: float = Field(1.0, gt=0)
    h_air_mm: float = Field(20.0, gt=0)
    air_radius_factor: float = Field(5.0, ge=3)
    min_angle_deg: float = Field(20.0, gt=0, le=34)
    near_factor: float = Field(4.0, ge=1)

    @model_validator(mode="after")
    def _fine_not_coarser_than_air(self):
        if self.h_max_mm > self.h_air_mm:
            raise ValueError(f"h_max_mm ({self.h_max_mm}) 不能大于 h_air_mm ({self.h_air_mm})")
        return self

    def to_params(self) -> MeshParams:
        return MeshParams(
            h_max=self.h_max_mm * MM,
            h_air=self.h_air_mm * MM,
            air_radius_factor=self.air_radius_factor,
            min_angle=self.min_angle_deg,
            near_factor=self.near_factor,
        )


class SweepConfig(_Section):
    start_deg: float = Field(0.0, ge=0)
    stop_deg: Optional[float] = Field(None, gt=0, description="None 表示 stop_fraction·θ_max")
    step_deg: float = Field(5.0, gt=0)
    stop_fraction: float = Field(0.98, gt=0, le=1)
    excitation: Literal["isotropic", "fixed"] = "isotropic"


class SplineConfig(_Section):
    lam: Union[Literal["auto"], float] = "auto"

    @model_validator(mode="after")
    def _non_negative(self):
        if isinstance(self.lam, float) and (self.lam < 0 or not math.isfinite(self.lam)):
            raise ValueError(f"lam 必须为 'auto' 或非负数, 当前值: {self.lam}")
        return self


class SolverConfig(_Section):
    method: Literal["direct", "cg"] = "direct"
    rtol: float = Field(1e-10, gt=0, lt=1)
    preconditioner: Literal["jacobi", "ilu"] = "jacobi"
    max_iter: Optional[int] = Field(None, gt=0)


class PayloadConfig(_Section):
    friction_coeff: Optional[float] = Field(None, ge=0, le=2, description="None 表示按 calibrate_on 标定")
    n_fingers: Optional[int] = Field(None, ge=2, description="None 表示取 geometry.n_fingers")
    grip_deflection_mm: float = Field(2.0, ge=0)
    normal_force_n: float = Field(0.7, ge=0, description="每指零位移实测力")
    calibrate_on: str = "MRE_RTV"
    lever_arm_mm: Optional[float] = Field(None, gt=0)


class RunConfig(_Section):
    geometry: GeometryConfig
    materials: MaterialsConfig = Field(default_factory=MaterialsConfig)
    mesh: MeshConfig = Field(default_factory=MeshConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    spline: SplineConfig = Field(default_factory=SplineConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    payload: PayloadConfig = Field(default_factory=PayloadConfig)
    output_dir: str = "results"
    workers: int = Field(1, ge=1)
    deterministic: bool = True

    def solver_options(self) -> SolverOptions:
        """确定性模式下强制使用直接法"""
        method = "direct" if self.deterministic else self.solver.method
        return SolverOptions(
            method=method,
            rtol=self.solver.rtol,
            max_iter=self.solver.max_iter,
            preconditioner=self.solver.preconditioner,
        )

    def payload_fingers(self) -> int:
        return self.payload.n_fingers or self.geometry.n_fingers

    def config_hash(self) -> str:
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def default_run_config() -> RunConfig:
    """第一版夹爪参数（框架半径 18 mm、磁体直径 20 mm、宽 15 mm）"""
    return RunConfig(geometry=GeometryConfig())


def _parse_override_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    应用 --set dotted.key=value 覆盖项；value 先按 JSON 解析，失败则作为字符串
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"覆盖项格式应为 key=value, 当前: '{item}'")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"覆盖项缺少键名: '{item}'")
        node = data
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = {}
                node[part] = child
            if not isinstance(child, dict):
                raise ConfigError(f"覆盖项 '{key}' 路径上的 '{part}' 不是配置节")
            node = child
        node[parts[-1]] = _parse_override_value(raw.strip())
    return data


def format_validation_error(e: ValidationError) -> str:
    lines = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Sequence[str] = ()) -> RunConfig:
    """
    读取并校验运行配置

    Args:
        path: JSON 配置文件，None 时使用默认配置
        overrides: --set 覆盖项

    Returns:
        RunConfig

    Raises:
        ConfigError: 文件缺失、JSON 语法错误（带行号）或字段校验失败（带字段路径）
    """
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"配置文件不存在: {path}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}:{e.colno}: JSON 语法错误: {e.msg}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: 顶层必须是 JSON 对象")
    else:
        data = default_run_config().model_dump(mode="json")

    data = apply_overrides(data, overrides)
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"配置校验失败: {format_validation_error(e)}")
    logger.debug(f"[ load_run_config ] 配置哈希 {cfg.config_hash()[:12]}")
    return cfg


def resolve_library(cfg: RunConfig) -> MaterialLibrary:
    """加载材料库并确认配置引用的材料都存在"""
    library = load_material_library(cfg.materials.library, cfg.materials.overrides)
    referenced = {
        "materials.air": cfg.materials.air,
        "materials.stripe": cfg.materials.stripe,
        "materials.magnet": cfg.materials.magnet,
    }
    if cfg.payload.friction_coeff is None:
        referenced["payload.calibrate_on"] = cfg.payload.calibrate_on
    missing = [f"{field}={name}" for field, name in referenced.items() if name not in library]
    if missing:
        raise ConfigError(f"材料库中不存在: {', '.join(missing)}; 可用: {sorted(library)}")
    return library


def gripper_materials(cfg: RunConfig, library: MaterialLibrary,
                      stripe: Optional[str] = None) -> GripperMaterials:
    return GripperMaterials(
        air=library.model(cfg.materials.air),
        stripe=library.model(stripe or cfg.materials.stripe),
        magnet=library.model(cfg.materials.magnet),
    )


def resolve_workers(cli_value: Optional[int], cfg: RunConfig, environ: Dict[str, str]) -> int:
    """--workers 优先，其次环境变量，最后配置文件"""
    if cli_value is not None:
        workers = cli_value
    elif environ.get(WORKERS_ENV):
        try:
            workers = int(environ[WORKERS_ENV])
        except ValueError:
            raise ConfigError(f"环境变量 {WORKERS_ENV} 必须为整数, 当前值: {environ[WORKERS_ENV]!r}")
    else:
        workers = cfg.workers
    if workers < 1:
        raise ConfigError(f"workers 必须 >= 1, 当前值: {workers}")
    return workers
