"""磁性本构模型与力学性能数据

线性材料 B = μ0·μr·H；永磁体采用线性回复线 B = μ0·μr·H + Br·m̂。
材料库为 JSON 文件，随包提供 mre_spring/data/materials.json。
"""
import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.constants import mu_0

from .errors import ConfigError, MaterialError

logger = logging.getLogger(__name__)

MU0 = mu_0
# 永磁体数据表一致性阈值
PM_CONSISTENCY_RTOL = 0.10
DEFAULT_LIBRARY_PATH = Path(__file__).resolve().parent.parent / "data" / "materials.json"


class MaterialKind(str, Enum):
    AIR = "air"
    LINEAR_PERMEABLE = "linear_permeable"
    PERMANENT_MAGNET = "linear_permanent_magnet"


@dataclass(frozen=True)
class PMConsistencyReport:
    implied_mu_r: float
    mu_r: float
    deviation: float
    consistent: bool


@dataclass(frozen=True)
class MaterialModel:
    """
    磁性材料模型

    Args:
        kind: 材料类别
        mu_r: 相对磁导率
        b_r: 剩磁 (T)，仅永磁体
        h_c: 矫顽力 (A/m)，仅永磁体
        magnetization_dir: 磁化方向单位向量，仅永磁体
        name: 材料名称
    """
    kind: MaterialKind
    mu_r: float = 1.0
    b_r: float = 0.0
    h_c: float = 0.0
    magnetization_dir: Tuple[float, float] = (1.0, 0.0)
    name: str = ""

    def __post_init__(self):
        if not math.isfinite(self.mu_r) or self.mu_r < 1.0:
            raise MaterialError(f"{self.label}: mu_r 必须 >= 1, 当前值: {self.mu_r}")
        if self.kind is MaterialKind.AIR and self.mu_r != 1.0:
            raise MaterialError(f"{self.label}: 空气的 mu_r 必须严格等于 1")
        if self.kind is MaterialKind.PERMANENT_MAGNET:
            if self.b_r <= 0 or self.h_c <= 0:
                raise MaterialError(
                    f"{self.label}: 永磁体需要 b_r > 0 且 h_c > 0, 当前 b_r={self.b_r}, h_c={self.h_c}"
                )
            norm = math.hypot(*self.magnetization_dir)
            if abs(norm - 1.0) > 1e-12:
                raise MaterialError(f"{self.label}: 磁化方向必须为单位向量, |m|={norm}")
            report = pm_consistency_check(self)
            if not report.consistent:
                logger.warning(
                    f"[ MaterialModel ] {self.label}: 数据表隐含 mu_r={report.implied_mu_r:.4g}, "
                    f"配置 mu_r={self.mu_r:.4g}, 偏差 {report.deviation:.1%}"
                )

    @property
    def label(self) -> str:
        return self.name or self.kind.value

    @property
    def is_magnet(self) -> bool:
        return self.kind is MaterialKind.PERMANENT_MAGNET

    @property
    def reluctivity(self) -> float:
        """磁阻率 ν = 1/(μ0·μr)"""
        return 1.0 / (MU0 * self.mu_r)

    @property
    def remanence_vector(self) -> np.ndarray:
        if not self.is_magnet:
            return np.zeros(2)
        return self.b_r * np.asarray(self.magnetization_dir, dtype=float)

    @classmethod
    def air(cls, name: str = "air") -> "MaterialModel":
        return cls(kind=MaterialKind.AIR, mu_r=1.0, name=name)

    @classmethod
    def mre(cls, mu_r: float, name: str = "MRE") -> "MaterialModel":
        return cls(kind=MaterialKind.LINEAR_PERMEABLE, mu_r=mu_r, name=name)

    @classmethod
    def permanent_magnet(cls, b_r: float, h_c: float, mu_r: Optional[float] = None,
                         direction: Sequence[float] = (1.0, 0.0),
                         name: str = "PM") -> "MaterialModel":
        """mu_r 缺省时取数据表隐含的回复磁导率 b_r/(μ0·h_c)"""
        if mu_r is None:
            mu_r = b_r / (MU0 * h_c) if b_r > 0 and h_c > 0 else 1.0
        return cls(
            kind=MaterialKind.PERMANENT_MAGNET,
            mu_r=mu_r,
            b_r=b_r,
            h_c=h_c,
            magnetization_dir=_unit(direction),
            name=name,
        )

    def with_direction(self, direction: Sequence[float]) -> "MaterialModel":
        return dataclasses.replace(self, magnetization_dir=_unit(direction))

    def scaled_remanence(self, factor: float) -> "MaterialModel":
        return dataclasses.replace(self, b_r=self.b_r * factor, h_c=self.h_c * factor)


@dataclass(frozen=True)
class MechanicalProperties:
    """
    拉伸试验得到的力学性能

    Args:
        e_mod: 杨氏模量 (Pa)
        sigma_100: 100% 应变时的应力 (Pa)
        sigma_300: 300% 应变时的应力 (Pa)，可缺省
    """
    e_mod: float
    sigma_100: float
    sigma_300: Optional[float] = None

    def __post_init__(self):
        if self.e_mod <= 0 or self.sigma_100 <= 0:
            raise MaterialError(
                f"e_mod 与 sigma_100 必须为正数, 当前 e_mod={self.e_mod}, sigma_100={self.sigma_100}"
            )
        if self.sigma_300 is not None and self.sigma_300 <= self.sigma_100:
            raise MaterialError(
                f"sigma_300 ({self.sigma_300}) 必须大于 sigma_100 ({self.sigma_100})"
            )


def _unit(direction: Sequence[float]) -> Tuple[float, float]:
    x, y = float(direction[0]), float(direction[1])
    norm = math.hypot(x, y)
    if norm == 0 or not math.isfinite(norm):
        raise MaterialError(f"磁化方向不能为零向量: {direction}")
    return (x / norm, y / norm)


def coenergy_density(m: MaterialModel, b: Union[Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """
    线性本构下的磁共能密度 ∫B dH (J/m³)

    Args:
        m: 材料模型
        b: 磁通密度，形状 (2,) 或 (N, 2)

    Returns:
        标量或长度 N 的数组
    """
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    b2 = np.atleast_2d(b)
    if m.is_magnet:
        h = (b2 - m.remanence_vector) / (MU0 * m.mu_r)
        density = 0.5 * MU0 * m.mu_r * np.einsum("ij,ij->i", h, h) + h @ m.remanence_vector
    else:
        density = np.einsum("ij,ij->i", b2, b2) / (2.0 * MU0 * m.mu_r)
    return float(density[0]) if single else density


def pm_consistency_check(m: MaterialModel) -> PMConsistencyReport:
    """比较配置的 mu_r 与数据表隐含的 b_r/(μ0·h_c)"""
    if not m.is_magnet:
        raise MaterialError(f"{m.label} 不是永磁体, 无法做数据表一致性检查")
    implied = m.b_r / (MU0 * m.h_c)
    deviation = abs(m.mu_r - implied) / implied
    return PMConsistencyReport(
        implied_mu_r=implied,
        mu_r=m.mu_r,
        deviation=deviation,
        consistent=deviation <= PM_CONSISTENCY_RTOL,
    )


class MechanicalRecord(BaseModel):
    e_mod_mpa: float
    sigma_100_mpa: float
    sigma_300_mpa: Optional[float] = None


class MaterialRecord(BaseModel):
    """材料库 JSON 中的一条记录"""
    model_config = ConfigDict(extra="forbid")

    kind: MaterialKind
    mu_r: Optional[float] = None
    b_r: Optional[float] = None
    h_c: Optional[float] = None
    magnetization_dir: Tuple[float, float] = (1.0, 0.0)
    mechanical: Optional[MechanicalRecord] = None
    matrix: Optional[str] = None
    paper_mass_g: Optional[float] = None
    description: str = ""
    metadata: Dict[str, Any] = Field(default_factory=dict)


@dataclass(frozen=True)
class MaterialEntry:
    name: str
    model: MaterialModel
    mechanical: Optional[MechanicalProperties] = None
    paper_mass_g: Optional[float] = None
    description: str = ""
    matrix: Optional[str] = None


class MaterialLibrary(Mapping[str, MaterialEntry]):
    """按名称索引的材料库"""

    def __init__(self, entries: Mapping[str, MaterialEntry], source: Optional[Path] = None):
        self._entries = dict(entries)
        self.source = source

    def __getitem__(self, name: str) -> MaterialEntry:
        if name not in self._entries:
            raise ConfigError(f"材料库中不存在材料 '{name}', 可用: {sorted(self._entries)}")
        return self._entries[name]

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def model(self, name: str) -> MaterialModel:
        return self[name].model

    def gripper_materials(self) -> List[str]:
        """可用作手指的 MRE：线性导磁、mu_r > 1 且带力学数据"""
        return [
            name for name, entry in self._entries.items()
            if entry.model.kind is MaterialKind.LINEAR_PERMEABLE
            and entry.model.mu_r > 1.0
            and entry.mechanical is not None
        ]

    def stiffening_ratio(self, name: str) -> float:
        """MRE 与其基体硅胶的杨氏模量之比"""
        entry = self[name]
        if entry.matrix is None or entry.mechanical is None:
            raise MaterialError(f"'{name}' 没有基体硅胶或力学数据")
        return entry.mechanical.e_mod / self[entry.matrix].mechanical.e_mod


def _build_entry(name: str, record: MaterialRecord) -> MaterialEntry:
    if record.kind is MaterialKind.AIR:
        model = MaterialModel.air(name=name)
    elif record.kind is MaterialKind.LINEAR_PERMEABLE:
        if record.mu_r is None:
            raise MaterialError(f"{name}: 导磁材料缺少 mu_r")
        model = MaterialModel.mre(record.mu_r, name=name)
    else:
        if record.b_r is None or record.h_c is None:
            raise MaterialError(f"{name}: 永磁体缺少 b_r 或 h_c")
        model = MaterialModel.permanent_magnet(
            record.b_r, record.h_c, mu_r=record.mu_r,
            direction=record.magnetization_dir, name=name,
        )
    mechanical = None
    if record.mechanical is not None:
        mechanical = MechanicalProperties(
            e_mod=record.mechanical.e_mod_mpa * 1e6,
            sigma_100=record.mechanical.sigma_100_mpa * 1e6,
            sigma_300=None if record.mechanical.sigma_300_mpa is None
            else record.mechanical.sigma_300_mpa * 1e6,
        )
    return MaterialEntry(
        name=name,
        model=model,
        mechanical=mechanical,
        paper_mass_g=record.paper_mass_g,
        description=record.description,
        matrix=record.matrix,
    )


def load_material_library(path: Optional[Union[str, Path]] = None,
                          overrides: Optional[Mapping[str, Mapping[str, Any]]] = None) -> MaterialLibrary:
    """
    读取材料库

    Args:
        path: JSON 文件路径，None 时使用随包数据
        overrides: 名称 -> 字段覆盖，例如 {"MRE_RTV": {"mu_r": 4.0}}
    """
    source = Path(path) if path else DEFAULT_LIBRARY_PATH
    try:
        raw = json.loads(source.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"材料库文件不存在: {source}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"材料库 JSON 解析失败 {source}:{e.lineno}: {e.msg}")

    for name, fields in (overrides or {}).items():
        if name not in raw:
            raise ConfigError(f"覆盖项引用了不存在的材料 '{name}'")
        raw[name] = {**raw[name], **dict(fields)}

    entries = {}
    for name, fields in raw.items():
        try:
            entries[name] = _build_entry(name, MaterialRecord.model_validate(fields))
        except ValidationError as e:
            raise ConfigError(f"材料 '{name}' 字段不合法: {e}")
    for name, entry in entries.items():
        if entry.matrix is None:
            continue
        base = entries.get(entry.matrix)
        if base is None or base.mechanical is None:
            raise ConfigError(f"材料 '{name}' 的基体 '{entry.matrix}' 不存在或缺少力学数据")
    logger.debug(f"[ load_material_library ] 从 {source} 读取 {len(entries)} 种材料")
    return MaterialLibrary(entries, source=source)
