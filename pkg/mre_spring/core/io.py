"""结果文件导出：CSV 报表与运行元数据

CSV 约定：首行为表头，小数点为 '.'，行尾 '\\n'。
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from .energy_torque import CoenergyCurve, TorqueCurve
from .grip_model import CapacityRow
from .magnetostatics import FieldSolution
from .mesh import RegionTag

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"

PathLike = Union[str, Path]


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    logger.info(f"[ io ] 已写入 {path} ({len(frame)} 行)")
    return path


def write_coenergy_csv(curve: CoenergyCurve, path: PathLike) -> Path:
    frame = pd.DataFrame({
        "theta_deg": np.degrees(curve.thetas),
        "w_co_J": curve.w_co,
    })
    return _write_frame(frame, path)


def write_torque_csv(torque: TorqueCurve, path: PathLike) -> Path:
    frame = pd.DataFrame({
        "theta_deg": np.degrees(torque.thetas),
        "t_mNm": torque.t_co * 1e3,
    })
    return _write_frame(frame, path)


def write_capacity_csv(rows: Sequence[CapacityRow], path: PathLike) -> Path:
    frame = pd.DataFrame(
        [(r.material, r.e_mod_mpa, r.predicted_mass_g, r.paper_mass_g) for r in rows],
        columns=["material", "E_mod_MPa", "predicted_mass_g", "paper_mass_g"],
    )
    return _write_frame(frame, path)


def write_field_csv(sol: FieldSolution, path: PathLike) -> Path:
    """单元形心、Bx、By 与区域标签"""
    c = sol.mesh.centroids
    frame = pd.DataFrame({
        "x_m": c[:, 0],
        "y_m": c[:, 1],
        "bx_T": sol.b_elem[:, 0],
        "by_T": sol.b_elem[:, 1],
        "region": [RegionTag(int(t)).name.lower() for t in sol.mesh.region_tag],
    })
    return _write_frame(frame, path)


def _json_default(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"无法序列化类型 {type(value).__name__}")


def _sanitize(value: Any) -> Any:
    """JSON 不支持 inf/nan，统一写成 null"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


def write_run_meta(meta: Mapping[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_sanitize(dict(meta)), indent=2, sort_keys=True,
                      ensure_ascii=False, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"[ io ] 运行元数据已写入 {path}")
    return path
