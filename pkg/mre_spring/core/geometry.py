"""夹爪截面几何与条带缠绕路径

内部统一使用 SI 单位（米、弧度）。规范坐标系：磁体中心在原点，条带中线与
接触圆相切于顶点 (0, rc)，自由段沿 y = rc 指向 -x，接触弧从 π/2 顺时针
转过 θ。给定锚点时整体旋转 φ，使自由段所在直线经过锚点。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import LineString

from .errors import DomainError, GeometryError, UnsupportedConfigurationError

logger = logging.getLogger(__name__)

# 折线长度相对误差上限
PATH_LENGTH_RTOL = 1e-6
DEFAULT_WRAP_GAP = math.radians(5.0)


@dataclass(frozen=True)
class GripperGeometry:
    """
    夹爪截面几何参数

    Args:
        r_frame: 安装框架半径 (m)
        d_pm: 永磁体外径 (m)
        w: 手指宽度，也是二维模型的拉伸深度 (m)
        finger_length: MRE 条带长度 (m)
        finger_thickness: MRE 条带厚度 (m)
        n_fingers: 手指数量
        wrap_gap: 防止条带首尾重叠的角度余量 (rad)
    """
    r_frame: float
    d_pm: float
    w: float
    finger_length: float
    finger_thickness: float
    n_fingers: int = 3
    wrap_gap: float = DEFAULT_WRAP_GAP

    def __post_init__(self):
        lengths = {
            "r_frame": self.r_frame,
            "d_pm": self.d_pm,
            "w": self.w,
            "finger_length": self.finger_length,
            "finger_thickness": self.finger_thickness,
        }
        for name, value in lengths.items():
            if not math.isfinite(value) or value <= 0:
                raise GeometryError(f"{name} 必须为正数, 当前值: {value}")
        if self.n_fingers < 2:
            raise GeometryError(f"n_fingers 至少为 2, 当前值: {self.n_fingers}")
        if self.r_frame <= self.d_pm / 2:
            raise GeometryError(
                f"r_frame ({self.r_frame}) 必须严格大于 d_pm/2 ({self.d_pm / 2}), 否则磁体在中心相接"
            )
        if not 0 < self.wrap_gap < 2 * math.pi:
            raise GeometryError(f"wrap_gap 必须位于 (0, 2π), 当前值: {self.wrap_gap}")

    @property
    def magnet_radius(self) -> float:
        return self.d_pm / 2

    @property
    def contact_radius(self) -> float:
        """条带中线所在的接触圆半径"""
        return self.d_pm / 2 + self.finger_thickness / 2


@dataclass(frozen=True)
class WrapState:
    theta: float
    arc_length: float
    free_length: float


@dataclass(frozen=True)
class WrapPath:
    """
    条带中线路径：从固定端（锚点一侧）到自由端的有序折线

    Args:
        polyline: (N, 2) 折线顶点 (m)
        contact_span: 接触弧在磁体上的起止角 (rad)，起点为切点
        state: 对应的缠绕状态
        rotation: 相对规范坐标系的旋转角 φ (rad)
    """
    polyline: np.ndarray
    contact_span: Tuple[float, float]
    state: WrapState
    rotation: float = 0.0
    tangent_point: Tuple[float, float] = field(default=(0.0, 0.0))

    @property
    def length(self) -> float:
        return polyline_length(self.polyline)


@dataclass(frozen=True)
class GraspReport:
    r_open: float
    r_close: Optional[float]
    theta_max: float
    contact_radius: float


def open_radius(g: GripperGeometry) -> float:
    """张开状态下可容纳的最大物体半径"""
    return g.r_frame - g.d_pm / 2


def close_radius(g: GripperGeometry) -> float:
    """闭合状态下三指内切圆半径（等边三角形关系）"""
    if g.n_fingers != 3:
        raise UnsupportedConfigurationError(
            f"r_close 公式只适用于三指布局, 当前 n_fingers={g.n_fingers}"
        )
    return math.sqrt(3) / 6 * g.w


def max_wrap_angle(g: GripperGeometry) -> float:
    """条带可缠绕的最大角度，受 2π - wrap_gap 限制"""
    return min(g.finger_length / g.contact_radius, 2 * math.pi - g.wrap_gap)


def grasp_report(g: GripperGeometry) -> GraspReport:
    try:
        r_close = close_radius(g)
    except UnsupportedConfigurationError as e:
        logger.info(f"[ grasp_report ] {e}")
        r_close = None
    return GraspReport(
        r_open=open_radius(g),
        r_close=r_close,
        theta_max=max_wrap_angle(g),
        contact_radius=g.contact_radius,
    )


def wrap_state(g: GripperGeometry, theta: float) -> WrapState:
    """给定缠绕角的弧长与自由段长度"""
    theta_max = max_wrap_angle(g)
    tol = 1e-12 * max(1.0, theta_max)
    if not math.isfinite(theta) or theta < -tol or theta > theta_max + tol:
        raise DomainError(f"θ={theta} 超出范围 [0, {theta_max}]")
    theta = min(max(theta, 0.0), theta_max)
    arc_length = g.contact_radius * theta
    free_length = g.finger_length - arc_length
    # 未封顶时 θ_max 处的自由段为舍入误差量级
    if abs(free_length) <= 1e-12 * g.finger_length:
        free_length = 0.0
    return WrapState(theta=theta, arc_length=arc_length, free_length=max(free_length, 0.0))


def anchor_rotation(g: GripperGeometry, anchor: Optional[Sequence[float]]) -> float:
    """使自由段所在直线经过锚点所需的旋转角"""
    if anchor is None:
        return 0.0
    ax, ay = float(anchor[0]), float(anchor[1])
    rc = g.contact_radius
    rho = math.hypot(ax, ay)
    if rho <= rc:
        raise GeometryError(
            f"锚点 ({ax}, {ay}) 位于接触圆内 (|anchor|={rho:.6g} <= {rc:.6g})"
        )
    # 规范坐标系中锚点位于 y = rc 的切线上、切点左侧
    canonical = math.atan2(rc, -math.sqrt(rho * rho - rc * rc))
    return math.atan2(ay, ax) - canonical


def rotate(points: np.ndarray, phi: float) -> np.ndarray:
    if phi == 0.0:
        return points
    c, s = math.cos(phi), math.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    return points @ rot.T


def polyline_length(points: np.ndarray) -> float:
    return float(np.sum(np.hypot(*np.diff(points, axis=0).T)))


def _sample_arc(radius: float, start: float, sweep: float, n: int) -> np.ndarray:
    angles = start - np.linspace(0.0, sweep, n + 1)
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


def wrap_path(g: GripperGeometry, theta: float,
              anchor: Optional[Sequence[float]] = None) -> WrapPath:
    """
    构造缠绕角 θ 下的条带中线路径

    Args:
        g: 夹爪几何
        theta: 缠绕角 (rad)
        anchor: 固定端所在直线经过的点；None 表示规范位置

    Returns:
        WrapPath，折线长度与 finger_length 的相对误差不超过 1e-6
    """
    state = wrap_state(g, theta)
    phi = anchor_rotation(g, anchor)
    rc = g.contact_radius

    start = np.array([[-state.free_length, rc]]) if state.free_length > 0 else np.empty((0, 2))
    if state.theta == 0.0:
        points = np.vstack([start, [[0.0, rc]]])
    else:
        n = max(1, math.ceil(state.theta / math.radians(2.0)))
        while True:
            arc = _sample_arc(rc, math.pi / 2, state.theta, n)
            points = np.vstack([start, arc])
            error = abs(polyline_length(points) - g.finger_length) / g.finger_length
            if error <= PATH_LENGTH_RTOL:
                break
            n *= 2

    if len(points) < 2:
        raise GeometryError(f"θ={theta} 时路径退化为单点")

    points = rotate(points, phi)
    if len(points) > 2 and not LineString(points).is_simple:
        raise GeometryError(f"θ={theta} 时条带中线自相交")

    points.setflags(write=False)
    tangent = rotate(np.array([[0.0, rc]]), phi)[0]
    span = (math.pi / 2 + phi, math.pi / 2 - state.theta + phi)
    logger.debug(
        f"[ wrap_path ] θ={math.degrees(state.theta):.2f}° 弧长={state.arc_length:.6g} "
        f"自由段={state.free_length:.6g} 顶点数={len(points)}"
    )
    return WrapPath(
        polyline=points,
        contact_span=span,
        state=state,
        rotation=phi,
        tangent_point=(float(tangent[0]), float(tangent[1])),
    )
