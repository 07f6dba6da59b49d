"""磁体 + 缠绕条带 + 空气域的带区域标签三角网格

轮廓以平面直线图 (PSLG) 描述，由 Triangle 做约束 Delaunay 剖分并按
最小角做质量加密。磁体圆周顶点与条带内边界共用，保证网格协调。
"""
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import triangle
from shapely import affinity, contains_xy
from shapely.geometry import Point, Polygon

from .errors import GeometryError, MeshError
from .geometry import GripperGeometry, WrapPath, rotate

logger = logging.getLogger(__name__)

# 最小角 ≥ 20° 时，面积 ≤ 0.0910·h² 保证最长边 ≤ h；留一点余量
FINE_AREA_FACTOR = 0.0900
# 等边三角形面积系数 √3/4
COARSE_AREA_FACTOR = 0.4330
# 条带与磁体相切处的尖角气隙在此高度（相对厚度）处截断并填充为 MRE
CONTACT_FILL_RATIO = 0.1
# 自由段短于 ramp × 全尺寸填充长度后，填充面积随自由段长度线性收缩
CONTACT_FILL_RAMP = 5.0
# 磁体圆周顶点数取 72 的倍数，5° 步长的 θ 恰好落在顶点上
CIRCLE_DIVISION_MULTIPLE = 72
# 孤立磁体外空气按同心环分级：环半径与边长逐级加倍
NEAR_GRADING = 2.0


class RegionTag(IntEnum):
    AIR = 0
    MRE = 1
    PM = 2


@dataclass(frozen=True)
class MeshParams:
    """
    网格参数

    Args:
        h_max: MRE/PM 区域目标最大边长 (m)
        h_air: 远场空气目标边长 (m)
        air_radius_factor: 空气域半径 = factor × (r_frame + finger_length)
        min_angle: 最小三角形内角 (度)
        near_factor: 近场空气环边长 = near_factor × h_max（不超过 h_air）
    """
    h_max: float = 1.0e-3
    h_air: float = 20.0e-3
    air_radius_factor: float = 5.0
    min_angle: float = 20.0
    near_factor: float = 4.0

    def __post_init__(self):
        if not (0 < self.h_max <= self.h_air):
            raise MeshError(f"需要 0 < h_max <= h_air, 当前 h_max={self.h_max}, h_air={self.h_air}")
        if self.air_radius_factor < 3:
            raise MeshError(f"air_radius_factor 必须 >= 3, 当前值: {self.air_radius_factor}")
        if not (0 < self.min_angle <= 34):
            raise MeshError(f"min_angle 必须位于 (0, 34] 度, 当前值: {self.min_angle}")
        if self.near_factor < 1:
            raise MeshError(f"near_factor 必须 >= 1, 当前值: {self.near_factor}")

    @property
    def h_near(self) -> float:
        return min(self.near_factor * self.h_max, self.h_air)


@dataclass(frozen=True)
class RegionSeed:
    x: float
    y: float
    tag: RegionTag
    size_class: str  # "fine" | "near" | "far"
    max_edge: Optional[float] = None


@dataclass(frozen=True)
class MeshOutline:
    """
    剖分输入：PSLG 顶点/线段、区域种子点，以及用于校验的多边形

    Args:
        vertices: (N, 2) 顶点
        segments: (M, 2) 约束线段
        seeds: 区域种子点
        magnet: 磁体多边形
        stripe: 条带多边形，孤立磁体时为 None
        air_radius: 外边界半径
        min_feature: 最薄特征尺寸（条带厚度），无条带时为 None
    """
    vertices: np.ndarray
    segments: np.ndarray
    seeds: Tuple[RegionSeed, ...]
    magnet: Polygon
    stripe: Optional[Polygon]
    air_radius: float
    min_feature: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    region_tag: np.ndarray
    boundary_nodes: np.ndarray
    air_radius: float = 0.0
    _cache: Dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def signed_areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            p = self.nodes[self.triangles]
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            self._cache["areas"] = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        return self._cache["areas"]

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @property
    def edge_lengths(self) -> np.ndarray:
        """(M, 3) 每个单元三条边的长度"""
        p = self.nodes[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    @property
    def min_angles_deg(self) -> np.ndarray:
        a, b, c = self.edge_lengths.T
        # 余弦定理求三个内角
        cos_angles = np.stack([
            (b ** 2 + c ** 2 - a ** 2) / (2 * b * c),
            (a ** 2 + c ** 2 - b ** 2) / (2 * a * c),
            (a ** 2 + b ** 2 - c ** 2) / (2 * a * b),
        ])
        return np.degrees(np.arccos(np.clip(cos_angles, -1.0, 1.0))).min(axis=0)

    def region_mask(self, tag: RegionTag) -> np.ndarray:
        return self.region_tag == int(tag)

    def region_area(self, tag: RegionTag) -> float:
        return float(self.areas[self.region_mask(tag)].sum())

    def total_area(self) -> float:
        return float(self.areas.sum())

    def max_edge(self, tags: Sequence[RegionTag]) -> float:
        mask = np.isin(self.region_tag, [int(t) for t in tags])
        if not mask.any():
            return 0.0
        return float(self.edge_lengths[mask].max())


def _ring(radius: float, n: int, phase: float = math.pi / 2) -> np.ndarray:
    angles = phase - 2 * math.pi * np.arange(n) / n
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


def _circle_division(radius: float, h: float, minimum: int, multiple: int = 1) -> int:
    n = max(minimum, math.ceil(2 * math.pi * radius / h))
    return multiple * math.ceil(n / multiple)


def _merge_offsets(base: np.ndarray, inserts: Sequence[float], delta: float) -> np.ndarray:
    """
    合并圆周上的顺时针角偏移：距插入点不足 0.25δ 的基础顶点被剔除

    Returns:
        [0, 2π) 内排序后的角偏移
    """
    two_pi = 2 * math.pi
    inserts = np.mod(np.asarray(inserts, dtype=float), two_pi)
    if len(inserts) == 0:
        return np.sort(base)
    diff = np.abs(base[:, None] - inserts[None, :])
    circular = np.minimum(diff, two_pi - diff)
    exact = circular.min(axis=1) <= 1e-9
    keep = (circular.min(axis=1) > 0.25 * delta) | exact
    kept = base[keep]
    if len(kept):
        d = np.abs(inserts[:, None] - kept[None, :])
        new = inserts[np.minimum(d, two_pi - d).min(axis=1) > 1e-9]
    else:
        new = inserts
    return np.sort(np.unique(np.concatenate([kept, new])))


def _points_at(radius: float, offsets: np.ndarray) -> np.ndarray:
    angles = math.pi / 2 - offsets
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


class _PSLGBuilder:
    """顶点表与去重后的约束线段表"""

    def __init__(self):
        self.vertices: List[Tuple[float, float]] = []
        self.segments: set = set()

    def add_points(self, points: np.ndarray) -> List[int]:
        start = len(self.vertices)
        self.vertices.extend((float(x), float(y)) for x, y in points)
        return list(range(start, start + len(points)))

    def add_chain(self, indices: Sequence[int], closed: bool = False):
        pairs = list(zip(indices[:-1], indices[1:]))
        if closed:
            pairs.append((indices[-1], indices[0]))
        for i, j in pairs:
            if i != j:
                self.segments.add((min(i, j), max(i, j)))

    def arrays(self, phi: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        vertices = rotate(np.asarray(self.vertices, dtype=float), phi)
        segments = np.asarray(sorted(self.segments), dtype=np.int32)
        return vertices, segments


@lru_cache(maxsize=16)
def _magnet_interior_points(radius: float, n_circle: int, h: float, min_angle: float) -> np.ndarray:
    """
    磁体圆盘单独剖分后的内部顶点

    各 θ 的网格共用这组顶点，磁体内部剖分基本不随条带位置变化。
    """
    circle = _ring(radius, n_circle)
    n = len(circle)
    segments = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    result = triangle.triangulate(
        {"vertices": circle, "segments": segments},
        f"pq{min_angle:g}a{FINE_AREA_FACTOR * h * h:.12g}Q",
    )
    points = np.asarray(result["vertices"], dtype=float)
    inner_limit = radius * math.cos(math.pi / n_circle) * (1 - 1e-9)
    interior = points[np.hypot(points[:, 0], points[:, 1]) < inner_limit]
    interior.setflags(write=False)
    return interior


def _air_seeds(builder: _PSLGBuilder, inner_radius: float, near_radius: Optional[float],
               h_near: float, air_radius: float,
               occupied: Polygon) -> List[Tuple[np.ndarray, RegionTag, str]]:
    seeds = []
    if near_radius is not None:
        ring = _ring(near_radius, _circle_division(near_radius, h_near, 64))
        builder.add_chain(builder.add_points(ring), closed=True)
        candidate = None
        for angle in np.linspace(-math.pi / 2, 3 * math.pi / 2, 16, endpoint=False):
            r = 0.5 * (inner_radius + near_radius)
            p = (r * math.cos(angle), r * math.sin(angle))
            if not occupied.buffer(1e-9).contains(Point(p)):
                candidate = p
                break
        if candidate is None:
            raise GeometryError("近场空气环内找不到空气种子点")
        seeds.append((np.array(candidate), RegionTag.AIR, "near"))
        far_inner = near_radius
    else:
        far_inner = inner_radius
    r_far = 0.5 * (far_inner + air_radius)
    seeds.append((np.array([0.0, -r_far]), RegionTag.AIR, "far"))
    return seeds


def contact_fill(R: float, t: float, free: float) -> Tuple[float, float]:
    """
    切点处尖角气隙填充区的尺寸

    全尺寸填充在气隙高度 CONTACT_FILL_RATIO·t 处截断。自由段短于
    CONTACT_FILL_RAMP 倍全尺寸长度后，填充面积 (∝ x³) 随自由段线性收缩，
    并保证填充区末端之外仍留有平直段，条带区域随 θ 连续变化。

    Args:
        R: 磁体半径 (m)
        t: 条带厚度 (m)
        free: 未缠绕自由段长度 (m)，需 > 0

    Returns:
        (x_fill, gap): 填充区沿切线的长度与截断处气隙高度 (m)
    """
    gap_full = CONTACT_FILL_RATIO * t
    x_full = math.sqrt(2 * R * gap_full - gap_full * gap_full)
    ramp = CONTACT_FILL_RAMP * (x_full + gap_full)
    x_fill = x_full * min(1.0, free / ramp) ** (1.0 / 3.0)
    # x + R - √(R² - x²) = 0.9·free 的正根：平直段至少保留 0.1·free
    c = R - 0.9 * free
    if c > 0:
        x_fill = min(x_fill, 0.5 * (math.sqrt(2 * R * R - c * c) - c))
    gap = R - math.sqrt(R * R - x_fill * x_fill)
    return x_fill, gap


def air_radius_for(g: GripperGeometry, params: MeshParams) -> float:
    return params.air_radius_factor * (g.r_frame + g.finger_length)


def build_geometry_outline(g: GripperGeometry, path: WrapPath,
                           params: Optional[MeshParams] = None) -> MeshOutline:
    """
    构造磁体圆、条带多边形（中线 ±t/2 偏置）和空气外边界

    Args:
        g: 夹爪几何
        path: 缠绕路径，只使用其缠绕状态与旋转角
        params: 网格参数，决定圆周离散密度

    Returns:
        MeshOutline
    """
    params = params or MeshParams()
    R = g.magnet_radius
    t = g.finger_thickness
    Ro = R + t
    theta = path.state.theta
    free = path.state.free_length
    h = min(params.h_max, t / 2)
    air_radius = air_radius_for(g, params)

    n_circle = _circle_division(R, h, 48, CIRCLE_DIVISION_MULTIPLE)
    delta = 2 * math.pi / n_circle
    base = delta * np.arange(n_circle)

    min_straight = 0.05 * h
    if free > min_straight:
        mode = "fill"
        x_fill, _ = contact_fill(R, t, free)
        start_offset = 2 * math.pi - math.asin(x_fill / R)
    else:
        mode = "arc"
        start_offset = 0.0
        if theta == 0.0:
            raise GeometryError("条带长度过短，无法构造条带区域")

    # 内边界起点在切点之前 lead 弧度处
    lead = (2 * math.pi - start_offset) % (2 * math.pi)
    span = theta + lead
    if span >= 2 * math.pi - 0.5 * delta:
        raise GeometryError(
            f"θ={math.degrees(theta):.2f}° 时条带末端与起始段重叠, 请增大 wrap_gap 或缩短条带"
        )

    inserts = [theta, start_offset]
    offsets = _merge_offsets(base, inserts, delta)
    circle_points = _points_at(R, offsets)

    builder = _PSLGBuilder()
    circle_idx = builder.add_points(circle_points)
    builder.add_chain(circle_idx, closed=True)
    builder.add_points(_magnet_interior_points(R, n_circle, h, params.min_angle))

    # 条带内边界：从起点顺时针到末端的圆周顶点
    rel = np.mod(offsets - start_offset, 2 * math.pi)
    order = np.argsort(rel, kind="stable")
    inner = [circle_idx[i] for i in order if rel[i] <= span + 1e-9]

    # 条带外边界：末端到 0 逆向的外圆弧
    outer_offsets = _merge_offsets(base[(base > 0) & (base < theta)], [0.0, theta], delta)
    outer_offsets = outer_offsets[(outer_offsets >= 0) & (outer_offsets <= theta + 1e-12)]
    outer_points = _points_at(Ro, outer_offsets[::-1])
    outer_idx = builder.add_points(outer_points)

    if mode == "fill":
        head = builder.add_points(np.array([[-free, Ro], [-free, R], [-x_fill, R]]))
    else:
        head = []

    ring = head + inner + outer_idx
    builder.add_chain(ring, closed=True)

    verts = np.asarray(builder.vertices)
    stripe_poly = Polygon(verts[ring])
    if not stripe_poly.is_valid:
        raise GeometryError(f"θ={math.degrees(theta):.2f}° 时条带多边形自相交")
    magnet_poly = Polygon(circle_points)
    if stripe_poly.intersection(magnet_poly).area > 1e-9 * stripe_poly.area:
        raise GeometryError(f"θ={math.degrees(theta):.2f}° 时条带与磁体重叠")

    # 种子点：磁体中心、条带中线上一点
    if free > 2 * h:
        stripe_seed = np.array([-0.5 * free, R + 0.5 * t])
    else:
        mid = 0.5 * theta
        stripe_seed = np.array([(R + 0.5 * t) * math.sin(mid), (R + 0.5 * t) * math.cos(mid)])
    if not stripe_poly.contains(Point(stripe_seed)):
        raise GeometryError("条带种子点不在条带多边形内")

    occupied = magnet_poly.union(stripe_poly)
    extent = float(np.max(np.hypot(verts[:, 0], verts[:, 1])))
    near_radius = 1.25 * max(extent, Ro)
    if near_radius >= 0.5 * air_radius:
        near_radius = None
    seeds = [
        (np.array([0.0, 0.0]), RegionTag.PM, "fine"),
        (stripe_seed, RegionTag.MRE, "fine"),
    ]
    seeds += _air_seeds(builder, Ro, near_radius, params.h_near, air_radius, occupied)
    builder.add_chain(builder.add_points(_ring(air_radius, _circle_division(air_radius, params.h_air, 64))), closed=True)

    phi = path.rotation
    vertices, segments = builder.arrays(phi)
    seeds_rotated = tuple(
        RegionSeed(float(p[0]), float(p[1]), tag, size_class)
        for p, tag, size_class in ((rotate(s[None, :], phi)[0], tag, c) for s, tag, c in seeds)
    )
    logger.debug(
        f"[ build_geometry_outline ] θ={math.degrees(theta):.2f}° 模式={mode} "
        f"圆周顶点={n_circle} PSLG顶点={len(vertices)} 线段={len(segments)}"
    )
    return MeshOutline(
        vertices=vertices,
        segments=segments,
        seeds=seeds_rotated,
        magnet=affinity.rotate(magnet_poly, phi, origin=(0, 0), use_radians=True),
        stripe=affinity.rotate(stripe_poly, phi, origin=(0, 0), use_radians=True),
        air_radius=air_radius,
        min_feature=t,
    )


def build_magnet_outline(radius: float, params: MeshParams, air_radius: float) -> MeshOutline:
    """孤立磁体圆盘 + 空气域，用于解析解对照"""
    if air_radius <= radius:
        raise GeometryError(f"空气域半径 {air_radius} 必须大于磁体半径 {radius}")
    builder = _PSLGBuilder()
    circle = _ring(radius, _circle_division(radius, params.h_max, 16))
    builder.add_chain(builder.add_points(circle), closed=True)
    seeds = [RegionSeed(0.0, 0.0, RegionTag.PM, "fine")]

    # 每个空气环的边长与其内半径成正比
    inner, edge = radius, params.h_max
    while NEAR_GRADING * inner <= 0.5 * air_radius and edge < params.h_air:
        outer = NEAR_GRADING * inner
        builder.add_chain(builder.add_points(_ring(outer, _circle_division(outer, edge, 16))), closed=True)
        seeds.append(RegionSeed(0.0, -0.5 * (inner + outer), RegionTag.AIR, "near", max_edge=edge))
        inner, edge = outer, min(NEAR_GRADING * edge, params.h_air)
    seeds.append(RegionSeed(0.0, -0.5 * (inner + air_radius), RegionTag.AIR, "far"))

    builder.add_chain(builder.add_points(_ring(air_radius, _circle_division(air_radius, params.h_air, 64))), closed=True)
    vertices, segments = builder.arrays()
    logger.debug(f"[ build_magnet_outline ] 空气分级环 {len(seeds) - 2} 个")
    return MeshOutline(
        vertices=vertices,
        segments=segments,
        seeds=tuple(seeds),
        magnet=Polygon(circle),
        stripe=None,
        air_radius=air_radius,
    )


def _max_area(seed: RegionSeed, fine: float, params: MeshParams) -> float:
    if seed.max_edge is not None:
        return COARSE_AREA_FACTOR * seed.max_edge ** 2
    if seed.size_class == "fine":
        return FINE_AREA_FACTOR * fine ** 2
    if seed.size_class == "near":
        return COARSE_AREA_FACTOR * params.h_near ** 2
    return COARSE_AREA_FACTOR * params.h_air ** 2


def triangulate(outline: MeshOutline, params: MeshParams) -> Mesh:
    """
    约束 Delaunay 剖分 + 最小角质量加密

    Args:
        outline: 区域轮廓
        params: 网格参数

    Returns:
        Mesh，单元逆时针定向、带区域标签，数组只读
    """
    if outline.min_feature is not None and params.h_max > outline.min_feature:
        raise MeshError(
            f"h_max={params.h_max * 1e3:.3g} mm 大于条带厚度 {outline.min_feature * 1e3:.3g} mm, "
            f"请将 h_max 设为不超过厚度的一半 ({outline.min_feature * 500:.3g} mm)"
        )
    fine = params.h_max if outline.min_feature is None else min(params.h_max, outline.min_feature / 2)
    regions = [
        [s.x, s.y, float(int(s.tag)), _max_area(s, fine, params)]
        for s in outline.seeds
    ]
    flags = f"pq{params.min_angle:g}AaQ"
    try:
        result = triangle.triangulate(
            {"vertices": outline.vertices, "segments": outline.segments, "regions": regions},
            flags,
        )
    except Exception as e:
        raise MeshError(f"Triangle 剖分失败: {e}")
    if "triangles" not in result or len(result["triangles"]) == 0:
        raise MeshError("Triangle 未生成任何单元")

    nodes = np.ascontiguousarray(result["vertices"], dtype=float)
    tris = np.ascontiguousarray(result["triangles"], dtype=np.int64)
    tags = np.rint(result["triangle_attributes"][:, 0]).astype(np.int8)

    p = nodes[tris]
    signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                    - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    if np.any(signed == 0):
        raise MeshError("剖分结果含退化单元")
    flip = signed < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    boundary = _boundary_nodes(tris)
    for arr in (nodes, tris, tags, boundary):
        arr.setflags(write=False)
    mesh = Mesh(nodes=nodes, triangles=tris, region_tag=tags,
                boundary_nodes=boundary, air_radius=outline.air_radius)
    logger.debug(
        f"[ triangulate ] 节点={mesh.n_nodes} 单元={mesh.n_elements} "
        f"PM={int(mesh.region_mask(RegionTag.PM).sum())} MRE={int(mesh.region_mask(RegionTag.MRE).sum())}"
    )
    return mesh


def _boundary_nodes(tris: np.ndarray) -> np.ndarray:
    """只属于一个单元的边即外边界"""
    edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    unique, counts = np.unique(edges, axis=0, return_counts=True)
    return np.unique(unique[counts == 1].ravel())


def elements_inside(mesh: Mesh, polygon: Polygon, tag: RegionTag) -> bool:
    """指定标签的单元形心是否全部落在多边形内"""
    c = mesh.centroids[mesh.region_mask(tag)]
    return bool(np.all(contains_xy(polygon, c[:, 0], c[:, 1])))


def write_mesh_text(mesh: Mesh, path: Union[str, Path]) -> Path:
    """纯文本网格导出：节点数、x y 行；单元数、i j k tag 行"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{mesh.n_nodes}\n")
        np.savetxt(f, mesh.nodes, fmt="%.17g")
        f.write(f"{mesh.n_elements}\n")
        np.savetxt(f, np.column_stack([mesh.triangles, mesh.region_tag]), fmt="%d")
    logger.info(f"[ write_mesh_text ] 网格已写入 {path}")
    return path
