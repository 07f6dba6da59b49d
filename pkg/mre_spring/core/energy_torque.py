"""磁共能随缠绕角的扫描、样条平滑与虚功扭矩

每个 θ：wrap_path -> build_geometry_outline -> triangulate -> solve -> total_coenergy。
扭矩取平滑样条的解析导数 T(θ) = dW/dθ。
"""
import hashlib
import json
import logging
import math
import multiprocessing
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline, make_smoothing_spline

from .errors import DomainError, InsufficientDataError, RangeError, SimulationError, SweepError
from .geometry import GripperGeometry, max_wrap_angle, wrap_path
from .magnetostatics import SolverOptions, solve_fields, total_coenergy
from .materials import MaterialModel
from .mesh import MeshParams, RegionTag, build_geometry_outline, triangulate

logger = logging.getLogger(__name__)

EXCITATION_MODES = ("isotropic", "fixed")
MIN_SPLINE_SAMPLES = 8
DEFAULT_PLATEAU_WINDOW = (math.radians(20.0), math.radians(200.0))


@dataclass(frozen=True)
class GripperMaterials:
    """空气、条带、永磁体三种区域的材料"""
    air: MaterialModel
    stripe: MaterialModel
    magnet: MaterialModel

    def region_map(self, magnet: Optional[MaterialModel] = None) -> Dict[RegionTag, MaterialModel]:
        return {
            RegionTag.AIR: self.air,
            RegionTag.MRE: self.stripe,
            RegionTag.PM: magnet or self.magnet,
        }

    def excitations(self, mode: str) -> List[Dict[RegionTag, MaterialModel]]:
        """
        isotropic: 沿磁化方向及其正交方向各激励一次，共能取平均；
        共能是 m̂ 的二次型，两正交方向的平均等于面内全方向平均
        """
        if mode not in EXCITATION_MODES:
            raise DomainError(f"未知激励模式 '{mode}', 可选: {EXCITATION_MODES}")
        if mode == "fixed":
            return [self.region_map()]
        mx, my = self.magnet.magnetization_dir
        return [
            self.region_map(self.magnet),
            self.region_map(self.magnet.with_direction((-my, mx))),
        ]

    def without_stripe(self) -> "GripperMaterials":
        return GripperMaterials(air=self.air, stripe=self.air, magnet=self.magnet)

    def fingerprint(self) -> Dict[str, Any]:
        return {
            "air": _material_fingerprint(self.air),
            "stripe": _material_fingerprint(self.stripe),
            "magnet": _material_fingerprint(self.magnet),
        }


def _material_fingerprint(m: MaterialModel) -> Dict[str, Any]:
    return {
        "kind": m.kind.value,
        "mu_r": repr(m.mu_r),
        "b_r": repr(m.b_r),
        "h_c": repr(m.h_c),
        "dir": [repr(v) for v in m.magnetization_dir],
    }


@dataclass(frozen=True)
class CoenergySample:
    theta: float
    w_co: float
    solver_stats: Tuple[Dict[str, Any], ...] = ()
    n_elements: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.theta,
            "w_co": self.w_co,
            "solver_stats": list(self.solver_stats),
            "n_elements": self.n_elements,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CoenergySample":
        return cls(
            theta=float(data["theta"]),
            w_co=float(data["w_co"]),
            solver_stats=tuple(data.get("solver_stats", ())),
            n_elements=int(data.get("n_elements", 0)),
        )


@dataclass(frozen=True, eq=False)
class CoenergyCurve:
    """
    磁共能曲线

    Args:
        thetas: 严格递增的缠绕角 (rad)
        w_co: 对应的磁共能 (J)
        sweep_meta: 几何哈希、网格参数、材料、求解统计等
    """
    thetas: np.ndarray
    w_co: np.ndarray
    sweep_meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        w_co = np.asarray(self.w_co, dtype=float)
        if thetas.ndim != 1 or thetas.shape != w_co.shape or len(thetas) == 0:
            raise DomainError("thetas 与 w_co 必须为等长的一维非空数组")
        if np.any(np.diff(thetas) <= 0):
            raise DomainError("thetas 必须严格递增")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "w_co", w_co)

    def __len__(self) -> int:
        return len(self.thetas)

    def shifted(self, offset: float) -> "CoenergyCurve":
        return CoenergyCurve(self.thetas, self.w_co + offset, dict(self.sweep_meta))


@dataclass(frozen=True, eq=False)
class SplineModel:
    """
    三次平滑样条

    Args:
        spline: scipy BSpline
        lam: 平滑参数 λ；GCV 自动选择时为 None
        method: "interpolating" | "gcv" | "fixed"
        theta_range: 拟合区间
    """
    spline: BSpline
    lam: Optional[float]
    method: str
    theta_range: Tuple[float, float]

    @property
    def knots(self) -> np.ndarray:
        return self.spline.t

    @property
    def coefficients(self) -> np.ndarray:
        return self.spline.c

    def __call__(self, theta):
        return self.spline(theta)

    def torque_integral(self, a: float, b: float) -> float:
        """扭矩 dW/dθ 在 [a, b] 上的积分，即拟合共能的增量"""
        return float(self.spline.derivative().integrate(a, b))


@dataclass(frozen=True, eq=False)
class TorqueCurve:
    thetas: np.ndarray
    t_co: np.ndarray


@dataclass(frozen=True)
class PlateauStats:
    mean: float
    std: float
    cv: float
    window: Tuple[float, float]
    n_samples: int


class SampleCache(Protocol):
    def get(self, key: str) -> Optional[CoenergySample]: ...

    def put(self, key: str, sample: CoenergySample) -> None: ...


def geometry_fingerprint(g: GripperGeometry) -> Dict[str, str]:
    return {k: repr(v) for k, v in asdict(g).items()}


def sample_key(g: GripperGeometry, materials: GripperMaterials, mesh_params: MeshParams,
               theta: float, excitation: str, anchor: Optional[Sequence[float]]) -> str:
    """单个 θ 样本的内容哈希（不含求解器设置）"""
    payload = {
        "geometry": geometry_fingerprint(g),
        "materials": materials.fingerprint(),
        "mesh": {k: repr(v) for k, v in asdict(mesh_params).items()},
        "theta": repr(float(theta)),
        "excitation": excitation,
        "anchor": None if anchor is None else [repr(float(v)) for v in anchor],
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def coenergy_at(g: GripperGeometry, materials: GripperMaterials, mesh_params: MeshParams,
                theta: float, *, solver_opts: Optional[SolverOptions] = None,
                excitation: str = "isotropic",
                anchor: Optional[Sequence[float]] = None) -> CoenergySample:
    """单个缠绕角下的磁共能"""
    solver_opts = solver_opts or SolverOptions()
    path = wrap_path(g, theta, anchor)
    mesh = triangulate(build_geometry_outline(g, path, mesh_params), mesh_params)
    region_sets = materials.excitations(excitation)
    solutions = solve_fields(mesh, region_sets, solver_opts)
    energies = [total_coenergy(sol, regions, g.w) for sol, regions in zip(solutions, region_sets)]
    w_co = float(np.mean(energies))
    return CoenergySample(
        theta=float(theta),
        w_co=w_co,
        solver_stats=tuple(sol.stats.to_dict() for sol in solutions),
        n_elements=mesh.n_elements,
    )


def interaction_coenergy(g: GripperGeometry, materials: GripperMaterials, mesh_params: MeshParams,
                         theta: float, *, solver_opts: Optional[SolverOptions] = None,
                         excitation: str = "isotropic",
                         anchor: Optional[Sequence[float]] = None) -> float:
    """同一网格上：有条带的共能减去条带区域置为空气时的共能"""
    solver_opts = solver_opts or SolverOptions()
    path = wrap_path(g, theta, anchor)
    mesh = triangulate(build_geometry_outline(g, path, mesh_params), mesh_params)
    result = []
    for mats in (materials, materials.without_stripe()):
        region_sets = mats.excitations(excitation)
        solutions = solve_fields(mesh, region_sets, solver_opts)
        result.append(np.mean([total_coenergy(s, r, g.w) for s, r in zip(solutions, region_sets)]))
    return float(result[0] - result[1])


def _sweep_worker(job: Tuple) -> Tuple[int, Optional[Dict[str, Any]], Optional[str]]:
    """进程池任务：返回 (序号, 样本字典, 错误信息)"""
    index, g, materials, mesh_params, theta, solver_opts, excitation, anchor = job
    try:
        sample = coenergy_at(g, materials, mesh_params, theta, solver_opts=solver_opts,
                             excitation=excitation, anchor=anchor)
        return index, sample.to_dict(), None
    except SimulationError as e:
        return index, None, f"{type(e).__name__}: {e}"


def _validate_grid(g: GripperGeometry, theta_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise DomainError("theta_grid 不能为空")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("theta_grid 必须严格递增")
    theta_max = max_wrap_angle(g)
    if grid[0] < 0 or grid[-1] > theta_max * (1 + 1e-12):
        raise DomainError(
            f"theta_grid 超出 [0, θ_max={math.degrees(theta_max):.2f}°]: "
            f"[{math.degrees(grid[0]):.2f}°, {math.degrees(grid[-1]):.2f}°]"
        )
    return grid


def sweep_coenergy(g: GripperGeometry, materials: GripperMaterials, mesh_params: MeshParams,
                   theta_grid: Sequence[float], *, solver_opts: Optional[SolverOptions] = None,
                   excitation: str = "isotropic", anchor: Optional[Sequence[float]] = None,
                   cache: Optional[SampleCache] = None, workers: int = 1) -> CoenergyCurve:
    """
    对每个 θ 做一次场求解并记录磁共能

    Args:
        g: 夹爪几何
        materials: 区域材料
        mesh_params: 网格参数
        theta_grid: 严格递增的缠绕角 (rad)
        solver_opts: 求解选项
        excitation: "isotropic" 或 "fixed"
        anchor: 锚点
        cache: 样本缓存，命中时跳过求解
        workers: 进程数

    Returns:
        CoenergyCurve，样本按 θ 顺序排列，与完成顺序无关
    """
    solver_opts = solver_opts or SolverOptions()
    grid = _validate_grid(g, theta_grid)
    materials.excitations(excitation)
    start = time.perf_counter()

    keys = [sample_key(g, materials, mesh_params, th, excitation, anchor) for th in grid]
    samples: List[Optional[CoenergySample]] = [None] * len(grid)
    if cache is not None:
        for i, key in enumerate(keys):
            samples[i] = cache.get(key)
    pending = [i for i, s in enumerate(samples) if s is None]
    cache_hits = len(grid) - len(pending)
    logger.info(
        f"[ sweep_coenergy ] {len(grid)} 个 θ, 缓存命中 {cache_hits}, 待求解 {len(pending)}, "
        f"激励={excitation}, 进程数={workers}"
    )

    jobs = [(i, g, materials, mesh_params, float(grid[i]), solver_opts, excitation, anchor) for i in pending]
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(min(workers, len(jobs))) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(job) for job in jobs]

    for index, data, error in sorted(results, key=lambda r: r[0]):
        theta = float(grid[index])
        if error is not None:
            logger.error(f"[ sweep_coenergy ] θ={math.degrees(theta):.3f}° 失败: {error}")
            raise SweepError(f"θ={math.degrees(theta):.3f}° 处求解失败: {error}", theta=theta)
        sample = CoenergySample.from_dict(data)
        samples[index] = sample
        if cache is not None:
            cache.put(keys[index], sample)
        logger.debug(f"[ sweep_coenergy ] θ={math.degrees(theta):.2f}° W={sample.w_co:.9e} J")

    elapsed = time.perf_counter() - start
    meta = {
        "geometry": geometry_fingerprint(g),
        "mesh": asdict(mesh_params),
        "materials": materials.fingerprint(),
        "excitation": excitation,
        "anchor": None if anchor is None else [float(v) for v in anchor],
        "solve_count": len(pending),
        "cache_hits": cache_hits,
        "seconds": elapsed,
        "solver_stats": [list(s.solver_stats) for s in samples],
        "n_elements": [s.n_elements for s in samples],
    }
    logger.info(f"[ sweep_coenergy ] 完成, 求解 {len(pending)} 次, 耗时 {elapsed:.1f}s")
    return CoenergyCurve(
        thetas=grid,
        w_co=np.array([s.w_co for s in samples]),
        sweep_meta=meta,
    )


def fit_spline(curve: CoenergyCurve, lam: Union[str, float] = "auto") -> SplineModel:
    """
    三次平滑样条，最小化 Σ(残差²) + λ∫(f″)²

    Args:
        curve: 磁共能曲线
        lam: "auto" 表示广义交叉验证选择 λ；0 表示插值样条

    Returns:
        SplineModel
    """
    n = len(curve)
    if n < MIN_SPLINE_SAMPLES:
        raise InsufficientDataError(f"样条拟合至少需要 {MIN_SPLINE_SAMPLES} 个样本, 当前 {n}")
    x, y = curve.thetas, curve.w_co
    if isinstance(lam, str):
        if lam != "auto":
            raise DomainError(f"lam 只能为 'auto' 或非负数, 当前值: {lam!r}")
        spline = make_smoothing_spline(x, y, lam=None)
        model = SplineModel(spline, None, "gcv", (float(x[0]), float(x[-1])))
    elif lam < 0 or not math.isfinite(lam):
        raise DomainError(f"lam 必须为非负数, 当前值: {lam}")
    elif lam == 0:
        spline = make_interp_spline(x, y, k=3)
        model = SplineModel(spline, 0.0, "interpolating", (float(x[0]), float(x[-1])))
    else:
        spline = make_smoothing_spline(x, y, lam=float(lam))
        model = SplineModel(spline, float(lam), "fixed", (float(x[0]), float(x[-1])))
    logger.debug(f"[ fit_spline ] 样本 {n}, 方法 {model.method}, λ={model.lam}")
    return model


def torque_curve(spline: SplineModel, eval_grid: Sequence[float]) -> TorqueCurve:
    """样条解析导数 T(θ) = dW/dθ (N·m)"""
    grid = np.asarray(eval_grid, dtype=float)
    lo, hi = spline.theta_range
    tol = 1e-12 * max(1.0, abs(hi))
    if len(grid) and (grid.min() < lo - tol or grid.max() > hi + tol):
        raise RangeError(
            f"求值区间 [{grid.min():.6g}, {grid.max():.6g}] 超出拟合区间 [{lo:.6g}, {hi:.6g}]"
        )
    t = spline.spline.derivative()(np.clip(grid, lo, hi))
    return TorqueCurve(thetas=grid, t_co=np.asarray(t, dtype=float))


def torque_fd_oracle(curve: CoenergyCurve) -> TorqueCurve:
    """原始样本上的中心差分（端点单侧差分）"""
    if len(curve) < 3:
        raise InsufficientDataError(f"差分至少需要 3 个样本, 当前 {len(curve)}")
    t = np.gradient(curve.w_co, curve.thetas, edge_order=1)
    return TorqueCurve(thetas=curve.thetas.copy(), t_co=t)


def plateau_statistics(torque: TorqueCurve,
                       window: Tuple[float, float] = DEFAULT_PLATEAU_WINDOW) -> PlateauStats:
    """平台区间内扭矩的均值、标准差与变异系数"""
    lo, hi = window
    mask = (torque.thetas >= lo - 1e-12) & (torque.thetas <= hi + 1e-12)
    if not mask.any():
        raise InsufficientDataError(
            f"平台区间 [{math.degrees(lo):.1f}°, {math.degrees(hi):.1f}°] 内没有扭矩样本"
        )
    values = torque.t_co[mask]
    mean = float(values.mean())
    std = float(values.std())
    cv = std / abs(mean) if mean != 0 else math.inf
    return PlateauStats(mean=mean, std=std, cv=cv, window=(lo, hi), n_samples=int(mask.sum()))


def default_theta_grid(g: GripperGeometry, step_deg: float = 5.0, stop_fraction: float = 0.98,
                       start_deg: float = 0.0, stop_deg: Optional[float] = None) -> np.ndarray:
    """
    默认扫描网格：start 到 stop_fraction·θ_max，步长 step_deg，终点总包含在内

    Returns:
        弧度数组
    """
    if step_deg <= 0:
        raise DomainError(f"step_deg 必须为正数, 当前值: {step_deg}")
    theta_max_deg = math.degrees(max_wrap_angle(g))
    stop = stop_fraction * theta_max_deg if stop_deg is None else stop_deg
    if stop > theta_max_deg * (1 + 1e-12):
        raise DomainError(f"扫描终点 {stop:.3f}° 超过 θ_max={theta_max_deg:.3f}°")
    if start_deg < 0 or start_deg > stop:
        raise DomainError(f"扫描起点 {start_deg}° 必须位于 [0, {stop:.3f}°]")
    n = int(math.floor((stop - start_deg) / step_deg + 1e-9))
    grid = [start_deg + i * step_deg for i in range(n + 1)]
    if stop - grid[-1] > 1e-9:
        # 末段过短时并入终点
        if stop - grid[-1] < 0.25 * step_deg and len(grid) > 1:
            grid[-1] = stop
        else:
            grid.append(stop)
    return np.radians(np.asarray(grid, dtype=float))
