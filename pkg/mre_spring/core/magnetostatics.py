"""二维静磁场有限元求解（面外磁矢位 A_z，一阶三角形单元）

弱形式 ∇·(ν∇A) = -∇×(ν·Br·m̂)，外边界 A = 0。永磁体以等效磁化电流
进入右端项。B = (∂A/∂y, -∂A/∂x) 在单元内为常数。
"""
import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, spilu, splu

from .errors import ConfigError, SolverError
from .materials import MaterialModel, coenergy_density
from .mesh import Mesh, RegionTag

logger = logging.getLogger(__name__)

SOLVER_METHODS = ("direct", "cg")
PRECONDITIONERS = ("jacobi", "ilu")
MAX_REFINEMENT_STEPS = 3


@dataclass(frozen=True)
class SolverOptions:
    """
    线性求解选项

    Args:
        method: "direct" (LU 分解) 或 "cg" (预条件共轭梯度)
        rtol: 相对残差上限
        max_iter: 共轭梯度最大迭代次数，None 表示 10 × 自由度数
        preconditioner: "jacobi" 或 "ilu"
        fallback: 直接法失败时是否回退到共轭梯度
    """
    method: str = "direct"
    rtol: float = 1e-10
    max_iter: Optional[int] = None
    preconditioner: str = "jacobi"
    fallback: bool = True

    def __post_init__(self):
        if self.method not in SOLVER_METHODS:
            raise ConfigError(f"未知求解方法 '{self.method}', 可选: {SOLVER_METHODS}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigError(f"未知预条件子 '{self.preconditioner}', 可选: {PRECONDITIONERS}")
        if not (0 < self.rtol < 1):
            raise ConfigError(f"rtol 必须位于 (0, 1), 当前值: {self.rtol}")


@dataclass(frozen=True)
class SolverStats:
    method: str
    dofs: int
    nnz: int
    residual: float
    iterations: int
    seconds: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "method": self.method,
            "dofs": self.dofs,
            "nnz": self.nnz,
            "residual": self.residual,
            "iterations": self.iterations,
            "seconds": self.seconds,
        }


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """消去 Dirichlet 行列后的系统 K·a_free = f"""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_dofs: np.ndarray
    n_nodes: int


@dataclass(frozen=True, eq=False)
class FieldSolution:
    """
    场解

    Args:
        a: 节点磁矢位 (Wb/m)
        b_elem: 单元磁通密度 (T)，形状 (M, 2)
        h_elem: 单元磁场强度 (A/m)，形状 (M, 2)
        mesh: 求解所用网格
        stats: 求解统计
    """
    a: np.ndarray
    b_elem: np.ndarray
    h_elem: np.ndarray
    mesh: Mesh
    stats: Optional[SolverStats] = None


@dataclass(frozen=True, eq=False)
class _ElementGeometry:
    b: np.ndarray      # (M, 3) y_j - y_k
    c: np.ndarray      # (M, 3) x_k - x_j
    area: np.ndarray   # (M,)


def _element_geometry(mesh: Mesh) -> _ElementGeometry:
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    b = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]])
    c = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]])
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    return _ElementGeometry(b=b, c=c, area=area)


def _material_arrays(mesh: Mesh, materials: Mapping[RegionTag, MaterialModel]):
    """每个单元的磁阻率与剩磁向量"""
    lookup = {int(k): v for k, v in materials.items()}
    present = np.unique(mesh.region_tag)
    missing = [RegionTag(int(t)).name for t in present if int(t) not in lookup]
    if missing:
        raise ConfigError(f"以下区域缺少材料定义: {missing}")
    nu = np.empty(mesh.n_elements)
    br = np.zeros((mesh.n_elements, 2))
    for tag in present:
        mask = mesh.region_tag == tag
        m = lookup[int(tag)]
        nu[mask] = m.reluctivity
        br[mask] = m.remanence_vector
    return nu, br


def _stiffness(mesh: Mesh, geo: _ElementGeometry, nu: np.ndarray) -> sp.csr_matrix:
    scale = nu / (4.0 * geo.area)
    ke = scale[:, None, None] * (geo.b[:, :, None] * geo.b[:, None, :]
                                 + geo.c[:, :, None] * geo.c[:, None, :])
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    k = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    return k.tocsr()


def _source(mesh: Mesh, geo: _ElementGeometry, nu: np.ndarray, br: np.ndarray) -> np.ndarray:
    # f_i = ν/2 · (Br_x·c_i - Br_y·b_i)
    fe = 0.5 * nu[:, None] * (br[:, 0:1] * geo.c - br[:, 1:2] * geo.b)
    return np.bincount(mesh.triangles.ravel(), weights=fe.ravel(), minlength=mesh.n_nodes)


def _free_dofs(mesh: Mesh) -> np.ndarray:
    fixed = np.zeros(mesh.n_nodes, dtype=bool)
    fixed[mesh.boundary_nodes] = True
    return np.flatnonzero(~fixed)


def assemble(mesh: Mesh, materials: Mapping[RegionTag, MaterialModel]) -> LinearSystem:
    """
    组装对称正定稀疏系统并消去 A = 0 的边界自由度

    Args:
        mesh: 带区域标签的网格
        materials: 区域标签 -> 材料

    Returns:
        LinearSystem
    """
    nu, br = _material_arrays(mesh, materials)
    geo = _element_geometry(mesh)
    free = _free_dofs(mesh)
    k = _stiffness(mesh, geo, nu)
    f = _source(mesh, geo, nu, br)
    k_ff = k[free][:, free].tocsr()
    return LinearSystem(matrix=k_ff, rhs=f[free], free_dofs=free, n_nodes=mesh.n_nodes)


def _relative_residual(k: sp.csr_matrix, x: np.ndarray, f: np.ndarray) -> float:
    norm_f = np.linalg.norm(f)
    if norm_f == 0:
        return float(np.linalg.norm(k @ x))
    return float(np.linalg.norm(k @ x - f) / norm_f)


class _Factorized:
    """一次分解、多次回代；直接法失败时回退到预条件共轭梯度"""

    def __init__(self, matrix: sp.csr_matrix, opts: SolverOptions):
        self.matrix = matrix
        self.opts = opts
        self.lu = None
        self.method = opts.method
        if opts.method == "direct":
            try:
                self.lu = splu(matrix.tocsc(), permc_spec="COLAMD")
            except (RuntimeError, MemoryError) as e:
                if not opts.fallback:
                    raise SolverError(f"LU 分解失败: {e}")
                logger.warning(f"[ solve_field ] LU 分解失败, 回退到共轭梯度: {e}")
                self.method = "cg"

    def _preconditioner(self) -> LinearOperator:
        n = self.matrix.shape[0]
        if self.opts.preconditioner == "ilu":
            ilu = spilu(self.matrix.tocsc(), drop_tol=1e-5, fill_factor=10)
            return LinearOperator((n, n), matvec=ilu.solve)
        inv_diag = 1.0 / self.matrix.diagonal()
        return LinearOperator((n, n), matvec=lambda v: inv_diag * v)

    def solve(self, f: np.ndarray):
        start = time.perf_counter()
        n = self.matrix.shape[0]
        if not np.any(f):
            return np.zeros(n), SolverStats(self.method, n, self.matrix.nnz, 0.0, 0,
                                            time.perf_counter() - start)
        iterations = 0
        if self.lu is not None:
            x = self.lu.solve(f)
            residual = _relative_residual(self.matrix, x, f)
            # 迭代精化
            while residual > self.opts.rtol and iterations < MAX_REFINEMENT_STEPS:
                x = x + self.lu.solve(f - self.matrix @ x)
                residual = _relative_residual(self.matrix, x, f)
                iterations += 1
        else:
            counter = {"n": 0}

            def _count(_):
                counter["n"] += 1

            maxiter = self.opts.max_iter or 10 * n
            x, info = cg(self.matrix, f, rtol=self.opts.rtol, atol=0.0, maxiter=maxiter,
                         M=self._preconditioner(), callback=_count)
            iterations = counter["n"]
            residual = _relative_residual(self.matrix, x, f)
            if info != 0 and residual > self.opts.rtol:
                raise SolverError(
                    f"共轭梯度在 {iterations} 次迭代内未收敛, 相对残差 {residual:.3e}",
                    residual=residual,
                )
        if not np.all(np.isfinite(x)) or residual > self.opts.rtol:
            raise SolverError(
                f"求解残差 {residual:.3e} 超过上限 {self.opts.rtol:.1e} (方法 {self.method})",
                residual=residual,
            )
        stats = SolverStats(self.method, n, self.matrix.nnz, residual, iterations,
                            time.perf_counter() - start)
        return x, stats


def _field_from_potential(mesh: Mesh, geo: _ElementGeometry, a: np.ndarray,
                          nu: np.ndarray, br: np.ndarray):
    ae = a[mesh.triangles]
    two_area = 2.0 * geo.area
    bx = np.einsum("ij,ij->i", ae, geo.c) / two_area
    by = -np.einsum("ij,ij->i", ae, geo.b) / two_area
    b = np.column_stack([bx, by])
    h = nu[:, None] * (b - br)
    return b, h


def _check_shared_reluctivity(mesh: Mesh, material_sets: Sequence[Mapping[RegionTag, MaterialModel]]):
    first = _material_arrays(mesh, material_sets[0])[0]
    for materials in material_sets[1:]:
        if not np.array_equal(first, _material_arrays(mesh, materials)[0]):
            raise ConfigError("solve_fields 要求各组材料的磁导率一致, 仅磁化方向或剩磁可以不同")
    return first


def solve_fields(mesh: Mesh, material_sets: Sequence[Mapping[RegionTag, MaterialModel]],
                 opts: Optional[SolverOptions] = None) -> List[FieldSolution]:
    """
    多组永磁激励共用一次矩阵组装与分解

    Args:
        mesh: 网格
        material_sets: 若干组材料映射，磁导率必须一致
        opts: 求解选项

    Returns:
        与 material_sets 同序的 FieldSolution 列表
    """
    if not material_sets:
        return []
    opts = opts or SolverOptions()
    nu = _check_shared_reluctivity(mesh, material_sets)
    geo = _element_geometry(mesh)
    free = _free_dofs(mesh)
    k_ff = _stiffness(mesh, geo, nu)[free][:, free].tocsr()
    solver = _Factorized(k_ff, opts)

    solutions = []
    for materials in material_sets:
        _, br = _material_arrays(mesh, materials)
        f = _source(mesh, geo, nu, br)[free]
        x, stats = solver.solve(f)
        a = np.zeros(mesh.n_nodes)
        a[free] = x
        b, h = _field_from_potential(mesh, geo, a, nu, br)
        for arr in (a, b, h):
            arr.setflags(write=False)
        solutions.append(FieldSolution(a=a, b_elem=b, h_elem=h, mesh=mesh, stats=stats))
        logger.debug(
            f"[ solve_fields ] 方法={stats.method} 自由度={stats.dofs} "
            f"残差={stats.residual:.2e} 耗时={stats.seconds:.3f}s"
        )
    return solutions


def solve_field(mesh: Mesh, materials: Mapping[RegionTag, MaterialModel],
                opts: Optional[SolverOptions] = None) -> FieldSolution:
    """求解单组材料下的场"""
    return solve_fields(mesh, [materials], opts)[0]


def total_coenergy(sol: FieldSolution, materials: Mapping[RegionTag, MaterialModel],
                   depth: float) -> float:
    """
    全域磁共能 Σ w(B_e)·A_e·depth (J)

    Args:
        sol: 场解
        materials: 区域标签 -> 材料
        depth: 二维模型拉伸深度，取手指宽度 w
    """
    mesh = sol.mesh
    lookup = {int(k): v for k, v in materials.items()}
    areas = mesh.areas
    total = 0.0
    for tag in np.unique(mesh.region_tag):
        if int(tag) not in lookup:
            raise ConfigError(f"区域 {RegionTag(int(tag)).name} 缺少材料定义")
        mask = mesh.region_tag == tag
        density = coenergy_density(lookup[int(tag)], sol.b_elem[mask])
        total += float(np.dot(density, areas[mask]))
    return total * depth


def magnetized_cylinder_field(b_r: float, radius: float, air_radius: float) -> float:
    """均匀磁化圆柱置于 A = 0 接地圆内时的内部磁通密度 (T)，方向沿磁化方向"""
    return 0.5 * b_r * (1.0 - (radius / air_radius) ** 2)

