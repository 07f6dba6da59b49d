"""仿真内核的异常层次

内核函数只抛出异常，不返回 (ok, value) 元组；CLI 和 HTTP 层负责把异常
映射成退出码或 HTTP 状态码。
"""
from typing import Optional


class SimulationError(Exception):
    """所有仿真错误的基类"""


class GeometryError(SimulationError):
    """几何不合法：锚点在磁体内、条带自相交等"""


class DomainError(SimulationError, ValueError):
    """参数超出定义域，例如 θ 超出 [0, θ_max]"""


class UnsupportedConfigurationError(SimulationError):
    """公式不适用的配置，例如 n_fingers != 3 时的 r_close"""


class MaterialError(SimulationError, ValueError):
    """材料参数不满足本构模型的约束"""


class MeshError(SimulationError):
    """网格生成失败或网格参数不可用"""


class SolverError(SimulationError):
    """线性求解未收敛"""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class InsufficientDataError(SimulationError, ValueError):
    """样本数量不足以拟合或差分"""


class RangeError(SimulationError, ValueError):
    """在拟合区间之外求值"""


class ConfigError(SimulationError):
    """配置缺失字段、材料名不存在等"""


class SweepError(SimulationError):
    """扫描过程中某个 θ 的网格或求解失败"""

    def __init__(self, message: str, theta: Optional[float] = None):
        super().__init__(message)
        self.theta = theta
