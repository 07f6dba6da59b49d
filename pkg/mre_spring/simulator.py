import logging
import logging.handlers
import math
import os
import time
from pathlib import Path
from typing import Dict, Optional, Union

from .config import RunConfig
from .core.io import (write_capacity_csv, write_coenergy_csv, write_field_csv, write_run_meta,
                      write_torque_csv)
from .core.mesh import write_mesh_text
from .services.simulation_service import SimulationService

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: str = "info", log_dir: Optional[Union[str, Path]] = None):
    """配置日志系统：控制台 + 滚动文件"""
    formatter = logging.Formatter(LOG_FORMAT)
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, level.upper()))
    for handler in list(root_logger.handlers):
        if getattr(handler, "_mre_spring", False):
            root_logger.removeHandler(handler)
            handler.close()

    # 配置控制台处理器
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler._mre_spring = True
    root_logger.addHandler(console_handler)

    # 配置文件处理器
    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_dir / "mre_spring.log",
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setFormatter(formatter)
        file_handler._mre_spring = True
        root_logger.addHandler(file_handler)

    # 设置第三方库的日志级别
    logging.getLogger("uvicorn").setLevel(logging.WARNING)
    logging.getLogger("fastapi").setLevel(logging.WARNING)


class MagneticSpringSimulator:
    def __init__(self, config: RunConfig,
                 output_dir: Optional[Union[str, Path]] = None,
                 workers: int = 1,
                 log_level: str = "info"):
        """
        初始化磁弹簧仿真器

        Args:
            config: 运行配置
            output_dir: 输出目录，None 时取配置中的 output_dir
            workers: 扫描进程数
            log_level: 日志级别
        """
        self.config = config
        self.output_dir = Path(output_dir or config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        setup_logging(log_level, self.output_dir / "logs")
        self.logger = logging.getLogger(__name__)
        self.workers = workers
        self.service = SimulationService(config, cache_dir=self.output_dir / ".cache", workers=workers)

    def geometry_report(self) -> Dict[str, Optional[float]]:
        """返回以毫米、度表示的几何报告"""
        report = self.service.geometry_report()
        return {
            "r_open_mm": report.r_open * 1e3,
            "r_close_mm": None if report.r_close is None else report.r_close * 1e3,
            "theta_max_deg": math.degrees(report.theta_max),
            "contact_radius_mm": report.contact_radius * 1e3,
        }

    def _meta(self, started: float, **extra) -> Dict:
        meta = {
            "config": self.config.model_dump(mode="json"),
            "config_hash": self.config.config_hash(),
            "workers": self.workers,
            "solve_count": self.service.solve_count,
            "cache_hits": self.service.cache.hits if self.service.cache else 0,
            "seconds": time.perf_counter() - started,
            "pid": os.getpid(),
        }
        meta.update(extra)
        return meta

    def run_sweep(self) -> Dict[str, Path]:
        """扫描并写出 coenergy.csv、torque.csv、run_meta.json"""
        started = time.perf_counter()
        self.logger.info(f"[ run_sweep ] 输出目录: {self.output_dir}")
        result = self.service.run_sweep()
        files = {
            "coenergy": write_coenergy_csv(result.curve, self.output_dir / "coenergy.csv"),
            "torque": write_torque_csv(result.torque, self.output_dir / "torque.csv"),
        }
        meta = result.curve.sweep_meta
        files["run_meta"] = write_run_meta(self._meta(
            started,
            command="sweep",
            summary=result.summary(),
            timings={"sweep_seconds": meta["seconds"]},
            solver_stats=meta["solver_stats"],
            n_elements=meta["n_elements"],
        ), self.output_dir / "run_meta.json")
        self.logger.info(f"[ run_sweep ] 完成, 本次求解 {self.service.solve_count} 次")
        return files

    def run_capacity(self) -> Dict[str, Path]:
        """写出 capacity.csv"""
        started = time.perf_counter()
        rows = self.service.capacity()
        files = {"capacity": write_capacity_csv(rows, self.output_dir / "capacity.csv")}
        files["run_meta"] = write_run_meta(
            self._meta(started, command="capacity"),
            self.output_dir / "capacity_meta.json",
        )
        return files

    def field_dump(self, theta_deg: float, mesh_out: bool = False) -> Dict[str, Path]:
        """写出单个 θ 的单元场 CSV，可选导出网格文本"""
        sol = self.service.field_at(theta_deg)
        tag = f"{theta_deg:g}".replace(".", "p")
        files = {"field": write_field_csv(sol, self.output_dir / f"field_theta{tag}.csv")}
        if mesh_out:
            files["mesh"] = write_mesh_text(sol.mesh, self.output_dir / f"mesh_theta{tag}.txt")
        return files

    def serve(self, host: str = "127.0.0.1", port: int = 8000, log_level: str = "info"):
        """启动 HTTP 接口"""
        from .api.main import start_server

        self.logger.info(f"[ serve ] 启动服务 http://{host}:{port}")
        start_server(self.config, host=host, port=port, log_level=log_level,
                     cache_dir=self.output_dir / ".cache", workers=self.workers)
