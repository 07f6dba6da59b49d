import argparse
import logging
import os
import sys
from typing import List, Optional

from .config import RunConfig, load_run_config, resolve_workers
from .core.errors import (ConfigError, MeshError, SimulationError, SolverError, SweepError)
from .simulator import MagneticSpringSimulator, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON 配置文件路径')
    common.add_argument('--set', dest='overrides', action='append', default=[],
                        metavar='KEY=VALUE', help='覆盖配置项, 例如 --set sweep.step_deg=10 (可重复)')
    common.add_argument('--output-dir', help='输出目录')
    common.add_argument('--workers', type=int, help='扫描进程数 (默认读取环境变量 MRE_SPRING_WORKERS)')
    common.add_argument('--deterministic', action=argparse.BooleanOptionalAction, default=None,
                        help='确定性模式 (默认开启, 强制直接法求解)')
    common.add_argument('--log-level', default='info',
                        choices=['debug', 'info', 'warning', 'error'],
                        help='日志级别')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='mre-spring', description='MRE 磁弹簧夹爪准静态磁-力学仿真')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('geometry', parents=[common], help='输出 r_open、r_close 与最大缠绕角')
    sub.add_parser('sweep', parents=[common], help='磁共能扫描并导出扭矩曲线')
    sub.add_parser('capacity', parents=[common], help='各 MRE 材料的最大载荷预测')

    field = sub.add_parser('field-dump', parents=[common], help='导出单个缠绕角的单元场 CSV')
    field.add_argument('--theta-deg', type=float, required=True, help='缠绕角 (度)')
    field.add_argument('--mesh-out', action='store_true', help='同时导出网格文本文件')

    serve = sub.add_parser('serve', parents=[common], help='启动 HTTP 接口')
    serve.add_argument('--host', default='127.0.0.1', help='服务器主机地址')
    serve.add_argument('--port', type=int, default=8000, help='服务端口')
    return parser


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config, args.overrides)
    update = {}
    if args.output_dir:
        update["output_dir"] = args.output_dir
    if args.deterministic is not None:
        update["deterministic"] = args.deterministic
    return cfg.model_copy(update=update) if update else cfg


def cmd_geometry(sim: MagneticSpringSimulator) -> int:
    report = sim.geometry_report()
    print(f"r_open      = {report['r_open_mm']:.4f} mm")
    if report['r_close_mm'] is None:
        print(f"r_close     = unsupported (n_fingers={sim.config.geometry.n_fingers})")
    else:
        print(f"r_close     = {report['r_close_mm']:.4f} mm")
    print(f"theta_max   = {report['theta_max_deg']:.3f} deg")
    print(f"contact_r   = {report['contact_radius_mm']:.4f} mm")
    return EXIT_OK


def cmd_sweep(sim: MagneticSpringSimulator) -> int:
    files = sim.run_sweep()
    print(f"solve_count = {sim.service.solve_count}")
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_capacity(sim: MagneticSpringSimulator) -> int:
    files = sim.run_capacity()
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_field_dump(sim: MagneticSpringSimulator, theta_deg: float, mesh_out: bool) -> int:
    files = sim.field_dump(theta_deg, mesh_out=mesh_out)
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        cfg = _load_config(args)
        workers = resolve_workers(args.workers, cfg, dict(os.environ))
        sim = MagneticSpringSimulator(cfg, workers=workers, log_level=args.log_level)
        if args.command == 'geometry':
            return cmd_geometry(sim)
        if args.command == 'sweep':
            return cmd_sweep(sim)
        if args.command == 'capacity':
            return cmd_capacity(sim)
        if args.command == 'field-dump':
            return cmd_field_dump(sim, args.theta_deg, args.mesh_out)
        sim.serve(host=args.host, port=args.port, log_level=args.log_level)
        return EXIT_OK
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SweepError, SolverError, MeshError) as e:
        logger.error(f"求解失败: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except SimulationError as e:
        logger.error(f"仿真失败: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
