import logging
from pathlib import Path
from typing import Optional, Union

import uvicorn
from fastapi import FastAPI

from .. import __version__
from ..config import RunConfig, default_run_config
from ..services.simulation_service import SimulationService
from .routers import simulation

logger = logging.getLogger(__name__)


def create_app(config: Optional[RunConfig] = None,
               cache_dir: Optional[Union[str, Path]] = None,
               workers: int = 1) -> FastAPI:
    """创建 FastAPI 应用，仿真服务挂在 app.state 上"""
    app = FastAPI(title="MRE Spring API", version=__version__)
    app.state.service = SimulationService(config or default_run_config(),
                                          cache_dir=cache_dir, workers=workers)
    app.include_router(simulation.router, prefix="/api")

    @app.get("/")
    async def root():
        """健康检查"""
        return {"message": "MRE Spring API", "version": __version__}

    return app


def start_server(config: Optional[RunConfig] = None, host: str = "127.0.0.1", port: int = 8000,
                 log_level: str = "info", cache_dir: Optional[Union[str, Path]] = None,
                 workers: int = 1):
    """启动服务器"""
    app = create_app(config, cache_dir=cache_dir, workers=workers)
    logger.info(f"[ start_server ] 监听 {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level=log_level)
