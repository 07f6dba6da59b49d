import logging
import math
from typing import List, Literal, Optional, Union

from fastapi import APIRouter, Depends, HTTPException, Request
from pydantic import BaseModel, Field

from ...config import GeometryConfig, SplineConfig, SweepConfig
from ...core.errors import (ConfigError, DomainError, GeometryError, InsufficientDataError,
                            RangeError, SimulationError, UnsupportedConfigurationError)
from ...core.geometry import grasp_report
from ...services.simulation_service import SimulationService

router = APIRouter(tags=["simulation"])

logger = logging.getLogger(__name__)

CLIENT_ERRORS = (ConfigError, DomainError, RangeError, GeometryError, InsufficientDataError)


# Pydantic models
class MaterialResponse(BaseModel):
    name: str
    kind: str
    mu_r: float
    b_r: Optional[float] = None
    e_mod_mpa: Optional[float] = None
    matrix: Optional[str] = None
    paper_mass_g: Optional[float] = None
    gripper: bool = False


class GeometryResponse(BaseModel):
    r_open_mm: float
    r_close_mm: Optional[float] = None
    theta_max_deg: float
    contact_radius_mm: float


class CapacityRequest(BaseModel):
    friction_coeff: Optional[float] = Field(None, ge=0, le=2)
    grip_deflection_mm: Optional[float] = Field(None, ge=0)


class CapacityResponse(BaseModel):
    material: str
    e_mod_mpa: float
    predicted_mass_g: float
    paper_mass_g: Optional[float] = None


class SweepRequest(BaseModel):
    start_deg: float = Field(0.0, ge=0)
    stop_deg: Optional[float] = Field(None, gt=0)
    step_deg: float = Field(5.0, gt=0)
    excitation: Literal["isotropic", "fixed"] = "isotropic"
    lam: Union[Literal["auto"], float] = "auto"
    stripe: Optional[str] = None


class SweepResponse(BaseModel):
    theta_deg: List[float]
    w_co_j: List[float]
    t_mnm: List[float]
    fd_t_mnm: List[float]
    summary: dict


def get_service(request: Request) -> SimulationService:
    return request.app.state.service


def _to_http(e: SimulationError) -> HTTPException:
    if isinstance(e, UnsupportedConfigurationError):
        return HTTPException(status_code=422, detail=str(e))
    if isinstance(e, CLIENT_ERRORS):
        return HTTPException(status_code=400, detail=str(e))
    return HTTPException(status_code=500, detail=f"仿真失败: {e}")


@router.get("/materials", response_model=List[MaterialResponse])
def list_materials(service: SimulationService = Depends(get_service)):
    """材料库列表"""
    gripper = set(service.library.gripper_materials())
    result = []
    for name, entry in service.library.items():
        result.append(MaterialResponse(
            name=name,
            kind=entry.model.kind.value,
            mu_r=entry.model.mu_r,
            b_r=entry.model.b_r if entry.model.is_magnet else None,
            e_mod_mpa=None if entry.mechanical is None else entry.mechanical.e_mod / 1e6,
            matrix=entry.matrix,
            paper_mass_g=entry.paper_mass_g,
            gripper=name in gripper,
        ))
    return result


@router.post("/geometry", response_model=GeometryResponse)
def geometry_report(geometry: Optional[GeometryConfig] = None,
                    service: SimulationService = Depends(get_service)):
    """张开/闭合半径与最大缠绕角"""
    try:
        g = geometry.to_geometry() if geometry is not None else service.geometry
        report = grasp_report(g)
    except SimulationError as e:
        logger.error(f"[ geometry_report ] {e}")
        raise _to_http(e)
    return GeometryResponse(
        r_open_mm=report.r_open * 1e3,
        r_close_mm=None if report.r_close is None else report.r_close * 1e3,
        theta_max_deg=math.degrees(report.theta_max),
        contact_radius_mm=report.contact_radius * 1e3,
    )


@router.post("/capacity", response_model=List[CapacityResponse])
def capacity(request: CapacityRequest, service: SimulationService = Depends(get_service)):
    """各 MRE 的最大载荷预测"""
    payload = service.config.payload.model_copy(update={
        k: v for k, v in request.model_dump().items() if v is not None
    })
    try:
        rows = service.derive(payload=payload).capacity()
    except SimulationError as e:
        logger.error(f"[ capacity ] {e}")
        raise _to_http(e)
    return [
        CapacityResponse(material=r.material, e_mod_mpa=r.e_mod_mpa,
                         predicted_mass_g=r.predicted_mass_g, paper_mass_g=r.paper_mass_g)
        for r in rows
    ]


@router.post("/sweep", response_model=SweepResponse)
def sweep(request: SweepRequest, service: SimulationService = Depends(get_service)):
    """磁共能扫描与扭矩曲线"""
    try:
        sweep_cfg = SweepConfig(
            start_deg=request.start_deg,
            stop_deg=request.stop_deg,
            step_deg=request.step_deg,
            stop_fraction=service.config.sweep.stop_fraction,
            excitation=request.excitation,
        )
        derived = service.derive(sweep=sweep_cfg, spline=SplineConfig(lam=request.lam))
        if request.stripe is not None and request.stripe not in derived.library:
            raise ConfigError(f"材料库中不存在材料 '{request.stripe}'")
        result = derived.run_sweep(stripe=request.stripe)
    except SimulationError as e:
        logger.error(f"[ sweep ] {e}")
        raise _to_http(e)
    except ValueError as e:
        logger.error(f"[ sweep ] 参数错误: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    return SweepResponse(
        theta_deg=[math.degrees(t) for t in result.curve.thetas],
        w_co_j=result.curve.w_co.tolist(),
        t_mnm=(result.torque.t_co * 1e3).tolist(),
        fd_t_mnm=(result.fd_torque.t_co * 1e3).tolist(),
        summary=result.summary(),
    )
