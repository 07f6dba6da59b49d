import pytest

from mre_spring.config import GeometryConfig, MeshConfig, RunConfig
from mre_spring.core.energy_torque import GripperMaterials
from mre_spring.core.geometry import GripperGeometry
from mre_spring.core.materials import load_material_library
from mre_spring.core.mesh import MeshParams


@pytest.fixture
def default_geometry():
    """第一版夹爪：框架半径 18 mm、磁体直径 20 mm、宽 15 mm、条带 60 × 3 mm"""
    return GripperGeometry(
        r_frame=18e-3,
        d_pm=20e-3,
        w=15e-3,
        finger_length=60e-3,
        finger_thickness=3e-3,
    )


@pytest.fixture
def coarse_params():
    """测试用粗网格，单次剖分 + 求解在一秒以内"""
    return MeshParams(h_max=1.5e-3, h_air=40e-3, air_radius_factor=3.0)


@pytest.fixture(scope="session")
def library():
    return load_material_library()


@pytest.fixture
def materials(library):
    return GripperMaterials(
        air=library.model("air"),
        stripe=library.model("MRE_RTV"),
        magnet=library.model("NdFeB"),
    )


@pytest.fixture
def fast_config(tmp_path):
    """粗网格、短扫描 (0°..70°, 步长 10°) 的运行配置"""
    return RunConfig(
        geometry=GeometryConfig(),
        mesh=MeshConfig(h_max_mm=1.5, h_air_mm=40.0, air_radius_factor=3.0),
        sweep={"start_deg": 0.0, "stop_deg": 70.0, "step_deg": 10.0},
        output_dir=str(tmp_path / "results"),
    )
