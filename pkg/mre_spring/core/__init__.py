from .errors import (ConfigError, DomainError, GeometryError, InsufficientDataError, MaterialError,
                     MeshError, RangeError, SimulationError, SolverError, SweepError,
                     UnsupportedConfigurationError)
from .geometry import (GripperGeometry, WrapPath, WrapState, close_radius, max_wrap_angle,
                       open_radius, wrap_path)
from .materials import MaterialModel, MechanicalProperties, coenergy_density, pm_consistency_check

__all__ = [
    'ConfigError', 'DomainError', 'GeometryError', 'InsufficientDataError', 'MaterialError',
    'MeshError', 'RangeError', 'SimulationError', 'SolverError', 'SweepError',
    'UnsupportedConfigurationError',
    'GripperGeometry', 'WrapPath', 'WrapState', 'close_radius', 'max_wrap_angle',
    'open_radius', 'wrap_path',
    'MaterialModel', 'MechanicalProperties', 'coenergy_density', 'pm_consistency_check',
]
