from .result_cache import ResultCache
from .simulation_service import SimulationService, SweepResult

__all__ = ["ResultCache", "SimulationService", "SweepResult"]
