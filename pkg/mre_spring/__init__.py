__version__ = "0.1.0"

from .simulator import MagneticSpringSimulator

__all__ = ['MagneticSpringSimulator', '__version__']
