"""Lifting-wing quadcopter simulation, control and allocation."""

from liftwing.config import ConfigurationError
from liftwing.vehicle import ActuatorParams, AeroCoefficients, VehicleParams

__all__ = ["ActuatorParams", "AeroCoefficients", "ConfigurationError", "VehicleParams"]
__version__ = "0.1.0"
