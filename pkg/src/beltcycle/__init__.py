"""Duty-cycle anomaly detection for hydraulic conveyor belts."""

__version__ = "0.1.0"

from .datamodel import CycleClass, CycleEvent, OperationMode, SensorRecord

__all__ = ["CycleClass", "CycleEvent", "OperationMode", "SensorRecord", "__version__"]
