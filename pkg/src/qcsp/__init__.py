"""Exact quay crane scheduling with container groups by master/slave
decomposition."""

from .decomp import DriverConfig, SolveReport, Status, run
from .formats import ParseError, parse_instance, read_instance
from .model import Crane, Instance, InstanceError, Routing, Schedule, Task, make_instance, validate_schedule

__all__ = [
    "Crane",
    "DriverConfig",
    "Instance",
    "InstanceError",
    "ParseError",
    "Routing",
    "Schedule",
    "SolveReport",
    "Status",
    "Task",
    "make_instance",
    "parse_instance",
    "read_instance",
    "run",
    "validate_schedule",
]
