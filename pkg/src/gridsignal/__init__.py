"""Desk-scale laboratory for single-agent regional traffic signal control."""

from .demand import FluctuationSpec, ODEntry, ODMatrix, fluctuate, generate
from .env import RewardParams, StepResult, TrafficEnv, decode_action, encode_state
from .network import LinkSpec, NetworkTopology, build_grid, matrix_cell, shortest_route
from .queues import QueueRecord, estimate_queue, oracle_queue
from .signals import PhaseSchedule, SignalPlan, apply_delta, derive_schedule, green_starts
from .simulation import Simulation, VehicleRecord

__all__ = [
    "FluctuationSpec",
    "LinkSpec",
    "NetworkTopology",
    "ODEntry",
    "ODMatrix",
    "PhaseSchedule",
    "QueueRecord",
    "RewardParams",
    "SignalPlan",
    "Simulation",
    "StepResult",
    "TrafficEnv",
    "VehicleRecord",
    "apply_delta",
    "build_grid",
    "decode_action",
    "derive_schedule",
    "encode_state",
    "estimate_queue",
    "fluctuate",
    "generate",
    "green_starts",
    "matrix_cell",
    "oracle_queue",
    "shortest_route",
]

__version__ = "0.1.0"
