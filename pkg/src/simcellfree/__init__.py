"""Simulation of SIM-equipped cell-free MIMO uplinks with hardware impairments."""

from .channel import PropagationSet, build_propagation, path_loss, steering_vector
from .complexity import ap_cost, cpu_cost
from .errors import (ConditioningError, ConfigError, DegenerateChannelError, ExperimentError,
                     GeometryError, SimCellFreeError)
from .fusion import FusionReport, fuse, hwi_saturation_limit
from .harness import ExperimentSpec, evaluate, realize, run_experiment, run_point
from .linklevel import empirical_sinr
from .local_opt import assign_targets, layer_update, optimize_ap
from .scenario import NetworkLayout, SystemConfig, build_layout, read_config_file
from .sim_stack import SurfaceState, compose_G, equivalent_channels

__all__ = [
    "ConditioningError", "ConfigError", "DegenerateChannelError", "ExperimentError", "ExperimentSpec",
    "FusionReport", "GeometryError", "NetworkLayout", "PropagationSet", "SimCellFreeError",
    "SurfaceState", "SystemConfig", "ap_cost", "assign_targets", "build_layout",
    "build_propagation", "compose_G", "cpu_cost", "empirical_sinr", "equivalent_channels",
    "evaluate", "fuse", "hwi_saturation_limit", "layer_update", "optimize_ap", "path_loss",
    "read_config_file", "realize", "run_experiment", "run_point", "steering_vector",
]
