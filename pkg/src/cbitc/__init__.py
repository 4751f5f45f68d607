"""Cooperative beamforming with interference transmission and cancellation
(CB-ITC) for a cellular-connected UAV: channel and network models, closed-form
and conic-programming optima, a distributed protocol and a Monte-Carlo harness.
"""
from .beamforming import (Beamformer, PowerAllocation, Scheme, SinrReport, closed_form_n1_k1,
                          closed_form_n1_k_many, empirical_sinr, optimal_phases, sinr_cb_itc,
                          sinr_conventional_cb, sinr_no_cb)
from .channel import AntennaConfig, ChannelCoefficient, ChannelParams, noise_power, sample_channel
from .conic import ConeProgram, ConeSolution, Status, solve
from .distributed import (CooperationGraph, ProtocolMessage, SplitState, build_cooperation_graph,
                          closed_loop_round, distributed_power_allocation, open_loop_split,
                          residual_interference, run_protocol)
from .harness import ExperimentConfig, ResultRow, emit_csv, run_experiment
from .solver import build_p2_program, centralized_optimum, recover_allocation, solve_p2
from .topology import HexGrid, build_grid, neighbors

__version__ = "0.1.0"
