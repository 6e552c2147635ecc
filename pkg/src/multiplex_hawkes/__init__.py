"""Simulation and Bayesian inference for multiplex diffusion networks."""
from .errors import (DegenerateSupportError, EmptySupportError, MalformedInputError,
                     SupercriticalError, UndefinedAUCError)
from .model import (DelayKernel, Event, EventLog, Hyperparameters, MultiplexParams,
                    NodeParams, ParentAssignment, channel_vector, delay_density, delay_mass,
                    edge_probability, edge_probabilities, fit_delay_kernel, log_joint,
                    node_intensity, total_intensity)
from .generative import (SimulationConfig, replication_rngs, sample_adjacency,
                         sample_influence, sample_memberships, sample_params, simulate_cascades)
from .inference import ChainConfig, ChainResult, PosteriorSummary, run_chain
from .evaluation import (EvalReport, convergence_trace, edge_auc, evaluate, mae_influence,
                         parent_accuracy, parent_channel_accuracy, tae)

__version__ = "0.1.0"
