"""Deterministic desk-scale simulator for decentralized stochastic
optimization over unreliable networks: compressed messages, additive
channel noise, and random edge activation."""

from .algorithms import (ChocoParams, DsgdParams, NetworkState, RngStreams,
                         StepSizePlan, TiCoPDParams, choco_init, choco_sgd_step,
                         dsgd_init, dsgd_step, metropolis_weights, rate_regime_a,
                         rng_streams, theorem_step_sizes, ticopd_init, ticopd_step)
from .compression import (ChannelSpec, CompressorSpec, Message, bits_per_message,
                          contraction_estimate, qsgd, rand_k, top_k, transmit)
from .config import ExperimentConfig, list_presets, load_config, load_preset
from .errors import AssumptionViolationError, InvalidConfigError, InvalidInputError
from .graphs import (ActivationPolicy, EdgeActivation, Graph, SpectralConstants,
                     build_er_graph, complete_graph, graph_from_edge_text,
                     incidence_apply, path_graph, sample_activation, spectral_constants)
from .metrics import (Recorder, RunSummary, TraceRecord, consensus_error,
                      read_trace_csv, record, summarize, tail_average, write_trace_csv)
from .objectives import (GradSample, Problem, finite_diff_check, global_grad,
                         global_grad_norm_sq, global_loss, local_grad, make_linreg,
                         make_sigmoid, make_tiny_quadratic, smoothness_constant)
from .runner import run, run_single, sweep

__version__ = "0.1.0"
