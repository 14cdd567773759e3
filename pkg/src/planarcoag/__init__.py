"""Coagulating planar Brownian particles: simulator, limit PDE, and rate theory."""

from .model import (
    Configuration,
    GaussianBlob,
    InitialData,
    KernelSpec,
    MassFunctions,
    MollifierSpec,
    Particle,
    SmoothBump,
    Species,
    UniformDisc,
    beta,
    beta_table,
    bump_kernel,
    default_mollifier,
    log_scale,
    monodisperse,
    particle_count,
    sample_initial_configuration,
    tau,
    validate_hypothesis,
    validate_initial_data,
)
from .simulation import (
    EmpiricalMeasure,
    Event,
    RunResult,
    SimConfig,
    StossTracking,
    brownian_step,
    build_cell_index,
    coagulate,
    empirical_measure,
    integrate_test_function,
    pair_rate,
    q_functional,
    run,
    step,
    stosszahlansatz_rhs,
)

__version__ = "0.1.0"
