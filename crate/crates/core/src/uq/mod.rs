//! Benchmark data and experiments: the parametric diffusion problem with its
//! integral quantity of interest, recovery phase diagrams, and weighted spectra.

mod diffusion;
mod experiments;

pub use diffusion::{
    generate_samples, harmonic_number, poisson_qoi_series, poisson_series, qoi, qoi_sample, solve_diffusion, solve_fd,
    CoefficientKind, DiffusionModel, Field, QoiSample, Sampling, CG_TOLERANCE, DEFAULT_GRID, DEFAULT_PARAMETERS,
    MIN_GRID,
};
pub use experiments::{
    derive_seed, phase_diagram, phase_run, spectrum_experiment, tail_mass, PhaseDiagram, PhaseDiagramConfig,
    PhaseTarget, SpectrumReport, SpectrumWeight, TEST_SAMPLES,
};
