//! Numerical laboratory for Darcy–Boussinesq convection in layered porous
//! media with sharp or diffuse material interfaces.

pub mod domain;
pub mod evolve;
pub mod experiments;
pub mod error;
pub mod field;
pub mod fourier;
pub mod io;
pub mod ledger;
pub mod operator;
pub mod pressure;
pub mod probes;
pub mod quadrature;
pub mod sampler;
pub mod tridiag;

pub use domain::{
    build_background, choose_delta, sample_coefficients, BackgroundProfile, CoefficientField,
    DeltaChoice, Grid, LayerConfig,
};
pub use error::{Error, Result};
pub use fourier::Fourier;
pub use evolve::{run, run_group, Model, Problem, Row, RunConfig, RunOutput, Scheme, SeriesMeta, SimState, TimeSeries};
pub use experiments::Study;
pub use io::{SimConfig, Setup};
pub use ledger::{compute_constants, BoundLedger, CheckReport, EmbeddingConstants, Provenance, Tagged};
pub use operator::{eigensolve, DiffusionOperator, FieldExpansion, KMethod, Spectrum};
pub use pressure::{FlowField, PressureSolver};
pub use sampler::EnsembleSpec;
