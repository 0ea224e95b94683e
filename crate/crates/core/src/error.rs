use alloc::string::String;
use alloc::vec::Vec;

use crate::groups::Isometry;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group closure exceeds max order {max_order}")]
    GroupTooLarge { max_order: usize, found: Vec<Isometry> },

    #[error("invalid isometry: {0}")]
    InvalidIsometry(String),

    #[error("empty boundary set: no group element brings the point within epsilon of the region")]
    EmptyBoundarySet,

    #[error("smoothing width {epsilon} must be positive and below the region inradius {inradius}")]
    EpsilonTooLarge { epsilon: f64, inradius: f64 },

    #[error("configuration has {got} electrons, ansatz expects {expected}")]
    ElectronCount { expected: usize, got: usize },

    #[error("configuration is at a node of the wavefunction")]
    Node,

    #[error("subset must be nonempty")]
    EmptySubset,

    #[error("index {index} out of range for group of order {order}")]
    ElementIndex { index: usize, order: usize },

    #[error("subsample size {k} out of range for group of order {order}")]
    SubsampleSize { k: usize, order: usize },

    #[error("batch size {n} is not divisible by {k}")]
    Divisibility { n: usize, k: usize },

    #[error("oracle requires non-interacting Hamiltonian")]
    Interacting,

    #[error("plane-wave basis too small: highest occupied level moved by {shift:e} under a larger cutoff")]
    BasisTooSmall { shift: f64 },

    #[error("spectrum has {available} levels, {needed} needed")]
    InsufficientSpectrum { needed: usize, available: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("configuration is not symmetric under group element {index}")]
    NotSymmetric { index: usize },

    #[error("too few samples: {got} (need at least {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("training diverged at step {step}: energy {energy}")]
    Diverged { step: usize, energy: f64 },

    #[error("node resample budget exceeded ({0} resamples)")]
    ResampleBudget(usize),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("fixture is not invariant: {0}")]
    NotInvariant(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
