//! Distributions, entropies and the Dirichlet/Haar Monte-Carlo checks.

pub mod dirichlet;
pub mod dist;
pub mod oracle;
pub mod posterior;
pub mod quantum;

pub use dirichlet::{sample_dirichlet, sample_dirichlet_posterior};
pub use dist::{binary_entropy, collision_probability, entropy, smooth_min_entropy, CdfSampler, Dist, EntropyKind};
pub use oracle::{oracle_check, Comparison, LemmaId, OracleParams, OracleReport};
pub use posterior::posterior_mean;
pub use quantum::{holevo_from_schmidt, schmidt_coefficients, von_neumann_conditional, von_neumann_entropy, DensityMatrix};
