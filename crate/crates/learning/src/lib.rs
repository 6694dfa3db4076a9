//! Parameter and structure learning for decision networks.

pub mod citest;
pub mod dataset;
pub mod em;
pub mod error;
pub mod structure;
pub mod synth;

pub use citest::{chi_square_ci_test, chi_square_ci_test_limited, CiResult};
pub use dataset::{CaseDataset, MISSING};
pub use em::{em_fit, smoothed_frequencies, with_uniform_tables, EmConfig, FitReport};
pub use error::{LearningError, Result};
pub use structure::{learn_structure, ConstraintSet, EdgeMark, LearnConfig, Pdag, PdagEdge};
pub use synth::{aa_constraints, aa_ground_truth, aa_structure, sample, synth_aa_data};
