//! Maximum-likelihood estimation of covariance matrices constrained to
//! Toeplitz, banded Toeplitz, block-Toeplitz and Toeplitz-block-Toeplitz
//! sets, by majorization-minimization with ADMM (`atom1`) or Dykstra
//! (`atom2`) inner solvers. Also provides Cramér-Rao bounds and a
//! Monte-Carlo simulation kit.

pub mod atom1;
pub mod atom2;
pub mod crb;
pub mod dykproj;
pub mod error;
pub mod hermlin;
pub mod io;
pub mod mm;
pub mod simkit;
pub mod structsets;

pub use atom1::{atom1, atom1_from, Atom1Options};
pub use atom2::{atom2, atom2_from, Atom2Options};
pub use crb::{crb_report, CrbReport};
pub use error::{Error, Result};
pub use hermlin::{CMatrix, DataFactor, HermMat, Seed, SnapshotSet};
pub use mm::{data_factor, data_matrix, default_init, ExitReason, FitReport};
pub use structsets::{StructureSpec, ThetaVec};
