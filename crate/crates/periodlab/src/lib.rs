//! periodlab: periods of one-parameter Calabi-Yau Picard-Fuchs operators at
//! arbitrary precision, analytic continuation and monodromy, Deligne periods
//! c+/c- assembled from mirror-symmetry data, modular-form L-values, and
//! numerical verification of the resulting rational identities (for the
//! AESZ34 fiber at phi = -1/7, c+ = -(2401/32) L(f2,1) L(f4,2)).
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`pf_core`] -- exact Picard-Fuchs operators, their singular points, and
//!    the canonical Frobenius basis at the MUM point phi = 0;
//! 2. [`continuation`] -- Taylor-step transport of the solution space along
//!    singularity-avoiding paths, Wronskians, monodromy;
//! 3. [`mirror`] -- prepotential data and the transition matrix S to the
//!    integral symplectic period basis;
//! 4. [`deligne`] -- the involution F_infinity, its eigenbases, symplectic
//!    pairings, and the periods c+/c- with Tate-twist normalization;
//! 5. [`lfunc`] -- modular-form coefficients (point counting, Hecke
//!    expansion, eta products), L-values by the approximate functional
//!    equation, Gamma factors, the j-invariant;
//! 6. [`recognition`] -- rational recognition and digit agreement;
//! 7. [`lmfdb`] -- coefficient fetching with an on-disk cache;
//! 8. [`cli`] -- the command-line surface.

pub mod cli;
pub mod continuation;
pub mod deligne;
pub mod lfunc;
pub mod linalg;
pub mod lmfdb;
pub mod mirror;
pub mod num;
pub mod pf_core;
pub mod recognition;

pub use continuation::{monodromy, plan_path, transport, PathPlan, StateMatrix};
pub use deligne::{DeligneReport, Involution};
pub use lfunc::{l_value, ModularForm};
pub use mirror::{build_s, MirrorData, SMatrix};
pub use num::{Complex, Consts};
pub use pf_core::{eval_canonical, frobenius_mum, BranchedPoint, CanonicalBasis, Operator};
pub use recognition::{digits_agreement, recognize_rational, RecognizedRational};
