//! Learning predictive state representations with optimistic (UCB) and
//! pessimistic (LCB) confidence bounds on small tabular problems.
//!
//! Everything here is exact: trajectory distributions are enumerated over the
//! full `(O·A)^H` tree, so the crate targets desk-scale instances. See
//! [`space::enumeration_cap`] for the guard.

pub mod bonus;
pub mod config;
pub mod error;
pub mod estimation;
pub mod lemmas;
pub mod linalg;
pub mod numeric;
pub mod offline;
pub mod online;
pub mod params;
pub mod planning;
pub mod policy;
pub mod pomdp;
pub mod psr;
pub mod seeding;
pub mod space;
pub mod verify;

pub use error::{PsrError, Result};
pub use policy::{Composite, DeterministicTree, Policy, UniformActionSeq};
pub use pomdp::{Reward, TabularPomdp};
pub use psr::{CoreTestSet, PsrModel};
pub use space::{Future, History, ObsActSpace};
