//! Decomposed contrastive vision-language rewards for skill learning.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation:
//!
//! * [`embedding`]: the text / video-segment encoder interface and a
//!   deterministic synthetic backend,
//! * [`reward`]: the NCE-style sub-goal reward over sliding windows plus the
//!   single-frame and whole-trajectory baselines,
//! * [`decompose`]: sub-goal decompositions and prompt sets,
//! * [`label`]: success labeling of final observations,
//! * [`selfimitate`]: the success buffer, terminal bonus and imitation term,
//! * [`env`]: a 2D manipulation suite with ground-truth events,
//! * [`nn`], [`policy`] and [`trainer`]: a small actor-critic learner.
//!
//! File formats, clients and the command line live in the `vlreward-lab` crate.
#![no_std]
// `!(x > 0.0)` is the idiom that also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod decompose;
pub mod embedding;
pub mod env;
pub mod error;
pub mod label;
pub mod math;
pub mod nn;
pub mod policy;
pub mod reward;
pub mod selfimitate;
pub mod trainer;

pub use error::{Error, Result};
