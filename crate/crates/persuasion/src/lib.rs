// SPDX-License-Identifier: Apache-2.0

//! Optimal information disclosure to a patient who avoids medical tests.
//!
//! The doctor commits to what she reveals before the test (ex ante) and after
//! it (interim). The patient cares about anticipated health through a
//! distortion `phi`, so bad news can keep him from testing at all.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod exante;
pub mod extensions;
pub mod interim;
pub mod model;
pub mod oracle;

pub use model::{
    AnticipationCurve, Atom, Belief, InterimRegion, Model, ModelError, ModelParams, PolicyReport,
    PosteriorLottery, Regime, RegimeLabel, StagePolicy, Thresholds,
};
