//! Exact simulation of a probe spin dephasing under a star-coupled spin-1/2
//! bath, with selective probe measurements that condition (and purify) the
//! bath state.
//!
//! The bath is kept in its exact diagonal form: a distribution over the
//! eigenvalues of the bath field operator ([`bath_model`]). Projective probe
//! measurements act on it as diagonal Kraus maps ([`measurement_kernel`]),
//! from which probe observables ([`observables`]), sampled or enumerated
//! outcome trajectories ([`trajectory_sampler`]) and scripted end-to-end
//! runs ([`protocols`]) are built. [`oracle`] re-derives everything by brute
//! force over spin configurations for small baths.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath_model;
pub mod measurement_kernel;
pub mod observables;
pub mod oracle;
pub mod protocols;
pub mod trajectory_sampler;
