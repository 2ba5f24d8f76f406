//! Stochastic simulator for indoor visible-light channels between an LED
//! array and a (possibly moving, rotating) photodiode or angle-diversity
//! receiver.
//!
//! The pipeline is: build [`scene::SceneParams`], draw a [`scene::Scene`]
//! realization from a [`rng::StreamSeed`], evaluate tap lists with
//! [`channel`], then reduce them with [`statistics`].

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod optics;
pub mod rng;
pub mod scene;
pub mod channel;
pub mod statistics;
pub mod config;
pub mod table;
pub mod experiment;
