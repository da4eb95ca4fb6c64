//! Capacity-expansion LPs over representative periods with long-duration
//! storage (LDS).
//!
//! The pipeline is: load a [`config::SystemConfig`] and its time series,
//! aggregate the horizon into representative periods ([`aggregation`]),
//! build the base dispatch/investment LP ([`cem`]), add one of four LDS
//! inventory formulations ([`lds`]), solve it ([`lp`]) and audit the
//! reconstructed full-horizon state of charge ([`analysis`]).

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod aggregation;
pub mod analysis;
pub mod cem;
pub mod config;
pub mod lds;
pub mod lp;
