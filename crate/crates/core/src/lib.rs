//! Link-level model of a TDD Massive MIMO downlink with blind effective-gain
//! estimation at the users.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It covers:
//!
//! * [`numerics`]: complex vectors and matrices, CN(0, I) sampling, Cholesky
//!   solves and seeded counter-based random streams.
//! * [`channel`]: Rayleigh and keyhole small-scale fading, annulus cell
//!   geometry, and channel-hardening measures.
//! * [`uplink`]: pilot-based linear MMSE channel estimation at the base station.
//! * [`precoding`]: MR and ZF precoders and power control.
//! * [`downlink`]: effective gains and received payload blocks.
//! * [`estimation`]: the blind effective-gain estimator and its baselines.
//! * [`rates`]: the side-information capacity bound via kernel density
//!   estimation, the use-and-forget bound, net throughput and normalized MSE.
//! * [`link`]: glue that draws one coherence interval end to end and the
//!   Monte Carlo statistics that depend on it.
#![no_std]
// `!(x > 0.0)` is used on purpose so NaN is rejected; index loops mirror the
// matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod channel;
pub mod downlink;
pub mod error;
pub mod estimation;
pub mod link;
pub mod numerics;
pub mod precoding;
pub mod rates;
pub mod stats;
pub mod uplink;

pub use error::{Error, Result};
pub use numerics::{CMat, CVec, RandomStream, C64};
