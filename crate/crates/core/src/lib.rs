//! Finite-group equivariant convolutional networks from first principles.
//!
//! The crate is organized around the pipeline of building such a network:
//!
//! * [`group`] — exact arithmetic for stabilizer groups (`C4`, `D4`, `S_n`)
//!   and the semidirect products `Z^n ⋊ H` acting on grids;
//! * [`rep`] — representations as explicit matrix families: regular,
//!   quotient and irreducible representations, characters, multiplicities
//!   and isotypic block diagonalization;
//! * [`hom`] — intertwiner space bases, their dimensions, parameter
//!   efficiency, and assembly of learnable steerable filter banks;
//! * [`nn`] — steerable feature maps, convolution, admissible
//!   nonlinearities, fiber/quotient pooling, whole networks with exact
//!   reverse-mode gradients, and desk-scale training;
//! * [`gcnn`] — the group-convolution view (feature maps on `G`) and the
//!   bridge identifying it with regular-capsule steerable networks;
//! * [`verify`] — the numerical harness that sweeps group transforms and
//!   reports per-layer equivariance residuals;
//! * [`io`] — CSV / PGM / JSON interchange formats.

// index loops over matrix dimensions read better than iterator chains here
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod gcnn;
pub mod grid;
pub mod group;
pub mod hom;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod rep;
pub mod verify;

pub use error::{Error, Result};
