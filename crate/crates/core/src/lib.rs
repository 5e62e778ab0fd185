//! Signature-backed ownership verification for federated models.
//!
//! Every client of a federation holds a short-signature key pair. The server
//! hashes the concatenated public keys into a fixed-length watermark which the
//! clients embed into the normalization-scale parameters of the shared model
//! through a hinge-loss regularizer. Ownership of a suspect model is proved in
//! two steps: the extracted watermark must lie within the security boundary of
//! the hash of the published key list, and the claiming client must answer a
//! fresh challenge with a valid signature under its embedded key.
//!
//! The crate is `no_std` (with `alloc`). File formats, the command line and
//! wall-clock access live in the companion `fedsov` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attacks;
pub mod embedding;
pub mod error;
pub mod fl_sim;
pub mod hash_watermark;
pub mod pairing_sig;
pub mod protocol;
pub mod security_boundary;

pub use error::{Error, Result};
