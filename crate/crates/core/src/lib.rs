//! Bilipschitz embeddings of finite point sets between finite-dimensional
//! normed spaces, glued along a logarithmic spiral from a bank of
//! almost-isometric linear maps, with every distortion inequality checked
//! numerically.
//!
//! The pipeline: [`schedule`] fixes the radii and weights, [`pointset`]
//! splits the input into overlapping shells, [`bank`] builds and selects the
//! linear maps, [`glue`] evaluates the embedding, and [`verify`] checks every
//! pair against the closed-form bounds in [`theory`].

pub mod bank;
pub mod error;
pub mod glue;
pub mod pointset;
pub mod run;
pub mod schedule;
pub mod spaces;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
