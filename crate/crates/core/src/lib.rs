//! Planning support for locating refugee housing on a tangible table.
//!
//! Parcels and restriction layers go in ([`parcels`], [`geom`]), each parcel
//! gets a suitability class and a capacity estimate ([`suitability`]), bricks
//! on the table are read back from camera frames ([`tangible`]), a workshop
//! session turns brick events into proposals and a running countdown
//! ([`session`], [`topics`]), and afterwards suggestions go through a rule
//! based feasibility check ([`screening`]). [`synth`] builds cities with known
//! answers for testing.

pub mod geom;
pub mod parcels;
pub mod screening;
pub mod session;
pub mod suitability;
pub mod synth;
pub mod tangible;
pub mod topics;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/suitability.md")]
    mod suitability {}
    #[doc = include_str!("../../../book/src/tangible.md")]
    mod tangible {}
    #[doc = include_str!("../../../book/src/session.md")]
    mod session {}
    #[doc = include_str!("../../../book/src/screening.md")]
    mod screening {}
    #[doc = include_str!("../../../book/src/synth.md")]
    mod synth {}
    #[doc = include_str!("../../../book/src/operations.md")]
    mod operations {}
}
