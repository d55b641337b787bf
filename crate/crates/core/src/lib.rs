//! Stable reduction of three-point cyclic `p`-power covers of the projective
//! line, computed and certified in exact rational arithmetic.
//!
//! The crate is layered: [`tower`] supplies exact `p`-adic valuations in
//! radical towers, [`series`] expands the cover on a disk and classifies the
//! reduction of the resulting torsor, [`ramification`] handles filtrations and
//! conductors, [`graph`] holds the decorated dual graph with its validators,
//! and [`cyclic`] / [`metacyclic`] assemble everything per cover.

pub mod config;
pub mod cyclic;
pub mod graph;
pub mod metacyclic;
pub mod ramification;
pub mod rat;
pub mod series;
pub mod tower;
