//! Exact-arithmetic toolkit for Mumford curves: decorated quotient graphs
//! of Schottky normalizers, their volumes and curvatures, abelian covering
//! graphs, bounded-exhaustive tree censuses, Bruhat-Tits tree geometry over
//! Q_p, and the Subrao family of curves with large automorphism groups.

pub mod cover;
pub mod enumerate;
pub mod graph;
pub mod group;
pub mod rat;

pub use cover::{AbelianQuotient, CoveringGraph};
pub use graph::{DecoratedGraph, Edge, Vertex};
pub use group::{GroupDesc, RamificationProfile};
pub use rat::Rat;
