//! Prequantization of the torus in Zak coordinates.
//!
//! Sections of the level-`N` line bundle over `T²` are represented by `|N|`
//! Hermite expansions on the real line. On that basis the operators
//! `Q_N(f)` for trigonometric polynomials `f` are block matrices, and the
//! crate checks their algebra numerically: the bracket-to-commutator rule,
//! the Heisenberg relations, the unitarity of the Zak map, and the
//! dimension of commutants.
//!
//! Modules build on each other in order: [`trigpoly`], [`hermite`],
//! [`zakspace`], [`prequant`], [`commutant`], and [`suite`] for the
//! verification runs behind the `torusq` binary. The guide in `book/`
//! walks through each of them; its snippets run as doctests.

pub mod commutant;
pub mod error;
pub mod hermite;
pub mod prequant;
pub mod suite;
pub mod trigpoly;
pub mod zakspace;

pub use error::{Error, Result};

// The guide chapters are compiled as doctests, one module per chapter.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/trigpoly.md")]
    mod trigpoly {}
    #[doc = include_str!("../../../book/src/hermite.md")]
    mod hermite {}
    #[doc = include_str!("../../../book/src/zakspace.md")]
    mod zakspace {}
    #[doc = include_str!("../../../book/src/prequant.md")]
    mod prequant {}
    #[doc = include_str!("../../../book/src/commutant.md")]
    mod commutant {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
