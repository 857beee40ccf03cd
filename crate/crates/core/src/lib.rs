//! Energy balanced HEVI solver for the compressible Euler equations in an
//! x-z slice, on a mimetic spectral element complex.

pub mod checks;
pub mod config;
pub mod error;
pub mod hevi;
pub mod mesh;
pub mod numkit;
pub mod output;
pub mod polybasis;
pub mod simulation;
pub mod stability;
pub mod thermo;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/complex.md")]
    mod complex {}
    #[doc = include_str!("../../../book/src/stepping.md")]
    mod stepping {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
