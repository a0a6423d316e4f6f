//! Walsh–Paley analysis on the dyadic group: fast transforms, partial sums,
//! de la Vallée Poussin type means, block polynomials and divergence
//! constructions.

pub mod dyadic;
pub mod error;
pub mod grid_io;
pub mod random;
pub mod scalar;
pub mod walsh;
pub mod window;
pub mod means;
pub mod surd;
pub mod block;
pub mod orlicz;
pub mod diverge;
