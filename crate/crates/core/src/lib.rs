//! Numerical laboratory for factorizing entire functions through holomorphic
//! foliations: truncated power series, a catalog of entire functions, local
//! IVP solutions with Hille bounds, analytic-continuation atlases and the
//! composition tools built on top of them.

pub mod atlas;
pub mod catalog;
pub mod comp_lab;
pub mod ivp;
pub mod ng;
pub mod quad;
pub mod series;
