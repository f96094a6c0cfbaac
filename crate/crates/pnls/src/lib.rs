//! Numerical laboratory for curved dark-soliton fronts of the 2D parametric
//! nonlinear Schrödinger equation.

pub mod cli;
pub mod coefficients;
pub mod curveflow;
pub mod interface;
pub mod line1d;
pub mod params;
pub mod pnls2d;
pub mod spectra;
