//! Finite-element simulator for 2D Boussinesq natural convection with
//! artificial-compressibility ensemble (ACE) timestepping, plus the benchmark
//! drivers (cavity, timing, convergence, predictability) exposed to the CLI.

pub mod ace;
pub mod diag;
pub mod driver;
pub mod fem;
pub mod linsolve;
pub mod mesh;
pub mod mms;
pub mod perturb;
pub mod vtk;
