//! Weak Galerkin mixed finite elements for the stationary Navier-Stokes equations in
//! pseudostress-velocity form on polygonal meshes.

pub mod analysis;
pub mod basis;
pub mod cli;
pub mod mesh;
pub mod quadrature;
pub mod forms;
pub mod stability;
pub mod system;
pub mod wg_space;
