//! Simulation and moment-closure analysis of Moran and Wright-Fisher
//! community models with immigration and selection in a time-varying
//! environment.
//!
//! * [`env`] builds environment paths `(m_t, s_t)` and the immigration pool.
//! * [`moran`] simulates the finite community event by event.
//! * [`wf_sde`] simulates the diffusion limit by Euler-Maruyama.
//! * [`moments`] integrates the closed moment systems and derives the expected
//!   Simpson index and hitting-time distributions.
//! * [`longtime`] holds absorption, boundary and equilibrium analytics.
//! * [`montecarlo`] runs seeded replicate ensembles and compares them to the
//!   closure.
//!
//! Rates `m` and `s` are always in diffusion units. The discrete simulator
//! divides them by the community size J and runs `J^2` events per unit time.

pub mod env;
pub mod error;
pub mod io;
pub mod linalg;
pub mod longtime;
pub mod moments;
pub mod montecarlo;
pub mod moran;
pub mod quadrature;
pub mod rng;
pub mod wf_sde;

pub use error::{Error, Result};
