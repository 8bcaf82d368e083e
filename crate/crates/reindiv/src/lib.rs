//! Optimal excess-of-loss reinsurance and dividend payout for an insurer
//! holding several homogeneous contracts under a solvency constraint.
//!
//! The reserve follows a controlled pure-jump process: premium income scales
//! with the reserve (the solvency rule caps the contract count at `a·X`),
//! claims arrive as a compound Poisson process, the insurer chooses an
//! excess-of-loss retention level and a cumulative dividend payout. The value
//! function maximizes expected discounted dividends until ruin and solves a
//! first-order Hamilton-Jacobi-Bellman variational inequality
//!
//! ```text
//! max{ H(x, V, V'(x)), 1 - V'(x) } = 0,   V(0) = 0.
//! ```
//!
//! Crate layout:
//! - [`model`]: market constants, premium rate, solvency coefficient,
//!   minimal retention, assumption checks.
//! - [`hjb`]: upwind finite differences + Howard policy iteration for the
//!   variational inequality on the transformed domain `y = x/(x+1)`.
//! - [`simulate`]: exact event-driven Monte Carlo of the controlled reserve,
//!   including the collective-risk counter-example.
//! - [`verify`]: executable property checks tying the solver, the simulator
//!   and the dynamic-programming oracle together.
//! - [`config`] / [`cli`]: run configuration and the command surface.

pub mod cli;
pub mod config;
pub mod hjb;
pub mod model;
pub mod simulate;
pub mod verify;
