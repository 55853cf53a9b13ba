//! Assessment of N-1 reliable power systems against unobservable
//! load-redistribution attacks.
//!
//! The pipeline mirrors the control-room loop: a DC network model feeds
//! real-time contingency analysis ([`rtca`]), whose security constraints feed
//! a security-constrained economic dispatch LP ([`sced`]). The attacker side
//! assembles a bi-level program over that dispatch ([`attack`]) and solves it
//! with a modified Benders decomposition ([`benders`]). The closed loop
//! (inject false loads, let the defender re-dispatch, measure physical
//! flows) lives in [`sim`].

pub mod attack;
pub mod benders;
pub mod cli;
pub mod config;
pub mod grid;
pub mod linalg;
pub mod lp;
pub mod network;
pub mod rtca;
pub mod sced;
pub mod sim;

pub use grid::{Branch, Bus, CaseFormat, Generator, GridCase};
pub use network::{DcNetwork, DistFactors, FlowState};
