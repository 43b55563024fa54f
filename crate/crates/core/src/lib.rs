//! Dynamic action interpolation (DAI) for actor-critic learning.
//!
//! An expert controller and a TD3 learner act together: at environment step
//! `t` the executed action is `(1 - α(t))·a_E(s) + α(t)·a_RL(s)`, with `α`
//! annealing from 0 to 1. The learner's objective is untouched; only the data
//! it sees changes.
//!
//! This crate is `no_std` + `alloc` and holds every algorithm: dense networks
//! with analytic backprop and Adam, the toy environments and their scripted
//! experts, the replay buffer, TD3 and behaviour cloning, the interpolation
//! schedules, the training loop, and the visitation diagnostics. File
//! formats, configuration and the command line live in `dai-lab`.
#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod agents;
pub mod dai;
pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod replay;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
