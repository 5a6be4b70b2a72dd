//! Swarm-versus-swarm engagement on discretized terrain.
//!
//! Two swarms move over a grid of bins by sampling from column-stochastic
//! transition matrices. The defending (blue) swarm picks a boundary layer
//! around its base, predicts where the attacking (red) swarm will cross it,
//! and synthesizes a chain that converges onto that crossing distribution.

pub mod config;
pub mod engagement;
pub mod gridworld;
pub mod markov;
pub mod output;
pub mod simulator;
pub mod strategy;
pub mod swarm;
mod transport;
