//! Experiment harness for `persuasion-core`: config files, budget and
//! heterogeneity sweeps, simulation and oracle runs, CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;
