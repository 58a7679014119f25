//! HTTP API and command line front end for the steertm topic modelling
//! engine.

pub mod api;
pub mod commands;
pub mod options;
