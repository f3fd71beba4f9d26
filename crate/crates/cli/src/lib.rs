//! Command-line pipeline and HTTP suggestion service built on
//! `happiness_core`.

pub mod cli;
pub mod db;
pub mod feedback;
pub mod service;
