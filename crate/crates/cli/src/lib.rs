//! Command-line front end for moment guided diffusion.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod fieldfile;
