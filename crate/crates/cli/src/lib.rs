//! Command-line front end and live web-socket service for the trainer engine.

pub mod commands;
pub mod service;
