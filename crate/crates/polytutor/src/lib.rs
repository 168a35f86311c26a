//! The tutoring service around `polytutor-core`: content packs on disk,
//! translation backends, the event log, the HTTP API and the operator CLI.

pub mod auth;
pub mod cli;
pub mod demo;
pub mod eventlog;
pub mod glossary;
pub mod http;
pub mod pack;
pub mod replay;
pub mod service;
pub mod simulate;
pub mod translation;
