//! Core model of an adaptive, multilingual tutor.
//!
//! Learners fill in a learning-style questionnaire, take a pre-test, read a
//! lesson written for their style, and take a post-test that decides between
//! advancing and remediation. A small forward-chaining rule engine picks each
//! step. Learner state is event-sourced, and all outbound text goes through a
//! pluggable [`translation::Translator`].
//!
//! This crate is `no_std` (with `alloc`) and does no I/O. File formats,
//! persistence, HTTP and the command line live in the `polytutor` crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assessment;
pub mod knowledge;
pub mod learner;
pub mod rules;
pub mod style;
pub mod text;
pub mod translation;
pub mod tutor;
