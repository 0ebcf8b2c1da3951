//! Data machinery for whole-proof provers.
//!
//! The crate is organized around the stages of a proving-data pipeline:
//! statement corpora ([`corpus`]), proof verification ([`verify`]),
//! formalization quality gates ([`quality`]), the expert-iteration engine
//! ([`iterate`]), benchmark evaluation ([`evaluate`]), preference-learning
//! data construction ([`prefdata`]), and divide-and-conquer proof sketches
//! ([`sketch`]). The [`cli`] module wires everything into the `proofmill`
//! binary; [`config`] and [`pipeline`] drive end-to-end runs.
//!
//! All backends (checker, prover, judge, simplifier) are pluggable traits
//! with deterministic in-process mocks, so the full system runs at desk
//! scale without any external services.

pub mod backend;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod evaluate;
pub mod http;
pub mod iterate;
pub mod pipeline;
pub mod prefdata;
pub mod prover;
pub mod quality;
pub mod seeded;
pub mod sketch;
pub mod text;
pub mod verify;
