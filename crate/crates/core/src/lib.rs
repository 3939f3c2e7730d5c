//! Core of the webpilot web-automation engine.

pub mod action;
pub mod agent;
pub mod cache;
pub mod clock;
pub mod component;
pub mod distill;
pub mod driver;
pub mod eval;
pub mod llm;
pub mod pricing;
pub mod state;

pub use action::{ActionCommand, ActionVerb, SecondaryParam};
pub use component::ComponentId;
