//! Cross-module checks, mostly against the reference implementations shared
//! with the acceptance target.

#[path = "../../tests/support/oracles.rs"]
mod oracles;

mod fixtures;
mod pipeline;
