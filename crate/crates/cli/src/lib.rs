//! Run configuration for the `hvp` binary, exposed so the config parser can
//! be exercised on its own.

pub mod config;
