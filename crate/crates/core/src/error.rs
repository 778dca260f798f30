use alloc::string::String;

use crate::net::packet::{FlowId, Psn};
use crate::time::SimTime;

/// Invalid experiment setup, detected before the first event runs.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid `{key}`: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Conditions that abort a run in progress.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("flow {flow}: SACK acknowledges PSN {psn} which was never sent")]
    SackForUnsent { flow: FlowId, psn: Psn },
    #[error("deadlock at {at}: {pending} messages can never be released")]
    Deadlock { at: SimTime, pending: usize },
    #[error("run exceeded its time limit {limit} with {incomplete} messages incomplete")]
    TimeLimit { limit: SimTime, incomplete: usize },
}
