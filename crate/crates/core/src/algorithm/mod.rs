//! The per-agent primal-dual round and the synchronous engine around it.

mod engine;
mod mapping;
mod schedule;

pub use engine::{
    agent_round, run, AgentState, AgentStep, InvariantKind, InvariantViolation, RoundInput, RunOptions,
    Trace,
    ViolationPolicy,
};
pub use mapping::{ContractivityReport, DynamicMapping, MappingFn};
pub use schedule::{StepsizeSchedule, Stepsizes};
