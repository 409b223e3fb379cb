//! Greedy coalition auction (GCAA) for dynamic, decentralized task
//! allocation among double-integrator agents.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: agents, tasks, scenarios and the utility algebra
//!   (expected coalition reward, completion cost, task/global/marginal utility).
//! * [`control`]: minimum-effort control of a double integrator, cost-to-go,
//!   fixed-step integration and loiter entry planning.
//! * [`auction`]: bid vectors, the three synchronous auction phases and the
//!   main GCAA loop.
//! * [`simulator`]: the receding allocation loop, random scenario generation
//!   and parameter sweeps.
//! * `oracle` (feature `oracle`): brute-force references for tests.

pub mod auction;
pub mod control;
pub mod model;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod seeding;
pub mod simulator;

/// Planar vector used for positions, velocities and accelerations.
pub type Vec2 = nalgebra::Vector2<f64>;

pub use auction::{
    build_comm_graph, run_auction, run_gcaa, AuctionOptions, AuctionResult, BidState,
    CommunicationGraph, ScenarioUtility, UtilityModel,
};
pub use control::{
    agent_task_cost, control_law, cost_to_go, integrate_step, plan_loiter_entry,
    BoundaryConditions, ControlError, ControlLawParams, CostBackend, CostConfig, LoiterPlan,
};
pub use model::{
    AgentState, AgentStatus, AllocationProfile, Assignment, CommRange, CostTable, ModelError,
    Scenario, Task, TaskKind,
};
pub use simulator::{
    generate_random_scenario, sweep, GeneratorParams, MetricsSeries, RunOutput, SimConfig,
    SimError, SimulationState, Simulator, SweepAxis, SweepRow,
};
