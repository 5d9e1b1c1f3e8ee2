//! Multi-vessel navigation lab: 3-DoF differential-thrust vessel dynamics,
//! a curriculum scenario world, planar LiDAR perception, COLREGs-shaped
//! rewards, distributional and classical controllers, and an evaluation
//! harness.

pub mod agents;
pub mod baselines;
pub mod colregs;
pub mod config;
pub mod dynamics;
pub mod episode;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod nn;
pub mod perception;
pub mod world;

pub use agents::{Action, Agent, AgentConfig, AgentKind, Transition};
pub use colregs::{EncounterClass, RewardConfig};
pub use config::LabConfig;
pub use dynamics::{BodyVelocity, Pose2D, ThrustDelta, ThrustPair, VesselParams, VesselState};
pub use episode::{run_episode, EpisodeResult, Policy};
pub use error::{Error, Result};
pub use geometry::Vec2;
pub use harness::{Controller, ControllerKind, ExperimentSet, MetricsSummary};
pub use perception::{Observation, PerceptionMode};
pub use world::{Scenario, World};
