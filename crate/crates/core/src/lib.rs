//! Window mean-payoff synthesis on finite MDPs.
//!
//! Decides whether a player can maximise the expected window mean-payoff
//! while guaranteeing a threshold surely, almost surely or with a given
//! probability, and builds witness strategies as Mealy machines.

pub mod bp;
pub mod error;
pub mod fixtures;
pub mod games;
pub mod gen;
pub mod graph;
pub mod lasso;
pub mod lp;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod rational;
pub mod sim;
pub mod strategy;
pub mod synthesis;
pub mod values;

pub use error::{ParseError, Result, SolverError, Violation};
pub use lasso::{lasso_value, Lasso};
pub use model::{parse_mdp, AffineMap, Edge, Mdp, MdpBuilder, Owner, Vertex};
pub use objective::{GuaranteeQuery, Mode, Objective};
pub use rational::{format_rational, parse_rational, Rational};
