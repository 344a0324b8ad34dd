//! Active sequential hypothesis testing in unknown environments.
//!
//! Two families of agents share this crate:
//!
//! * the model-based baseline ([`chernoff`]) which tracks the exact posterior
//!   ([`belief`]) and picks actions from the maximin KL distribution;
//! * a belief-free learned agent made of three recurrent networks: a policy
//!   trained with clipped policy-gradient updates ([`policy`]), and two
//!   supervised decoders ([`decoders`]) that estimate the current error
//!   probability (monitor) and the true hypothesis (inference).
//!
//! [`pipeline`] trains the three networks in sequence and runs the composite
//! agent; [`eval`] reproduces fixed-horizon and sequential error tables.

pub mod belief;
pub mod checkpoint;
pub mod chernoff;
pub mod decoders;
pub mod env;
pub mod error;
pub mod eval;
pub mod lp;
pub mod nn;
pub mod pipeline;
pub mod policy;
pub mod rng;

pub use belief::BeliefState;
pub use chernoff::{ActionDistribution, ChernoffPolicy, KlMatrix, StopDecision};
pub use env::{EnvSide, EnvironmentPair, ObservationModel};
pub use error::{Error, Result};
pub use rng::EpisodeRng;
