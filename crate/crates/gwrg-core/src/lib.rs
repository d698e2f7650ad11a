//! Group-walk random graphs: implicit infinite host graphs, finite balls,
//! stopped random walks from the ball boundary, the random subgraphs those
//! walks trace out, and exact electrical-network references for everything
//! the Monte Carlo side estimates.

pub mod ball;
pub mod error;
pub mod estimators;
pub mod host;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod walk;

pub use ball::Ball;
pub use error::{Error, Result};
pub use host::{HostKind, HostSpec, Vertex};
pub use rng::StreamKey;
