//! Edge navigation gateway: wire protocol, sessions, perception backends,
//! scene interpretation, instruction composition and offline evaluation.

pub mod compose;
pub mod config;
pub mod eval;
pub mod interpret;
pub mod perception;
pub mod protocol;
pub mod session;
pub mod types;

pub use config::{ConfigError, GatewayConfig};
pub use eval::{EvalReport, Recording};
pub use session::{Gateway, Pipeline};
pub use types::{Direction, Frame, Priority, SignClass, Units};
