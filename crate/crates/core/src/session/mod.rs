//! Listeners, session lifecycle with reconnect, latest-wins frame
//! ingestion and the per-session pipeline.

mod clock;
mod connection;
mod gateway;
mod metrics;
mod pipeline;
mod recorder;
mod server;

pub use clock::{Clock, ManualClock, SystemClock};
pub use connection::{handle_connection, ConnectionEnd, OUTBOUND_CAPACITY};
pub use gateway::{AttachToken, Gateway, SessionInfo, SessionPhase, SubmitOutcome};
pub use metrics::{FrameTrace, MetricsSnapshot};
pub use pipeline::{build_backend, jpeg_dims, Pipeline};
pub use recorder::Recorder;
pub use server::{bind, router, serve_io, serve_tcp, serve_ws, ServeError};
