//! Newline-delimited JSON wire protocol between monitor and plot UI, the
//! session state machine behind it, and the websocket server.

mod messages;
mod server;
mod session;

pub use messages::*;
pub use server::{run_headless, serve, RunOptions, RunReport, END_OF_TRACE, SESSION_PATH};
pub use session::{FeedItem, OutboundQueue, Session, SessionPlot};
