//! Websocket front end for interactive sessions.

pub mod server;
