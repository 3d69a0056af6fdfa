//! Client/cloud exchange for encrypted updates: role-tagged requests, the
//! cloud's circuit evaluation, and the wire between them.

mod client;
mod cloud;
mod message;
mod rules;
pub mod samples;
mod setup;
mod transport;

pub use client::{Client, Decrypted, Successor, TdInputs, ZInputs};
pub use cloud::{Cloud, MAX_DEGREE};
pub use message::{ClientRequest, CloudResponse, Role, RoleKind, MESSAGE_MAGIC, MESSAGE_VERSION};
pub use rules::{
    exp_neg_circuit, q_backup_circuit, taylor_depth, taylor_exp, taylor_remainder, td_circuit,
    z_circuit, BackupTerm, Rule,
};
pub use setup::{SetupMessage, SETUP_MAGIC, SETUP_VERSION};
pub use transport::{
    read_frame, serve, serve_connection, write_frame, InProcess, TcpTransport, Transport,
};

#[cfg(test)]
mod tests;
