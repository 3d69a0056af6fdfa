//! A fixed set of messages produced from fixed seeds at a toy ring size,
//! for checking the byte format against stored copies.

use std::sync::Arc;

use super::client::{Client, Successor, TdInputs, ZInputs};
use super::cloud::Cloud;
use super::message::{ClientRequest, CloudResponse};
use super::rules::Rule;
use super::setup::SetupMessage;
use crate::ckks::{Ciphertext, CkksContext, CkksParams};
use crate::{Error, Result};

pub const SAMPLE_SEED: u64 = 20;

/// Ring degree 32, depth 4, 40-bit scale. Far too small to be secure.
pub fn sample_params() -> Result<CkksParams> {
    CkksParams::generate(32, 60, 4, 40, 60)
}

/// `(file name, bytes)` for a setup message, one ciphertext, and one
/// request and response per rule.
pub fn sample_messages() -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut client = Client::new(sample_params()?, SAMPLE_SEED)?;
    let setup = client.setup(false);
    let cloud = Cloud::from_setup(&setup)?;
    let mut out = vec![("setup.bin", setup.to_bytes())];

    let td = TdInputs {
        value: 0.5,
        next_value: -0.25,
        alpha: 0.125,
        gamma: 0.9,
        reward: 1.0,
    };
    let z = ZInputs {
        value: 0.75,
        next_value: 0.5,
        alpha: 0.25,
        cost: 0.5,
    };
    let successors = [
        Successor {
            probs: vec![1.0, 0.5],
            rewards: vec![-0.1, 0.2],
            value: 0.4,
        },
        Successor {
            probs: vec![0.0, 0.5],
            rewards: vec![0.0, -1.0],
            value: -0.3,
        },
    ];
    let requests = [
        ("request_td0.bin", "response_td0.bin", client.prepare_td(Rule::Td0, &td)?),
        ("request_sarsa.bin", "response_sarsa.bin", client.prepare_td(Rule::Sarsa, &td)?),
        ("request_z.bin", "response_z.bin", client.prepare_z(&z, 5)?),
        (
            "request_backup.bin",
            "response_backup.bin",
            client.prepare_backup(0.9, &successors)?,
        ),
    ];
    out.push(("ciphertext.bin", requests[0].2.roles[0].1.to_bytes()));
    for (rq, rs, req) in requests {
        let resp = cloud.evaluate(&req)?;
        out.push((rq, req.to_bytes()));
        out.push((rs, resp.to_bytes()));
    }
    Ok(out)
}

/// Parses a sample by its file name and encodes it again.
pub fn reencode_sample(ctx: &Arc<CkksContext>, name: &str, bytes: &[u8]) -> Result<Vec<u8>> {
    if name.starts_with("setup") {
        Ok(SetupMessage::from_bytes(bytes)?.to_bytes())
    } else if name.starts_with("ciphertext") {
        Ok(Ciphertext::from_bytes(ctx, bytes)?.to_bytes())
    } else if name.starts_with("request") {
        Ok(ClientRequest::from_bytes(ctx, bytes)?.to_bytes())
    } else if name.starts_with("response") {
        Ok(CloudResponse::from_bytes(ctx, bytes)?.to_bytes())
    } else {
        Err(Error::Protocol(format!("no sample kind for {name:?}")))
    }
}
