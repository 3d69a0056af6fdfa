//! Request and response envelopes.
//!
//! ```text
//! "ERLM" | version u16 | kind u8 | rule tag u8 | request id u64 | param u32
//! | entry count u32 | { role u16 | index u32 | length u32 | ciphertext }...
//! | crc32 u32
//! ```
//! `param` is the polynomial degree in requests and the number of levels
//! consumed in responses. The checksum covers every preceding byte.

use std::sync::Arc;

use super::rules::Rule;
use crate::ckks::{Ciphertext, CkksContext, Reader};
use crate::{Error, Result};

pub const MESSAGE_MAGIC: &[u8; 4] = b"ERLM";
pub const MESSAGE_VERSION: u16 = 1;

const KIND_REQUEST: u8 = 1;
const KIND_RESPONSE: u8 = 2;

/// What a ciphertext stands for inside a request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoleKind {
    /// `V(s)`, `Q(s,a)` or `Z(s)`.
    Value,
    /// `V(s')`, `Q(s',a')` or `Z(s')`.
    NextValue,
    Alpha,
    Gamma,
    Reward,
    Cost,
    /// Transition probabilities into one successor, one slot per pair.
    Prob,
    /// Rewards for reaching one successor, one slot per pair.
    RewardRow,
    /// Output of the cloud.
    Result,
}

impl RoleKind {
    fn id(self) -> u16 {
        match self {
            RoleKind::Value => 1,
            RoleKind::NextValue => 2,
            RoleKind::Alpha => 3,
            RoleKind::Gamma => 4,
            RoleKind::Reward => 5,
            RoleKind::Cost => 6,
            RoleKind::Prob => 7,
            RoleKind::RewardRow => 8,
            RoleKind::Result => 9,
        }
    }

    fn from_id(id: u16) -> Result<Self> {
        Ok(match id {
            1 => RoleKind::Value,
            2 => RoleKind::NextValue,
            3 => RoleKind::Alpha,
            4 => RoleKind::Gamma,
            5 => RoleKind::Reward,
            6 => RoleKind::Cost,
            7 => RoleKind::Prob,
            8 => RoleKind::RewardRow,
            9 => RoleKind::Result,
            other => return Err(Error::Protocol(format!("unknown role id {other}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Role {
    pub kind: RoleKind,
    pub index: u32,
}

impl Role {
    pub fn new(kind: RoleKind) -> Self {
        Self { kind, index: 0 }
    }

    pub fn indexed(kind: RoleKind, index: u32) -> Self {
        Self { kind, index }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientRequest {
    pub id: u64,
    pub rule: Rule,
    pub degree: u32,
    pub roles: Vec<(Role, Ciphertext)>,
}

impl ClientRequest {
    pub fn get(&self, role: Role) -> Result<&Ciphertext> {
        self.roles
            .iter()
            .find(|(r, _)| *r == role)
            .map(|(_, c)| c)
            .ok_or_else(|| {
                Error::Protocol(format!("missing role {role:?} for {}", self.rule.name()))
            })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(KIND_REQUEST, self.rule, self.id, self.degree, &self.roles)
    }

    pub fn from_bytes(ctx: &Arc<CkksContext>, bytes: &[u8]) -> Result<Self> {
        let (kind, rule, id, degree, roles) = decode(ctx, bytes)?;
        if kind != KIND_REQUEST {
            return Err(Error::Protocol("expected a request".into()));
        }
        Ok(Self {
            id,
            rule,
            degree,
            roles,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CloudResponse {
    pub id: u64,
    pub rule: Rule,
    pub levels_consumed: u32,
    pub results: Vec<Ciphertext>,
}

impl CloudResponse {
    pub fn to_bytes(&self) -> Vec<u8> {
        let roles: Vec<(Role, Ciphertext)> = self
            .results
            .iter()
            .enumerate()
            .map(|(i, c)| (Role::indexed(RoleKind::Result, i as u32), c.clone()))
            .collect();
        encode(
            KIND_RESPONSE,
            self.rule,
            self.id,
            self.levels_consumed,
            &roles,
        )
    }

    pub fn from_bytes(ctx: &Arc<CkksContext>, bytes: &[u8]) -> Result<Self> {
        let (kind, rule, id, levels_consumed, roles) = decode(ctx, bytes)?;
        if kind != KIND_RESPONSE {
            return Err(Error::Protocol("expected a response".into()));
        }
        let mut results = Vec::with_capacity(roles.len());
        for (i, (role, ct)) in roles.into_iter().enumerate() {
            if role != Role::indexed(RoleKind::Result, i as u32) {
                return Err(Error::Protocol(format!(
                    "unexpected role {role:?} in response"
                )));
            }
            results.push(ct);
        }
        Ok(Self {
            id,
            rule,
            levels_consumed,
            results,
        })
    }
}

fn encode(kind: u8, rule: Rule, id: u64, param: u32, roles: &[(Role, Ciphertext)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MESSAGE_MAGIC);
    out.extend_from_slice(&MESSAGE_VERSION.to_le_bytes());
    out.push(kind);
    out.push(rule.tag());
    out.extend_from_slice(&id.to_le_bytes());
    out.extend_from_slice(&param.to_le_bytes());
    out.extend_from_slice(&(roles.len() as u32).to_le_bytes());
    for (role, ct) in roles {
        let blob = ct.to_bytes();
        out.extend_from_slice(&role.kind.id().to_le_bytes());
        out.extend_from_slice(&role.index.to_le_bytes());
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
        out.extend_from_slice(&blob);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

type Decoded = (u8, Rule, u64, u32, Vec<(Role, Ciphertext)>);

fn decode(ctx: &Arc<CkksContext>, bytes: &[u8]) -> Result<Decoded> {
    if bytes.len() < 28 {
        return Err(Error::Framing(format!(
            "message of {} bytes is shorter than its header",
            bytes.len()
        )));
    }
    let mut r = Reader::new(bytes);
    if r.take(4)? != MESSAGE_MAGIC {
        return Err(Error::Protocol("bad message magic".into()));
    }
    let version = r.u16()?;
    if version != MESSAGE_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("four bytes")) {
        return Err(Error::Checksum);
    }
    let mut r = Reader::new(&body[6..]);
    let kind = r.take(1)?[0];
    let rule = Rule::from_tag(r.take(1)?[0])?;
    let id = r.u64()?;
    let param = r.u32()?;
    let count = r.u32()? as usize;
    let mut roles = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let kind = RoleKind::from_id(r.u16()?)?;
        let index = r.u32()?;
        let len = r.u32()? as usize;
        let blob = r.take(len)?;
        roles.push((Role { kind, index }, Ciphertext::from_bytes(ctx, blob)?));
    }
    if r.remaining() != 0 {
        return Err(Error::Framing(format!(
            "{} trailing bytes in message",
            r.remaining()
        )));
    }
    Ok((kind, rule, id, param, roles))
}
