use std::collections::HashMap;
use std::sync::Arc;

use super::message::{ClientRequest, CloudResponse, Role, RoleKind};
use super::rules::Rule;
use super::setup::SetupMessage;
use crate::ckks::{Ciphertext, CkksContext, CkksParams};
use crate::hebackend::EncryptedBackend;
use crate::mdp::argmax;
use crate::{Error, Result};

/// Plaintext operands of a TD(0) or SARSA update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdInputs {
    pub value: f64,
    pub next_value: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub reward: f64,
}

/// Plaintext operands of a Z-learning update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZInputs {
    pub value: f64,
    pub next_value: f64,
    pub alpha: f64,
    pub cost: f64,
}

/// One successor of a backup, with one entry per action.
#[derive(Clone, Debug, PartialEq)]
pub struct Successor {
    pub probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub value: f64,
}

/// What the client learns from a response.
#[derive(Clone, Debug, PartialEq)]
pub struct Decrypted {
    pub rule: Rule,
    /// One value for scalar rules, one per action for a backup.
    pub values: Vec<f64>,
    /// Bound on the distance from the exact circuit output.
    pub epsilon: f64,
    pub levels_consumed: u32,
}

impl Decrypted {
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    /// Greedy action of a backup row, lowest index on ties.
    pub fn greedy_action(&self) -> usize {
        argmax(&self.values)
    }
}

/// The key-holding party: encrypts requests and decrypts responses.
#[derive(Debug)]
pub struct Client {
    backend: EncryptedBackend,
    next_id: u64,
    outstanding: HashMap<u64, (Rule, usize)>,
}

impl Client {
    pub fn new(params: CkksParams, seed: u64) -> Result<Self> {
        Ok(Self {
            backend: EncryptedBackend::new(params, seed)?,
            next_id: 1,
            outstanding: HashMap::new(),
        })
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.backend.ctx
    }

    /// Public material for the cloud. Never includes the secret key.
    pub fn setup(&self, circuit_privacy: bool) -> SetupMessage {
        SetupMessage {
            params: self.backend.ctx.params().clone(),
            evaluation: self.backend.keys.evaluation.clone(),
            circuit_privacy,
        }
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }

    fn request(
        &mut self,
        rule: Rule,
        degree: u32,
        width: usize,
        roles: Vec<(Role, Ciphertext)>,
    ) -> ClientRequest {
        let id = self.next_id;
        self.next_id += 1;
        self.outstanding.insert(id, (rule, width));
        ClientRequest {
            id,
            rule,
            degree,
            roles,
        }
    }

    fn scalar(&mut self, kind: RoleKind, x: f64) -> Result<(Role, Ciphertext)> {
        Ok((Role::new(kind), self.backend.encrypt(x)?))
    }

    /// `rule` is [`Rule::Td0`] or [`Rule::Sarsa`]; SARSA passes `Q(s,a)` and
    /// `Q(s',a')` as the two values.
    pub fn prepare_td(&mut self, rule: Rule, x: &TdInputs) -> Result<ClientRequest> {
        if !matches!(rule, Rule::Td0 | Rule::Sarsa) {
            return Err(Error::Protocol(format!(
                "{} is not a temporal-difference rule",
                rule.name()
            )));
        }
        let roles = vec![
            self.scalar(RoleKind::Value, x.value)?,
            self.scalar(RoleKind::NextValue, x.next_value)?,
            self.scalar(RoleKind::Alpha, x.alpha)?,
            self.scalar(RoleKind::Gamma, x.gamma)?,
            self.scalar(RoleKind::Reward, x.reward)?,
        ];
        Ok(self.request(rule, 0, 1, roles))
    }

    pub fn prepare_z(&mut self, x: &ZInputs, degree: u32) -> Result<ClientRequest> {
        let roles = vec![
            self.scalar(RoleKind::Value, x.value)?,
            self.scalar(RoleKind::NextValue, x.next_value)?,
            self.scalar(RoleKind::Alpha, x.alpha)?,
            self.scalar(RoleKind::Cost, x.cost)?,
        ];
        Ok(self.request(Rule::Z, degree, 1, roles))
    }

    /// Packs one action per slot so a single response carries a whole
    /// row `Q(s, .)`.
    pub fn prepare_backup(
        &mut self,
        gamma: f64,
        successors: &[Successor],
    ) -> Result<ClientRequest> {
        let width = successors.first().map_or(0, |s| s.probs.len());
        if width == 0 {
            return Err(Error::Protocol(
                "backup needs at least one successor and one action".into(),
            ));
        }
        let mut roles = vec![(
            Role::new(RoleKind::Gamma),
            self.backend.encrypt_values(&vec![gamma; width])?,
        )];
        for (i, s) in successors.iter().enumerate() {
            if s.probs.len() != width || s.rewards.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: s.probs.len().max(s.rewards.len()),
                });
            }
            let i = i as u32;
            roles.push((
                Role::indexed(RoleKind::Prob, i),
                self.backend.encrypt_values(&s.probs)?,
            ));
            roles.push((
                Role::indexed(RoleKind::RewardRow, i),
                self.backend.encrypt_values(&s.rewards)?,
            ));
            roles.push((
                Role::indexed(RoleKind::NextValue, i),
                self.backend.encrypt_values(&vec![s.value; width])?,
            ));
        }
        Ok(self.request(Rule::QBackup, 0, width, roles))
    }

    pub fn finalize(&mut self, resp: &CloudResponse) -> Result<Decrypted> {
        let (rule, width) = self
            .outstanding
            .remove(&resp.id)
            .ok_or_else(|| Error::Protocol(format!("no outstanding request {}", resp.id)))?;
        if resp.rule != rule || resp.results.len() != 1 {
            return Err(Error::Protocol(format!(
                "response {} does not answer its request",
                resp.id
            )));
        }
        let ct = &resp.results[0];
        let mut values = self.backend.decrypt_values(ct).map_err(|e| {
            Error::Protocol(format!(
                "result of request {} could not be decrypted: {e}",
                resp.id
            ))
        })?;
        values.truncate(width);
        Ok(Decrypted {
            rule,
            values,
            epsilon: ct.noise_epsilon(),
            levels_consumed: resp.levels_consumed,
        })
    }

    /// Decrypts any ciphertext under this client's key.
    pub fn decrypt_values(&self, ct: &Ciphertext) -> Result<Vec<f64>> {
        self.backend.decrypt_values(ct)
    }
}
