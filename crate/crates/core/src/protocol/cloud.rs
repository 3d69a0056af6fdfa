use std::collections::BTreeSet;
use std::sync::Arc;

use super::message::{ClientRequest, CloudResponse, Role, RoleKind};
use super::rules::{q_backup_circuit, td_circuit, z_circuit, BackupTerm, Rule};
use super::setup::SetupMessage;
use crate::ckks::{Ciphertext, CkksContext, EvaluationKey, Evaluator};
use crate::{Error, Result};

/// Largest Taylor degree a request may ask for.
pub const MAX_DEGREE: u32 = 16;

/// The evaluating party. Built from public material only.
#[derive(Clone, Debug)]
pub struct Cloud {
    evaluator: Evaluator,
    circuit_privacy: bool,
}

impl Cloud {
    pub fn new(
        ctx: Arc<CkksContext>,
        evaluation: Arc<EvaluationKey>,
        circuit_privacy: bool,
    ) -> Result<Self> {
        Ok(Self {
            evaluator: Evaluator::new(ctx, evaluation)?,
            circuit_privacy,
        })
    }

    pub fn from_setup(setup: &SetupMessage) -> Result<Self> {
        let ctx = CkksContext::new(setup.params.clone())?;
        Self::new(ctx, setup.evaluation.clone(), setup.circuit_privacy)
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        self.evaluator.context()
    }

    pub fn circuit_privacy(&self) -> bool {
        self.circuit_privacy
    }

    pub fn evaluate(&self, req: &ClientRequest) -> Result<CloudResponse> {
        let level = validate(req)?;
        let mut ev = self.evaluator.clone();
        let degree = req.degree as usize;
        let result = match req.rule {
            Rule::Td0 | Rule::Sarsa => td_circuit(
                &mut ev,
                req.get(Role::new(RoleKind::Value))?,
                req.get(Role::new(RoleKind::NextValue))?,
                req.get(Role::new(RoleKind::Alpha))?,
                req.get(Role::new(RoleKind::Gamma))?,
                req.get(Role::new(RoleKind::Reward))?,
            )?,
            Rule::Z => z_circuit(
                &mut ev,
                req.get(Role::new(RoleKind::Value))?,
                req.get(Role::new(RoleKind::NextValue))?,
                req.get(Role::new(RoleKind::Alpha))?,
                req.get(Role::new(RoleKind::Cost))?,
                degree,
            )?,
            Rule::QBackup => {
                let count = successor_count(req);
                let mut terms = Vec::with_capacity(count);
                for i in 0..count as u32 {
                    terms.push(BackupTerm {
                        prob: req.get(Role::indexed(RoleKind::Prob, i))?,
                        reward: req.get(Role::indexed(RoleKind::RewardRow, i))?,
                        value: req.get(Role::indexed(RoleKind::NextValue, i))?,
                    });
                }
                q_backup_circuit(&mut ev, req.get(Role::new(RoleKind::Gamma))?, &terms)?
            }
        };
        let result = if self.circuit_privacy {
            self.pad(&result)?
        } else {
            result
        };
        Ok(CloudResponse {
            id: req.id,
            rule: req.rule,
            levels_consumed: (level - result.level()) as u32,
            results: vec![result],
        })
    }

    // Adds an encryption of zero and multiplies by one.
    fn pad(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        let zero = self.evaluator.sub(ct, ct)?;
        let padded = self.evaluator.add(ct, &zero)?;
        Ok(self.evaluator.mul_int(&padded, 1))
    }
}

fn successor_count(req: &ClientRequest) -> usize {
    req.roles
        .iter()
        .filter(|(r, _)| r.kind == RoleKind::Prob)
        .count()
}

/// Checks the role set against the rule and returns the common level.
fn validate(req: &ClientRequest) -> Result<usize> {
    let expected: BTreeSet<Role> = match req.rule {
        Rule::Td0 | Rule::Sarsa => [
            RoleKind::Value,
            RoleKind::NextValue,
            RoleKind::Alpha,
            RoleKind::Gamma,
            RoleKind::Reward,
        ]
        .into_iter()
        .map(Role::new)
        .collect(),
        Rule::Z => {
            if req.degree > MAX_DEGREE {
                return Err(Error::Protocol(format!(
                    "taylor degree {} above {MAX_DEGREE}",
                    req.degree
                )));
            }
            [
                RoleKind::Value,
                RoleKind::NextValue,
                RoleKind::Alpha,
                RoleKind::Cost,
            ]
            .into_iter()
            .map(Role::new)
            .collect()
        }
        Rule::QBackup => {
            let count = successor_count(req) as u32;
            if count == 0 {
                return Err(Error::Protocol("backup request without successors".into()));
            }
            let mut set: BTreeSet<Role> = [Role::new(RoleKind::Gamma)].into();
            for i in 0..count {
                set.insert(Role::indexed(RoleKind::Prob, i));
                set.insert(Role::indexed(RoleKind::RewardRow, i));
                set.insert(Role::indexed(RoleKind::NextValue, i));
            }
            set
        }
    };
    let present: BTreeSet<Role> = req.roles.iter().map(|(r, _)| *r).collect();
    if present.len() != req.roles.len() {
        return Err(Error::Protocol("duplicate role in request".into()));
    }
    if present != expected {
        return Err(Error::Protocol(format!(
            "role set does not match the {} rule",
            req.rule.name()
        )));
    }
    let first = &req.roles[0].1;
    for (_, ct) in &req.roles[1..] {
        if ct.level() != first.level() {
            return Err(Error::LevelMismatch {
                left: first.level(),
                right: ct.level(),
            });
        }
        if ct.log2_scale() != first.log2_scale() {
            return Err(Error::ScaleMismatch {
                left: first.log2_scale(),
                right: ct.log2_scale(),
            });
        }
    }
    let depth = req.rule.depth(req.degree as usize);
    if first.level() < depth {
        return Err(Error::DepthExhausted {
            level: first.level(),
        });
    }
    Ok(first.level())
}
