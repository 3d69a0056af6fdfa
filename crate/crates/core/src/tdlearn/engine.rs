//! Where the shadow table's updates are computed.

use std::fmt;

use crate::ckks::CkksParams;
use crate::hebackend::Backend;
use crate::protocol::{
    td_circuit, z_circuit, Client, Cloud, Decrypted, InProcess, Rule, Successor, TdInputs, Transport,
    ZInputs,
};
use crate::Result;

/// Decrypted result of one update and a bound on its distance from the
/// exact circuit output on the same inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineOutput {
    pub value: f64,
    pub epsilon: f64,
}

pub trait UpdateEngine {
    fn name(&self) -> &'static str;

    /// TD(0) or SARSA update.
    fn td(&mut self, rule: Rule, x: &TdInputs) -> Result<EngineOutput>;

    /// Z-learning update with a degree-`degree` expansion of `exp(-l)`.
    fn z(&mut self, x: &ZInputs, degree: usize) -> Result<EngineOutput>;
}

/// Runs the circuits locally over any backend.
impl UpdateEngine for Backend {
    fn name(&self) -> &'static str {
        Backend::name(self)
    }

    fn td(&mut self, _rule: Rule, x: &TdInputs) -> Result<EngineOutput> {
        let v = self.encrypt(x.value)?;
        let vn = self.encrypt(x.next_value)?;
        let a = self.encrypt(x.alpha)?;
        let g = self.encrypt(x.gamma)?;
        let r = self.encrypt(x.reward)?;
        let out = td_circuit(self, &v, &vn, &a, &g, &r)?;
        Ok(EngineOutput {
            value: self.decrypt(&out)?,
            epsilon: out.error_bound(),
        })
    }

    fn z(&mut self, x: &ZInputs, degree: usize) -> Result<EngineOutput> {
        let z = self.encrypt(x.value)?;
        let zn = self.encrypt(x.next_value)?;
        let a = self.encrypt(x.alpha)?;
        let l = self.encrypt(x.cost)?;
        let out = z_circuit(self, &z, &zn, &a, &l, degree)?;
        Ok(EngineOutput {
            value: self.decrypt(&out)?,
            epsilon: out.error_bound(),
        })
    }
}

/// Sends every update through the client/cloud protocol.
pub struct ProtocolEngine {
    client: Client,
    transport: Box<dyn Transport + Send>,
}

impl fmt::Debug for ProtocolEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolEngine")
            .field("client", &self.client)
            .finish_non_exhaustive()
    }
}

impl ProtocolEngine {
    pub fn new(client: Client, transport: Box<dyn Transport + Send>) -> Self {
        Self { client, transport }
    }

    /// Client and cloud in one process; `wire` round-trips every message
    /// through its byte encoding.
    pub fn in_process(
        params: CkksParams,
        seed: u64,
        circuit_privacy: bool,
        wire: bool,
    ) -> Result<Self> {
        let client = Client::new(params, seed)?;
        let setup = client.setup(circuit_privacy);
        let cloud = Cloud::new(client.context().clone(), setup.evaluation, circuit_privacy)?;
        Ok(Self::new(client, Box::new(InProcess::new(cloud, wire))))
    }

    pub fn client(&self) -> &Client {
        &self.client
    }

    /// One encrypted row `Q(s, .)` of a value-iteration backup.
    pub fn backup(&mut self, gamma: f64, successors: &[Successor]) -> Result<Decrypted> {
        let req = self.client.prepare_backup(gamma, successors)?;
        let resp = self.transport.call(&req)?;
        self.client.finalize(&resp)
    }
}

impl UpdateEngine for ProtocolEngine {
    fn name(&self) -> &'static str {
        "encrypted"
    }

    fn td(&mut self, rule: Rule, x: &TdInputs) -> Result<EngineOutput> {
        let req = self.client.prepare_td(rule, x)?;
        let resp = self.transport.call(&req)?;
        let d = self.client.finalize(&resp)?;
        Ok(EngineOutput {
            value: d.value(),
            epsilon: d.epsilon,
        })
    }

    fn z(&mut self, x: &ZInputs, degree: usize) -> Result<EngineOutput> {
        let req = self.client.prepare_z(x, degree as u32)?;
        let resp = self.transport.call(&req)?;
        let d = self.client.finalize(&resp)?;
        Ok(EngineOutput {
            value: d.value(),
            epsilon: d.epsilon,
        })
    }
}
