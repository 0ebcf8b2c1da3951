//! The prover backend interface: given a statement, produce N whole-proof
//! samples. Real runs point at an inference server over HTTP; tests and
//! desk-scale runs use deterministic mocks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;

/// Wire request: the statement to prove and how many samples to draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProveRequest {
    pub statement_id: String,
    pub header: String,
    pub body: String,
    pub num_samples: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProveResponse {
    pub proofs: Vec<String>,
}

pub trait ProverBackend: Send + Sync {
    fn prove(&self, request: &ProveRequest) -> Result<ProveResponse, BackendError>;
}

/// Mock prover that answers every sample with `by eval`: in the toy world it
/// solves exactly the statements whose equation is true.
#[derive(Debug, Default, Clone)]
pub struct EvalProver;

impl ProverBackend for EvalProver {
    fn prove(&self, request: &ProveRequest) -> Result<ProveResponse, BackendError> {
        Ok(ProveResponse {
            proofs: vec!["by eval".to_string(); request.num_samples as usize],
        })
    }
}

/// Scripted prover: a fixed map from statement id to the proof list it
/// returns, with a default for unscripted ids.
pub struct ScriptedProver {
    proofs_by_id: HashMap<String, Vec<String>>,
    default: Vec<String>,
}

impl ScriptedProver {
    pub fn new(proofs_by_id: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        ScriptedProver {
            proofs_by_id: proofs_by_id.into_iter().collect(),
            default: Vec::new(),
        }
    }

    pub fn with_default(mut self, proofs: Vec<String>) -> Self {
        self.default = proofs;
        self
    }
}

impl ProverBackend for ScriptedProver {
    fn prove(&self, request: &ProveRequest) -> Result<ProveResponse, BackendError> {
        let script = self
            .proofs_by_id
            .get(&request.statement_id)
            .unwrap_or(&self.default);
        let proofs = if script.is_empty() {
            // unscripted statements get proofs that verify as failures
            vec!["-- no proof".to_string(); request.num_samples as usize]
        } else {
            script
                .iter()
                .cloned()
                .cycle()
                .take(request.num_samples as usize)
                .collect()
        };
        Ok(ProveResponse { proofs })
    }
}

/// Prover backed by a closure, for scripting behaviors in tests.
pub struct FnProver<F>(pub F);

impl<F> ProverBackend for FnProver<F>
where
    F: Fn(&ProveRequest) -> Result<ProveResponse, BackendError> + Send + Sync,
{
    fn prove(&self, request: &ProveRequest) -> Result<ProveResponse, BackendError> {
        (self.0)(request)
    }
}

/// HTTP adapter targeting a real inference server.
pub struct HttpProver {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpProver {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpProver {
            endpoint: endpoint.into(),
            agent: crate::http::agent(),
        }
    }
}

impl ProverBackend for HttpProver {
    fn prove(&self, request: &ProveRequest) -> Result<ProveResponse, BackendError> {
        crate::http::post_json(&self.agent, &self.endpoint, request)
    }
}
