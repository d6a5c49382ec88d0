//! JSON text formats for pmfs and conditional kernels.
//!
//! Pmf: `{"vars":[{"name":"X1","size":4},...], "probs":[...]}` with the
//! probabilities row-major in declaration order. Kernels carry `from`/`to`
//! declaration lists and one row per `from` configuration; an undefined row
//! is `null`. Readers reject tensors whose mass is outside 1 +/- 1e-9.

use serde::{Deserialize, Serialize};

use super::{ConditionalKernel, JointPmf, ProbError, VariableDecl};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VarDeclJson {
    name: String,
    size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PmfJson {
    vars: Vec<VarDeclJson>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelJson {
    from: Vec<VarDeclJson>,
    to: Vec<VarDeclJson>,
    rows: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

fn decls(vs: Vec<VarDeclJson>) -> Vec<VariableDecl> {
    vs.into_iter().map(|v| VariableDecl::new(v.name, v.size)).collect()
}

fn decls_json(vs: &[VariableDecl]) -> Vec<VarDeclJson> {
    vs.iter().map(|v| VarDeclJson { name: v.name.clone(), size: v.size }).collect()
}

pub fn pmf_from_json(text: &str) -> Result<JointPmf, IoError> {
    let raw: PmfJson = serde_json::from_str(text)?;
    Ok(JointPmf::new(decls(raw.vars), raw.probs)?)
}

pub fn pmf_to_json(p: &JointPmf) -> String {
    let raw = PmfJson { vars: decls_json(p.vars()), probs: p.probs().to_vec() };
    serde_json::to_string_pretty(&raw).expect("pmf serializes")
}

pub fn kernel_from_json(text: &str) -> Result<ConditionalKernel, IoError> {
    let raw: KernelJson = serde_json::from_str(text)?;
    let k = ConditionalKernel { from: decls(raw.from), to: decls(raw.to), rows: raw.rows };
    let want = k.from_len();
    if k.rows.len() != want {
        return Err(IoError::Prob(ProbError::LengthMismatch { got: k.rows.len(), want }));
    }
    k.validate()?;
    Ok(k)
}

pub fn kernel_to_json(k: &ConditionalKernel) -> String {
    let raw = KernelJson {
        from: decls_json(&k.from),
        to: decls_json(&k.to),
        rows: k.rows.clone(),
    };
    serde_json::to_string_pretty(&raw).expect("kernel serializes")
}
