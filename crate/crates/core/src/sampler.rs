//! Decoding methods compared in the experiments, each reduced to a single
//! per-step transformation of the model's raw distribution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{invalid, Error, Result};
use crate::filters::{joint_filter, top_k_set};
use crate::iqr_ip::{iqr_ip_trace, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "iqr-ip")]
    IqrIp,
    #[serde(rename = "nucleus")]
    Nucleus,
    #[serde(rename = "top-k")]
    TopK,
    #[serde(rename = "pure")]
    Pure,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::IqrIp, Method::Nucleus, Method::TopK, Method::Pure];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IqrIp => "iqr-ip",
            Method::Nucleus => "nucleus",
            Method::TopK => "top-k",
            Method::Pure => "pure",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid("method", format!("unknown method {s:?} (expected iqr-ip, nucleus, top-k or pure)")))
    }
}

/// Result of one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Truncated and renormalized, before any permutation.
    pub filtered: Distribution,
    /// What the token is actually drawn from.
    pub sampling: Distribution,
}

/// Applies `method` to the model's raw next-token distribution.
///
/// `nucleus` truncates with `top_k ∩ top_p`, so with the default `k` it only
/// differs from IQR-IP by the pruning and the permutation.
pub fn decode_step(raw: &Distribution, cfg: &SamplerConfig, method: Method) -> Result<StepOutput> {
    let filtered = match method {
        Method::Pure => raw.clone(),
        Method::TopK => raw.restrict(&top_k_set(raw, cfg.k)?)?,
        Method::Nucleus => raw.restrict(&joint_filter(raw, cfg.k, cfg.p)?)?,
        Method::IqrIp => {
            let trace = iqr_ip_trace(raw, cfg)?;
            return Ok(StepOutput { filtered: trace.filtered, sampling: trace.output });
        }
    };
    Ok(StepOutput { sampling: filtered.clone(), filtered })
}
