//! JSON bodies of the mask-scoring HTTP protocol.
//!
//! `POST /v1/mask_probs` takes a [`MaskRequest`] and answers with a
//! [`MaskResponse`] whose results are aligned with the request texts.
//! `GET /v1/health` answers with a [`HealthResponse`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const MASK_PROBS_PATH: &str = "/v1/mask_probs";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRequest {
    pub texts: Vec<String>,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskResponse {
    pub model_id: String,
    pub results: Vec<MaskResult>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MaskResult {
    pub probabilities: BTreeMap<String, f64>,
    #[serde(default)]
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub model_id: String,
}
