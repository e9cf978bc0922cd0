//! Browser bindings: hierarchical ranking, explanations and table-driven
//! pipeline runs over JSON strings.

pub mod api;

use wasm_bindgen::prelude::*;

pub use api::{explain, rank, run, ApiError};

fn to_js(error: ApiError) -> JsValue {
    JsValue::from_str(&error.to_string())
}

/// Ranks a score table; see [`api::RankRequest`].
#[wasm_bindgen]
pub fn rank_json(request: &str) -> Result<String, JsValue> {
    api::json_call(request, api::rank).map_err(to_js)
}

/// Explains one document's membership in the top-k set; see [`api::ExplainRequest`].
#[wasm_bindgen]
pub fn explain_json(request: &str) -> Result<String, JsValue> {
    api::json_call(request, api::explain).map_err(to_js)
}

/// Runs a pipeline configuration; see [`api::RunRequest`].
#[wasm_bindgen]
pub fn run_json(request: &str) -> Result<String, JsValue> {
    api::json_call(request, api::run).map_err(to_js)
}
