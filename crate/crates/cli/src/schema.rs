//! The published configuration schema.

use serde_json::Value;

/// Schema every pipeline configuration must satisfy.
pub const PIPELINE_CONFIG_SCHEMA: &str = include_str!("../../../schema/pipeline-config.schema.json");

/// Violations of the schema by `config`, each prefixed with its JSON pointer.
pub fn violations(config: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(PIPELINE_CONFIG_SCHEMA).expect("shipped schema is valid JSON");
    let validator = jsonschema::draft202012::new(&schema).expect("shipped schema compiles");
    validator
        .iter_errors(config)
        .map(|e| {
            let at = e.instance_path().to_string();
            format!("{}: {e}", if at.is_empty() { "/" } else { at.as_str() })
        })
        .collect()
}
