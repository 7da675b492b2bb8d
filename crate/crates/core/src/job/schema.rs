//! JSON Schema documents for the weight file and the job file, printed by
//! `verify export-schema`.

use serde_json::{json, Value};

pub fn weight_file_schema() -> Value {
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "Dense/ReLU network weights",
        "type": "object",
        "additionalProperties": false,
        "required": ["format_version", "input_dim", "layers"],
        "properties": {
            "format_version": { "const": 1 },
            "input_dim": { "type": "integer", "minimum": 1 },
            "layers": {
                "type": "array",
                "items": {
                    "oneOf": [
                        {
                            "type": "object",
                            "additionalProperties": false,
                            "required": ["kind", "out", "in", "weights", "bias"],
                            "properties": {
                                "kind": { "const": "dense" },
                                "out": { "type": "integer", "minimum": 1 },
                                "in": { "type": "integer", "minimum": 1 },
                                "weights": {
                                    "description": "row-major, length out*in",
                                    "type": "array",
                                    "items": { "type": "number" }
                                },
                                "bias": { "type": "array", "items": { "type": "number" } }
                            }
                        },
                        {
                            "type": "object",
                            "additionalProperties": false,
                            "required": ["kind"],
                            "properties": { "kind": { "const": "relu" } }
                        }
                    ]
                }
            }
        }
    })
}

fn number_list() -> Value {
    json!({ "type": "array", "items": { "type": "number" } })
}

pub fn job_file_schema() -> Value {
    let oracle = json!({
        "oneOf": [
            {
                "type": "object",
                "required": ["name", "dim", "threshold"],
                "properties": {
                    "name": { "const": "irwin-hall" },
                    "dim": { "type": "integer", "minimum": 1 },
                    "threshold": { "type": "number" }
                }
            },
            {
                "type": "object",
                "required": ["name", "a", "b"],
                "properties": {
                    "name": { "const": "gaussian-halfspace" },
                    "a": number_list(),
                    "b": { "type": "number" }
                }
            },
            {
                "type": "object",
                "required": ["name"],
                "properties": {
                    "name": { "const": "impossible-event" },
                    "dim": { "type": "integer", "minimum": 1, "default": 10 }
                }
            }
        ]
    });
    let input_model = json!({
        "oneOf": [
            {
                "type": "object",
                "required": ["kind", "lower", "upper"],
                "properties": {
                    "kind": { "const": "uniform-box" },
                    "lower": number_list(),
                    "upper": number_list()
                }
            },
            {
                "type": "object",
                "required": ["kind", "radius"],
                "properties": {
                    "kind": { "const": "uniform-linf-ball" },
                    "center": number_list(),
                    "radius": { "type": "number", "exclusiveMinimum": 0 },
                    "clip": {
                        "type": "object",
                        "required": ["lower", "upper"],
                        "properties": { "lower": number_list(), "upper": number_list() }
                    }
                }
            },
            {
                "type": "object",
                "required": ["kind", "dim"],
                "properties": {
                    "kind": { "const": "standard-normal" },
                    "dim": { "type": "integer", "minimum": 1 }
                }
            }
        ]
    });
    let property = json!({
        "oneOf": [
            {
                "type": "object",
                "required": ["kind", "network", "reference_input"],
                "properties": {
                    "kind": { "const": "adversarial-margin" },
                    "network": { "type": "string", "description": "weight file, relative to the job file" },
                    "reference_input": number_list(),
                    "true_class": { "type": "integer", "minimum": 0 }
                }
            },
            {
                "type": "object",
                "required": ["kind", "a", "b"],
                "properties": {
                    "kind": { "const": "linear-threshold" },
                    "a": number_list(),
                    "b": { "type": "number" }
                }
            },
            {
                "type": "object",
                "required": ["kind", "terms"],
                "properties": {
                    "kind": { "const": "max-of-linear" },
                    "terms": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["a", "b"],
                            "properties": { "a": number_list(), "b": { "type": "number" } }
                        }
                    }
                }
            }
        ]
    });
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "Verification job",
        "type": "object",
        "additionalProperties": false,
        "required": ["format_version", "job"],
        "properties": {
            "format_version": { "const": 1 },
            "job": { "enum": ["amls", "naive-mc", "sweep", "oracle-selftest"] },
            "seed": { "type": "integer", "minimum": 0, "default": 0 },
            "problem": {
                "oneOf": [
                    { "type": "object", "required": ["oracle"], "properties": { "oracle": oracle } },
                    {
                        "type": "object",
                        "required": ["custom"],
                        "properties": {
                            "custom": {
                                "type": "object",
                                "required": ["input_model", "property"],
                                "properties": { "input_model": input_model, "property": property }
                            }
                        }
                    }
                ]
            },
            "amls": {
                "type": "object",
                "properties": {
                    "n_chains": { "type": "integer", "minimum": 1, "default": 10000 },
                    "mh_steps": { "type": "integer", "minimum": 1, "default": 1000 },
                    "quantile": { "type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1, "default": 0.1 },
                    "log_p_min": { "type": "number", "exclusiveMaximum": 0, "default": -250.0 },
                    "proposal_width_init": { "type": ["number", "null"], "exclusiveMinimum": 0 },
                    "accept_target": { "type": "number", "default": 0.234 },
                    "width_shrink": { "type": "number", "default": 0.5 },
                    "width_grow": { "type": "number", "default": 1.02 },
                    "max_levels": { "type": ["integer", "null"], "minimum": 1 },
                    "adapt": { "type": "boolean", "default": true }
                }
            },
            "naive_mc": {
                "type": "object",
                "properties": {
                    "samples": { "type": "integer", "minimum": 1, "default": 1000000 },
                    "batch_size": { "type": "integer", "minimum": 1, "default": 65536 }
                }
            },
            "sweep": {
                "type": "object",
                "required": ["repeats"],
                "properties": {
                    "quantile": { "type": "array", "minItems": 1, "items": { "type": "number" } },
                    "mh_steps": { "type": "array", "minItems": 1, "items": { "type": "integer" } },
                    "n_chains": { "type": "array", "minItems": 1, "items": { "type": "integer" } },
                    "radius": { "type": "array", "minItems": 1, "items": { "type": "number" } },
                    "repeats": { "type": "integer", "minimum": 1 }
                }
            },
            "selftest": {
                "type": "object",
                "properties": {
                    "oracles": { "type": "array", "items": oracle },
                    "log10_tolerance": { "type": "number", "default": 0.3 },
                    "naive_sigmas": { "type": "number", "default": 3.0 },
                    "naive_min_prob": { "type": "number", "default": 1e-4 }
                }
            },
            "output": {
                "type": "object",
                "properties": { "dir": { "type": "string", "default": "out" } }
            }
        }
    })
}

/// Both schemas in one document.
pub fn all_schemas() -> Value {
    json!({
        "weight_file": weight_file_schema(),
        "job_file": job_file_schema(),
    })
}
