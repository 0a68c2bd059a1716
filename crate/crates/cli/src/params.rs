//! Parameter schemas and validated parameter maps.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Integer,
    Number,
    Bool,
    String,
    IntegerList,
    NumberList,
    /// Free-form JSON deserialized into a library type.
    Object,
}

impl Kind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            Kind::Integer => v.as_u64().is_some(),
            Kind::Number => v.is_number(),
            Kind::Bool => v.is_boolean(),
            Kind::String => v.is_string(),
            Kind::IntegerList => v.as_array().is_some_and(|a| a.iter().all(|x| x.as_u64().is_some())),
            Kind::NumberList => v.as_array().is_some_and(|a| a.iter().all(Value::is_number)),
            Kind::Object => true,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: Kind,
    /// JSON literal; `None` makes the parameter required.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn param(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind,
        default: Some(default),
        help,
    }
}

pub const fn required(name: &'static str, kind: Kind, help: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind,
        default: None,
        help,
    }
}

/// Parameters checked against a schema, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Params(Map<String, Value>);

impl Params {
    pub fn validate(schema: &[ParamSpec], given: &Map<String, Value>) -> Result<Self, RunError> {
        if let Some(k) = given.keys().find(|k| !schema.iter().any(|s| s.name == k.as_str())) {
            return Err(RunError::Config(format!("unknown parameter `{k}`")));
        }
        let mut out = Map::new();
        for spec in schema {
            let v = match (given.get(spec.name), spec.default) {
                (Some(v), _) => v.clone(),
                (None, Some(d)) => serde_json::from_str(d).expect("schema defaults are valid JSON"),
                (None, None) => return Err(RunError::Config(format!("missing required parameter `{}`", spec.name))),
            };
            if !spec.kind.accepts(&v) {
                return Err(RunError::Config(format!(
                    "parameter `{}` must be {:?}, got {v}",
                    spec.name, spec.kind
                )));
            }
            out.insert(spec.name.to_string(), v);
        }
        Ok(Self(out))
    }

    pub fn as_map(&self) -> &Map<String, Value> {
        &self.0
    }

    pub fn get<T: DeserializeOwned>(&self, name: &str) -> Result<T, RunError> {
        let v = self.0.get(name).ok_or_else(|| RunError::Config(format!("no parameter `{name}`")))?;
        serde_json::from_value(v.clone()).map_err(|e| RunError::Config(format!("parameter `{name}`: {e}")))
    }

    pub fn u64(&self, name: &str) -> Result<u64, RunError> {
        self.get(name)
    }

    pub fn u32(&self, name: &str) -> Result<u32, RunError> {
        self.get(name)
    }

    pub fn usize(&self, name: &str) -> Result<usize, RunError> {
        self.get(name)
    }

    pub fn f64(&self, name: &str) -> Result<f64, RunError> {
        self.get(name)
    }
}
