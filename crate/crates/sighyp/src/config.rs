//! Loading run configurations from JSON. Errors name the offending field.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::stopped_bm::McConfig;
use crate::{Error, Result};

/// Deserialises `text`, reporting the JSON path of the first bad field.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            Error::Config(inner.to_string())
        } else {
            Error::Config(format!("{path}: {inner}"))
        }
    })
}

/// Tagged domain objects are buffered by serde, which hides the inner field
/// from the path; find it by walking the raw JSON instead.
fn domain_field_error(v: &Value, path: &str) -> Option<String> {
    let obj = v.as_object()?;
    let kind = obj.get("kind")?.as_str()?;
    let nums = |f: &str, depth: usize| -> Option<String> {
        let x = obj.get(f)?;
        let ok = match depth {
            0 => x.is_number(),
            1 => x.as_array().is_some_and(|a| a.iter().all(Value::is_number)),
            _ => x
                .as_array()
                .is_some_and(|a| a.iter().all(|r| r.as_array().is_some_and(|r| r.iter().all(Value::is_number)))),
        };
        let want = ["a number", "an array of numbers", "an array of number arrays"][depth.min(2)];
        (!ok).then(|| format!("{path}.{f}: expected {want}, got {x}"))
    };
    let base = || obj.get("base").and_then(|b| domain_field_error(b, &format!("{path}.base")));
    match kind {
        "ball" => nums("center", 1).or_else(|| nums("radius", 0)),
        "ellipsoid" | "ellipse" => nums("semi_axes", 1),
        "rotated" => base().or_else(|| nums("rotation", 2)),
        "reflected" => base(),
        "translated" => base().or_else(|| nums("shift", 1)),
        _ => None,
    }
}

/// Parses and validates a Monte-Carlo configuration.
pub fn parse_mc_config(text: &str) -> Result<McConfig> {
    let cfg: McConfig = parse_json(text).map_err(|e| {
        let dom = serde_json::from_str::<Value>(text).ok().and_then(|v| {
            let d = v.get("domain")?.clone();
            domain_field_error(&d, "domain")
        });
        match (e, dom) {
            (Error::Config(m), Some(f)) if m.starts_with("domain") => Error::Config(f),
            (e, _) => e,
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_mc_config(path: &Path) -> Result<McConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_mc_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OK: &str = r#"{"seed":1,"paths":100,"step":1e-3,"level":2,"lambda":0.5,
        "start":[0,0],"domain":{"kind":"ball","center":[0,0],"radius":1}}"#;

    fn msg(text: &str) -> String {
        match parse_mc_config(text) {
            Err(Error::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn valid_config_round_trips() {
        let c = parse_mc_config(OK).unwrap();
        assert_eq!(c.paths, 100);
        let back = parse_mc_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn errors_name_fields() {
        assert!(msg(&OK.replace("\"paths\":100", "\"paths\":\"x\"")).starts_with("paths"));
        assert!(msg(&OK.replace("\"radius\":1", "\"radius\":-1")).starts_with("domain.radius"));
        assert!(msg(&OK.replace("\"start\":[0,0]", "\"start\":[0,0,0]")).starts_with("start"));
        assert!(msg(&OK.replace("\"step\":1e-3", "\"step\":0")).starts_with("step"));
        assert!(msg(&OK.replace("\"seed\":1,", "\"seed\":1,\"bogus\":2,")).contains("bogus"));
        assert!(msg(&OK.replace("}}", "},\"pde\":{\"h\":2}}")).starts_with("pde.h"));
        assert!(msg(&OK.replace("\"seed\":1,", "")).contains("seed"));
        assert!(msg(&OK.replace("\"radius\":1", "\"radius\":\"x\"")).starts_with("domain.radius"));
        let nested = OK.replace(
            "{\"kind\":\"ball\"",
            "{\"kind\":\"translated\",\"shift\":[0,0],\"base\":{\"kind\":\"ball\"",
        )
        .replace("\"radius\":1}", "\"radius\":[1]}}");
        assert!(msg(&nested).starts_with("domain.base.radius"), "{}", msg(&nested));
    }
}
