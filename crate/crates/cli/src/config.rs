//! Flat JSON configuration files, merged into the argument list before parsing.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// Path given to `--config`, if any.
fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn has_flag(argv: &[OsString], flag: &str) -> bool {
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.strip_prefix(flag).is_some_and(|rest| rest.starts_with('='))
    })
}

fn render(key: &str, value: &Value) -> Result<String, CliError> {
    match value {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Array(items) => items
            .iter()
            .map(|v| render(key, v))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        _ => Err(CliError::Argument(format!(
            "config key `{key}` must be a number, string or array"
        ))),
    }
}

/// Appends `--key=value` for each config entry whose flag is not already on
/// the command line. Keys may use `-` or `_`.
pub fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Argument(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let json: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Argument(format!("config is not valid JSON: {e}")))?;
    let Value::Object(map) = json else {
        return Err(CliError::Argument("config must be a flat JSON object".into()));
    };
    let mut extra = Vec::new();
    for (key, value) in &map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            return Err(CliError::Argument("config files cannot include other config files".into()));
        }
        if !has_flag(&argv, &flag) {
            extra.push(OsString::from(format!("{flag}={}", render(key, value)?)));
        }
    }
    argv.extend(extra);
    Ok(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"seed": 3, "paths": 10, "t": [0.25, 1], "model": "gbm"}"#).unwrap();
        let argv = args(&["slm", "simulate", "--seed", "9", "--config", path.to_str().unwrap()]);
        let merged = merge_config(argv).unwrap();
        let text: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert!(text.contains(&"--paths=10".to_string()));
        assert!(text.contains(&"--t=0.25,1".to_string()));
        assert!(text.contains(&"--model=gbm".to_string()));
        assert!(!text.iter().any(|a| a.starts_with("--seed=")));
    }

    #[test]
    fn nested_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"seed": {"a": 1}}"#).unwrap();
        let argv = args(&["slm", "simulate", "--config", path.to_str().unwrap()]);
        assert!(merge_config(argv).is_err());
    }
}
