//! `--config FILE` support: `key = value` lines become flags placed right
//! after the subcommand, so anything given on the command line overrides them.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::CliError;

const SUBCOMMANDS: [&str; 6] = ["inspect", "pie", "calibrate", "correct", "lil", "synth"];
const GLOBAL_VALUED: [&str; 2] = ["--workers", "--config"];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut found = None;
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let Some(s) = arg.to_str() else { continue };
        if s == "--" {
            break;
        }
        if s == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(v));
        }
    }
    found
}

fn subcommand_position(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_str()?;
        if SUBCOMMANDS.contains(&s) {
            return Some(i);
        }
        i += if GLOBAL_VALUED.contains(&s) { 2 } else { 1 };
    }
    None
}

/// Flags described by a config file, in file order.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<OsString>, CliError> {
    let mut args = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| CliError::Config {
            path: path.to_path_buf(),
            line: n + 1,
            message: message.to_string(),
        };
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(err("invalid key"));
        }
        if key == "config" {
            return Err(err("config files cannot include other config files"));
        }
        match value {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
    }
    Ok(args)
}

/// Removes config flags (and their values) that the command line sets itself,
/// so list-valued flags are replaced rather than extended.
fn drop_given(args: Vec<OsString>, given: &[String]) -> Vec<OsString> {
    let mut out = Vec::with_capacity(args.len());
    let mut skipping = false;
    for a in args {
        let s = a.to_string_lossy();
        if let Some(key) = s.strip_prefix("--") {
            skipping = given.iter().any(|g| g == key);
        }
        if !skipping {
            out.push(a);
        }
    }
    out
}

/// Returns `argv` with the flags of the `--config` file (if any) inserted.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let Some(pos) = subcommand_position(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let given: Vec<String> = argv[1..]
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let extra = drop_given(parse_config(&text, &path)?, &given);
    log::debug!("{} adds {} argument(s)", path.display(), extra.len());
    let mut out = Vec::with_capacity(argv.len() + extra.len());
    out.extend_from_slice(&argv[..=pos]);
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_lines() {
        let text = "# campaign\nmode = joint\nhalf_window = 2\n\nplanes = true\nverbose = false\n";
        let args = parse_config(text, Path::new("c")).unwrap();
        assert_eq!(args, os(&["--mode", "joint", "--half-window", "2", "--planes"]));
        assert!(parse_config("novalue\n", Path::new("c")).is_err());
        assert!(parse_config("a b = 1\n", Path::new("c")).is_err());
    }

    #[test]
    fn command_line_wins() {
        let args = os(&["--levels", "a,b", "--mode", "joint", "--planes"]);
        let kept = drop_given(args, &["levels".to_string()]);
        assert_eq!(kept, os(&["--mode", "joint", "--planes"]));
    }

    #[test]
    fn finds_subcommand_after_globals() {
        let argv = os(&["radiocal", "--workers", "lil", "--config", "x", "pie", "in"]);
        assert_eq!(subcommand_position(&argv), Some(5));
        assert_eq!(config_path(&argv), Some(PathBuf::from("x")));
        let argv = os(&["radiocal", "lil", "--config=y"]);
        assert_eq!(subcommand_position(&argv), Some(1));
        assert_eq!(config_path(&argv), Some(PathBuf::from("y")));
    }
}
