//! `--config` files: `key=value` lines, one flag per line.
//!
//! Config entries are spliced into the argument list right after the
//! subcommand, ahead of the user's own flags. Every subcommand lets a later
//! occurrence of a flag override an earlier one, so flags on the command
//! line win over the file, and the file wins over built-in defaults.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context};

pub fn parse_config(text: &str, path: &Path) -> anyhow::Result<Vec<OsString>> {
    let mut args = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key=value`", path.display(), i + 1);
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            bail!("{}:{}: invalid key `{key}`", path.display(), i + 1);
        }
        args.push(format!("--{key}").into());
        args.push(value.trim().into());
    }
    Ok(args)
}

fn config_path(args: &[OsString]) -> Option<(usize, OsString)> {
    args.iter().enumerate().find_map(|(i, a)| {
        let s = a.to_str()?;
        if s == "--config" {
            Some((i, args.get(i + 1)?.clone()))
        } else {
            s.strip_prefix("--config=").map(|p| (i, p.into()))
        }
    })
}

/// Returns `args` with the config file's flags inserted after the subcommand.
/// The `--config` flag itself stays in place for clap to accept.
pub fn expand(args: Vec<OsString>, subcommands: &[&str]) -> anyhow::Result<Vec<OsString>> {
    let Some((_, path)) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let extra = parse_config(&text, path)?;
    let Some(at) = args
        .iter()
        .position(|a| a.to_str().is_some_and(|s| subcommands.contains(&s)))
    else {
        return Ok(args);
    };
    let mut out = args[..=at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_skips_comments() {
        let args = parse_config("# defaults\nk = 7\n\n--method=exact\n", Path::new("c")).unwrap();
        assert_eq!(args, os(&["--k", "7", "--method", "exact"]));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("k 7\n", Path::new("c")).is_err());
        assert!(parse_config("=7\n", Path::new("c")).is_err());
        assert!(parse_config("config=x\n", Path::new("c")).is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "k=3\n").unwrap();
        let conf = format!("--config={}", path.display());
        let args = os(&["labelprop", "propagate", "--k", "9", &conf]);
        let out = expand(args, &["propagate"]).unwrap();
        assert_eq!(out, os(&["labelprop", "propagate", "--k", "3", "--k", "9", &conf]));
    }

    #[test]
    fn without_config_args_are_untouched() {
        let args = os(&["labelprop", "propagate", "--k", "9"]);
        assert_eq!(expand(args.clone(), &["propagate"]).unwrap(), args);
    }
}
