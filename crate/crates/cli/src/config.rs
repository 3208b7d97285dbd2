//! `key=value` config files. Each key names a long flag of the subcommand;
//! a key is injected only when the command line does not already set it.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub fn parse(text: &str, path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key=value, got '{line}'", path.display(), i + 1))
        })?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() || k == "config" {
            return Err(CliError::Usage(format!("{}:{}: invalid key '{k}'", path.display(), i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Result<Option<PathBuf>, CliError> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let p = it.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            return Ok(Some(PathBuf::from(p)));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

fn sets_flag(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.strip_prefix(flag.as_str()).is_some_and(|r| r.starts_with('='))
    })
}

/// Appends `--key=value` for every config entry the command line leaves unset.
pub fn merge(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let entries = parse(&text, &path)?;
    let mut out = args.clone();
    for (k, v) in entries {
        if !sets_flag(&args, &k) {
            out.push(format!("--{k}={v}").into());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_and_skips_comments() {
        let e = parse("# c\n\nn = 10\n--spec=double\n", Path::new("f")).unwrap();
        assert_eq!(e, vec![("n".into(), "10".into()), ("spec".into(), "double".into())]);
        assert!(parse("novalue\n", Path::new("f")).is_err());
        assert!(parse("config=x\n", Path::new("f")).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "n=10\nspec=double\nparam=lambda=0.5\n").unwrap();
        let args = os(&["revind", "orbit-error", "--config", p.to_str().unwrap(), "--n=99"]);
        let merged = merge(args).unwrap();
        let tail: Vec<String> = merged[5..].iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(tail, vec!["--spec=double", "--param=lambda=0.5"]);
    }
}
