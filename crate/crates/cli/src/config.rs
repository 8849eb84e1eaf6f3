use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Flags that take no value; `key=true` turns them on.
const SWITCHES: [&str; 1] = ["blind-arms"];

/// Turns a `key=value` file into `--key value` arguments. Blank lines and
/// lines starting with `#` are skipped.
pub fn file_args(path: &Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), n + 1);
        };
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key == "config" {
            bail!("{}:{}: config files cannot nest", path.display(), n + 1);
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => args.push(format!("--{key}").into()),
                "false" => {}
                _ => bail!("{}:{}: {key} must be true or false", path.display(), n + 1),
            }
        } else {
            args.push(format!("--{key}").into());
            args.push(value.into());
        }
    }
    Ok(args)
}

/// Splices the arguments of `--config FILE` in front of everything else on
/// the command line, so explicit flags win.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut iter = argv.into_iter();
    let program = iter.next().unwrap_or_else(|| "rabi-texp".into());
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            config = Some(iter.next().context("--config needs a file")?);
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let mut out = vec![program];
    if let Some(path) = config {
        out.extend(file_args(Path::new(&path))?);
    }
    out.extend(rest);
    Ok(out)
}
