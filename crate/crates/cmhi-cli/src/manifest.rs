//! Flat `key=value` run manifests. Every output-producing run writes
//! `<out>.manifest`; `rerun` turns one back into an argv and replays it.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(subcommand: &str, threads: usize) -> Self {
        Self {
            entries: vec![
                ("subcommand".into(), subcommand.into()),
                ("threads".into(), threads.to_string()),
            ],
        }
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_opt(&mut self, key: &str, value: Option<impl Display>) -> &mut Self {
        if let Some(v) = value {
            self.push(key, v);
        }
        self
    }

    /// Write next to the run's primary output as `<out>.manifest`.
    pub fn write_for(&self, out: &Path) -> std::io::Result<()> {
        let mut path = out.as_os_str().to_owned();
        path.push(".manifest");
        let mut f = std::fs::File::create(Path::new(&path))?;
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Parse a manifest back into the argv of the original invocation.
pub fn manifest_to_argv(text: &str) -> Result<Vec<String>, String> {
    let mut subcommand = None;
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("manifest line {}: expected key=value", i + 1))?;
        if key == "subcommand" {
            subcommand = Some(value.to_string());
        } else {
            flags.push(format!("--{key}"));
            flags.push(value.to_string());
        }
    }
    let sub = subcommand.ok_or("manifest missing `subcommand`")?;
    let mut argv = vec!["cmhi".to_string(), sub];
    argv.extend(flags);
    Ok(argv)
}
