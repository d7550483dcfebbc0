//! Run manifests: the effective config, seeds, an input fingerprint and the
//! artifacts written under one run directory.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.txt";
const HEADER: &str = "hilonet-run v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub algo: String,
    pub seeds: Vec<u64>,
    /// SHA-256 over the canonical config text and demonstration file.
    pub inputs_sha256: String,
    /// `(role, path relative to the run directory)`.
    pub artifacts: Vec<(String, String)>,
    /// Canonical `key = value` config text.
    pub config: String,
}

/// SHA-256 of the given byte slices, each length-prefixed so boundaries count.
pub fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl RunManifest {
    pub fn artifact(&self, role: &str) -> Option<&str> {
        self.artifacts
            .iter()
            .find(|(r, _)| r == role)
            .map(|(_, p)| p.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        let _ = writeln!(out, "command {}", self.command);
        let _ = writeln!(out, "algo {}", self.algo);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds {}", seeds.join(" "));
        let _ = writeln!(out, "inputs_sha256 {}", self.inputs_sha256);
        for (role, path) in &self.artifacts {
            let _ = writeln!(out, "artifact {role} {path}");
        }
        out.push_str("config\n");
        out.push_str(&self.config);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, HEADER)) => {}
            other => bail!("manifest line 1: expected `{HEADER}`, found {:?}", other.map(|o| o.1)),
        }
        let mut m = RunManifest {
            command: String::new(),
            algo: String::new(),
            seeds: Vec::new(),
            inputs_sha256: String::new(),
            artifacts: Vec::new(),
            config: String::new(),
        };
        for (i, line) in lines.by_ref() {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "command" => m.command = rest.to_string(),
                "algo" => m.algo = rest.to_string(),
                "seeds" => {
                    m.seeds = rest
                        .split_whitespace()
                        .map(|s| s.parse().with_context(|| format!("manifest line {}: bad seed `{s}`", i + 1)))
                        .collect::<Result<_>>()?
                }
                "inputs_sha256" => m.inputs_sha256 = rest.to_string(),
                "artifact" => {
                    let (role, path) = rest
                        .split_once(' ')
                        .ok_or_else(|| anyhow!("manifest line {}: artifact needs a role and a path", i + 1))?;
                    m.artifacts.push((role.to_string(), path.to_string()));
                }
                "config" => break,
                _ => bail!("manifest line {}: unknown record `{key}`", i + 1),
            }
        }
        for (_, line) in lines {
            m.config.push_str(line);
            m.config.push('\n');
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
