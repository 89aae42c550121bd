//! Run manifests: the full parameter set of an invocation plus checksums,
//! enough to regenerate and verify every output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{Command, Output};

pub const TOOL: &str = "margin-vote";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory, or `-` for stdout.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            path: path.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &Command, inputs: Vec<FileDigest>, outputs: Vec<FileDigest>) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.clone(),
            seed: command.seed(),
            inputs,
            outputs,
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes).with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        if m.tool != TOOL {
            bail!("manifest was written by {:?}, not {TOOL}", m.tool);
        }
        Ok(m)
    }
}

/// Checksums of the files a command reads.
pub fn digest_inputs(command: &Command) -> anyhow::Result<Vec<FileDigest>> {
    command
        .inputs()
        .iter()
        .map(|p| {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(FileDigest::of(p.display().to_string(), &bytes))
        })
        .collect()
}

/// Where an output set lands and which manifest describes it.
pub struct Placement {
    pub files: Vec<(PathBuf, String)>,
    pub manifest: Option<PathBuf>,
}

/// Resolves output paths: a directory for multi-file output, the file itself
/// otherwise, or stdout when `out` is absent.
pub fn place(output: &Output, out: Option<&Path>, stdout_manifest: Option<&Path>) -> Placement {
    match out {
        Some(dir) if output.directory => Placement {
            files: output
                .artifacts
                .iter()
                .map(|a| (dir.join(&a.name), a.name.clone()))
                .collect(),
            manifest: Some(dir.join("manifest.json")),
        },
        Some(file) => {
            let name = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| output.artifacts[0].name.clone());
            let mut manifest = file.as_os_str().to_owned();
            manifest.push(".manifest.json");
            Placement {
                files: vec![(file.to_path_buf(), name)],
                manifest: Some(PathBuf::from(manifest)),
            }
        }
        None => Placement {
            files: Vec::new(),
            manifest: stdout_manifest.map(Path::to_path_buf),
        },
    }
}

/// Writes the outputs and their manifest; stdout output is printed.
pub fn emit(command: &Command, output: &Output, out: Option<&Path>, stdout_manifest: Option<&Path>) -> anyhow::Result<Manifest> {
    let placement = place(output, out, stdout_manifest);
    let digests = if placement.files.is_empty() {
        use std::io::Write;
        let mut stdout = std::io::stdout().lock();
        for a in &output.artifacts {
            stdout.write_all(&a.bytes)?;
        }
        stdout.flush()?;
        output.artifacts.iter().map(|a| FileDigest::of("-", &a.bytes)).collect()
    } else {
        if output.directory {
            if let Some(dir) = out {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
        }
        placement
            .files
            .iter()
            .zip(&output.artifacts)
            .map(|((path, name), a)| {
                fs::write(path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
                Ok(FileDigest::of(name.clone(), &a.bytes))
            })
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    let manifest = Manifest::new(command, digest_inputs(command)?, digests);
    if let Some(path) = &placement.manifest {
        manifest.write(path)?;
    }
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputCheck {
    pub path: String,
    pub expected: String,
    pub actual: String,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub subcommand: String,
    pub inputs_unchanged: bool,
    pub verified: bool,
    pub outputs: Vec<OutputCheck>,
}

/// Compares regenerated outputs (and current inputs) with a manifest.
pub fn verify(manifest: &Manifest, output: &Output) -> anyhow::Result<Verification> {
    let inputs_now = digest_inputs(&manifest.command)?;
    let inputs_unchanged = inputs_now.iter().map(|d| &d.sha256).eq(manifest.inputs.iter().map(|d| &d.sha256));
    let mut outputs: Vec<OutputCheck> = manifest
        .outputs
        .iter()
        .zip(&output.artifacts)
        .map(|(d, a)| {
            let actual = sha256_hex(&a.bytes);
            OutputCheck {
                path: d.path.clone(),
                matches: actual == d.sha256,
                expected: d.sha256.clone(),
                actual,
            }
        })
        .collect();
    for a in output.artifacts.iter().skip(manifest.outputs.len()) {
        outputs.push(OutputCheck {
            path: a.name.clone(),
            expected: String::new(),
            actual: sha256_hex(&a.bytes),
            matches: false,
        });
    }
    let complete = manifest.outputs.len() == output.artifacts.len();
    Ok(Verification {
        subcommand: manifest.command.name().into(),
        inputs_unchanged,
        verified: complete && inputs_unchanged && outputs.iter().all(|c| c.matches),
        outputs,
    })
}
