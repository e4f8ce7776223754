//! Run manifests: everything needed to repeat a run bit for bit.
//!
//! ```toml
//! tool = "transprop"
//! version = "0.1.0"
//! manifest_schema = 1
//!
//! [settings]            # global solver flags and seed
//! [command]             # name = subcommand, then its resolved flags
//! [[inputs]]            # path + sha256 of every file read
//! [[outputs]]           # name + sha256 of every file written
//! ```

use std::path::Path;

use anyhow::{anyhow, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use transprop_core::SolverConfig;

use crate::output::{sha256_hex, Artifacts, Failure, FileDigest};
use crate::Command;

pub const MANIFEST_FILE: &str = "manifest.toml";
const MANIFEST_SCHEMA: u32 = 1;

/// Global flags shared by every subcommand.
#[derive(Args, Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Settings {
    /// Damping λ in (0, 1).
    #[arg(long, global = true, default_value_t = 0.5)]
    pub lambda: f64,
    /// Stop once no belief is projected to change sign within this many sweeps.
    #[arg(long, global = true, default_value_t = 1000.0)]
    pub convergence_goal: f64,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Store messages as 32-bit floats.
    #[arg(long = "f32", global = true)]
    pub f32: bool,
    /// Seed; required by stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Settings {
    pub fn solver(&self) -> Result<SolverConfig, Failure> {
        let cfg = SolverConfig {
            lambda: self.lambda,
            convergence_goal: self.convergence_goal,
            max_iterations: self.max_iters,
            threads: self.threads,
            ..SolverConfig::default()
        };
        cfg.validate().map_err(|e| anyhow!(e))?;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::Input(anyhow!("--seed is required for this command")))
    }

    /// A pool with `--threads` workers (or the default size).
    pub fn pool(&self) -> Result<rayon::ThreadPool, Failure> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(Failure::Input(anyhow!("--threads must be positive")));
            }
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| Failure::Invariant(format!("thread pool: {e}")))
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub manifest_schema: u32,
    pub settings: Settings,
    pub command: Command,
    #[serde(default)]
    pub inputs: Vec<FileDigest>,
    #[serde(default)]
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(settings: Settings, command: Command, art: &Artifacts) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            manifest_schema: MANIFEST_SCHEMA,
            settings,
            command,
            inputs: art.inputs.clone(),
            outputs: art.outputs.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        let m: Manifest = toml::from_str(&text).with_context(|| format!("{}", path.display()))?;
        if m.manifest_schema != MANIFEST_SCHEMA {
            return Err(Failure::Input(anyhow!(
                "{}: unsupported manifest schema {}",
                path.display(),
                m.manifest_schema
            )));
        }
        Ok(m)
    }

    /// Checks every recorded input still has the recorded contents.
    pub fn verify_inputs(&self) -> Result<(), Failure> {
        for input in &self.inputs {
            let bytes = std::fs::read(&input.path).with_context(|| input.path.clone())?;
            if sha256_hex(&bytes) != input.sha256 {
                return Err(Failure::Input(anyhow!(
                    "{}: contents changed since the recorded run",
                    input.path
                )));
            }
        }
        Ok(())
    }
}
