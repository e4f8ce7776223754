use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use transprop_core::simulator::{simulate, SimConfig};

use crate::manifest::Settings;
use crate::output::{Artifacts, Failure};

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct SimulateArgs {
    /// Number of random templates K.
    #[arg(long, short = 'k')]
    pub templates: usize,
    /// Word length L in bits.
    #[arg(long, short = 'l', default_value_t = 30)]
    pub length: usize,
    /// Number of reads N.
    #[arg(long, short = 'n')]
    pub reads: usize,
    /// Per-bit error rate in [0, 0.5).
    #[arg(long)]
    pub error_rate: f64,
    /// Output directory.
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn run(settings: &Settings, args: &SimulateArgs, art: &mut Artifacts) -> Result<(), Failure> {
    let cfg = SimConfig {
        templates: args.templates,
        word_length: args.length,
        reads: args.reads,
        error_rate: args.error_rate,
        seed: settings.seed()?,
    };
    let ds = simulate(&cfg).map_err(|e| Failure::Input(e.into()))?;

    let mut buf = Vec::new();
    ds.reads.write_to(&mut buf).map_err(anyhow::Error::from)?;
    art.write("reads.txt", &buf)?;
    buf.clear();
    ds.write_truth(&mut buf).map_err(anyhow::Error::from)?;
    art.write("truth.tsv", &buf)?;
    buf.clear();
    ds.write_templates(&mut buf).map_err(anyhow::Error::from)?;
    art.write("templates.txt", &buf)?;

    println!(
        "{} reads of length {} from {} templates ({} distinct words sampled), p_e = {}, seed {}",
        cfg.reads,
        cfg.word_length,
        cfg.templates,
        ds.sampled_templates(),
        cfg.error_rate,
        cfg.seed
    );
    Ok(())
}
