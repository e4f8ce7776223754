use std::path::PathBuf;

use anyhow::anyhow;
use clap::{Args, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use transprop_core::prior::{
    blue_fraction_crossing, critical_x_estimate, partition_function_exact, prior_table,
};

use crate::manifest::Settings;
use crate::output::{num, Artifacts, Failure, Table};

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    /// `log Z(x, N)`, `Z`, and the exact value for integer `x`.
    Zfun,
    /// Expected blue-edge count and fraction.
    BlueFraction,
    /// Mean and standard deviation of the number of clusters.
    ClusterMoments,
    /// The `x` where the blue-edge fraction crosses 1/2, per `N`.
    CriticalX,
    /// `log Z`, blue fraction and cluster moments together.
    All,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct PriorArgs {
    #[arg(long, value_enum, default_value_t = PriorMode::All)]
    pub mode: PriorMode,
    /// Comma-separated x values.
    #[arg(long, value_delimiter = ',', conflicts_with = "x_range")]
    pub x: Option<Vec<f64>>,
    /// Geometric grid "lo:hi:count".
    #[arg(long)]
    pub x_range: Option<String>,
    /// Comma-separated numbers of points.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Output directory.
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Largest integer `x` for which the exact column is filled in.
const EXACT_X_MAX: f64 = 1e6;

pub fn run(settings: &Settings, args: &PriorArgs, art: &mut Artifacts) -> Result<(), Failure> {
    let ns = args.n.clone();
    if ns.contains(&0) {
        return Err(Failure::Input(anyhow!("--n values must be positive")));
    }
    let pool = settings.pool()?;
    let table = if args.mode == PriorMode::CriticalX {
        critical_table(&ns, &pool)?
    } else {
        grid_table(args.mode, &x_grid(args)?, &ns, &pool)?
    };
    art.write("prior.csv", &table.to_bytes())?;
    println!("prior ({:?}): {} rows", args.mode, table.len());
    Ok(())
}

fn x_grid(args: &PriorArgs) -> Result<Vec<f64>, Failure> {
    let xs = match (&args.x, &args.x_range) {
        (Some(xs), None) => xs.clone(),
        (None, Some(range)) => geometric(range)?,
        _ => return Err(Failure::Input(anyhow!("give --x or --x-range"))),
    };
    if xs.is_empty() || xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Failure::Input(anyhow!(
            "x values must be positive and finite"
        )));
    }
    Ok(xs)
}

fn geometric(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Input(anyhow!("--x-range expects lo:hi:count, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err(bad());
    };
    let (lo, hi): (f64, f64) = (
        lo.parse().map_err(|_| bad())?,
        hi.parse().map_err(|_| bad())?,
    );
    let count: usize = count.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| (lo.ln() + step * i as f64).exp())
        .collect())
}

fn exact_z(x: f64, n: usize) -> String {
    if x.fract() != 0.0 || x > EXACT_X_MAX {
        return String::new();
    }
    let x = BigRational::from_integer(BigInt::from(x as u64));
    match partition_function_exact(&x, n) {
        Ok(z) => z.to_integer().to_string(),
        Err(_) => String::new(),
    }
}

fn grid_table(
    mode: PriorMode,
    xs: &[f64],
    ns: &[usize],
    pool: &rayon::ThreadPool,
) -> Result<Table, Failure> {
    let header: &[&'static str] = match mode {
        PriorMode::Zfun => &["x", "N", "log_Z", "Z", "Z_exact"],
        PriorMode::BlueFraction => &["x", "N", "blue_mean", "blue_fraction"],
        PriorMode::ClusterMoments => &["x", "N", "mean_clusters", "sd_clusters"],
        PriorMode::All => &[
            "x",
            "N",
            "Z_log",
            "blue_fraction",
            "mean_clusters",
            "sd_clusters",
        ],
        PriorMode::CriticalX => unreachable!(),
    };
    let n_max = *ns.iter().max().expect("at least one N");
    let blocks: Vec<Result<Vec<Vec<String>>, Failure>> = pool.install(|| {
        xs.par_iter()
            .map(|&x| {
                let rows = prior_table(x, n_max).map_err(|e| Failure::Input(e.into()))?;
                Ok(ns
                    .iter()
                    .map(|&n| {
                        let s = &rows[n];
                        let mut row = vec![num(x), n.to_string()];
                        match mode {
                            PriorMode::Zfun => {
                                row.extend([num(s.log_z), num(s.log_z.exp()), exact_z(x, n)]);
                            }
                            PriorMode::BlueFraction => {
                                row.extend([num(s.blue_mean), num(s.blue_fraction())])
                            }
                            PriorMode::ClusterMoments => {
                                row.extend([num(s.cluster_mean), num(s.cluster_sd())])
                            }
                            PriorMode::All => row.extend([
                                num(s.log_z),
                                num(s.blue_fraction()),
                                num(s.cluster_mean),
                                num(s.cluster_sd()),
                            ]),
                            PriorMode::CriticalX => unreachable!(),
                        }
                        row
                    })
                    .collect())
            })
            .collect()
    });
    let mut table = Table::new(schema(mode), header);
    for block in blocks {
        for row in block? {
            table.push(row);
        }
    }
    Ok(table)
}

fn critical_table(ns: &[usize], pool: &rayon::ThreadPool) -> Result<Table, Failure> {
    let rows: Vec<Result<Vec<String>, Failure>> = pool.install(|| {
        ns.par_iter()
            .map(|&n| {
                let crossing = blue_fraction_crossing(n).map_err(|e| Failure::Input(e.into()))?;
                let estimate = critical_x_estimate(n).map_err(|e| Failure::Input(e.into()))?;
                Ok(vec![n.to_string(), num(crossing), num(estimate)])
            })
            .collect()
    });
    let mut table = Table::new(
        schema(PriorMode::CriticalX),
        &["N", "crossing_x", "estimate_x"],
    );
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

fn schema(mode: PriorMode) -> &'static str {
    match mode {
        PriorMode::Zfun => "transprop.prior.zfun.v1",
        PriorMode::BlueFraction => "transprop.prior.blue-fraction.v1",
        PriorMode::ClusterMoments => "transprop.prior.cluster-moments.v1",
        PriorMode::CriticalX => "transprop.prior.critical-x.v1",
        PriorMode::All => "transprop.prior.all.v1",
    }
}
