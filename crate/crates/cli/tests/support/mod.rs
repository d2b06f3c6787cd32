#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use coxcindex::simulation::{replication_rng, simulate};
use coxcindex::{Censoring, CovariateDesign, Dataset, SimConfig};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coxcindex"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write_csv(path: &Path, data: &Dataset) {
    let d = data.dim();
    let mut text = String::from("time,event,stratum");
    for j in 0..d {
        write!(text, ",x{}", j + 1).unwrap();
    }
    text.push('\n');
    for o in data.observations() {
        write!(text, "{},{},{}", o.time, u8::from(o.event), o.stratum).unwrap();
        for x in &o.covariates {
            write!(text, ",{x}").unwrap();
        }
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

/// Simulated data with `d` covariates over `strata` strata and light censoring.
pub fn simulated(n: usize, d: usize, strata: usize, seed: u64) -> Dataset {
    let cfg = SimConfig {
        n,
        d,
        beta_true: (0..d).map(|j| if j < 2 { 0.8 } else { 0.0 }).collect(),
        covariates: CovariateDesign::IidNormal,
        baseline_hazards: (0..strata).map(|k| 0.5 + k as f64).collect(),
        censoring: Censoring::Exponential { rate: 0.3 },
        interaction: None,
        seed,
    };
    simulate(&mut replication_rng(seed, 0), &cfg).unwrap().dataset
}
