//! CSV writers for experiment results.

use std::io::Write;

use crate::bound::BoundRecord;
use crate::error::Result;
use crate::sweep::{BaselineRecord, NoiseRecord, RefinementRecord, SweepRecord};

fn write_all<W: Write, T: serde::Serialize>(writer: W, header: &[&str], records: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 9] = [
    "dataset",
    "seed",
    "accuracy",
    "k",
    "mae_reg",
    "mae_post",
    "beta",
    "mean_rank_variance",
    "clamp_rate",
];

pub fn write_sweep_csv<W: Write>(writer: W, records: &[SweepRecord]) -> Result<()> {
    write_all(writer, &SWEEP_HEADER, records)
}

pub fn write_bound_csv<W: Write>(writer: W, records: &[BoundRecord]) -> Result<()> {
    write_all(writer, &["alpha", "empirical_beta", "n_samples"], records)
}

pub fn write_noise_csv<W: Write>(writer: W, records: &[NoiseRecord]) -> Result<()> {
    write_all(writer, &["b", "beta"], records)
}

pub fn write_baseline_csv<W: Write>(writer: W, records: &[BaselineRecord]) -> Result<()> {
    let header = [
        "dataset",
        "method",
        "seed",
        "accuracy",
        "k",
        "mae_reg",
        "beta_ours",
        "beta_baseline",
        "delta",
        "inconsistent_rate",
    ];
    write_all(writer, &header, records)
}

pub fn write_refinement_csv<W: Write>(writer: W, records: &[RefinementRecord]) -> Result<()> {
    write_all(
        writer,
        &["dataset", "seed", "pra", "mae_reg", "mae_post", "beta"],
        records,
    )
}
