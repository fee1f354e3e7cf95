//! Destinations for per-step records and periodic snapshots.

use std::io::Write;

use super::{ChainState, MoveRecord};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::textfmt::{format_real, header_line};

pub trait ChainSink {
    fn record(&mut self, record: &MoveRecord, state: &ChainState) -> Result<()>;
    fn snapshot(&mut self, step: u64, logits: &Matrix) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
impl ChainSink for () {
    fn record(&mut self, _: &MoveRecord, _: &ChainState) -> Result<()> {
        Ok(())
    }
    fn snapshot(&mut self, _: u64, _: &Matrix) -> Result<()> {
        Ok(())
    }
}

impl<A: ChainSink, B: ChainSink> ChainSink for (A, B) {
    fn record(&mut self, record: &MoveRecord, state: &ChainState) -> Result<()> {
        self.0.record(record, state)?;
        self.1.record(record, state)
    }
    fn snapshot(&mut self, step: u64, logits: &Matrix) -> Result<()> {
        self.0.snapshot(step, logits)?;
        self.1.snapshot(step, logits)
    }
    fn finish(&mut self) -> Result<()> {
        self.0.finish()?;
        self.1.finish()
    }
}

pub const TRACE_COLUMNS: &str = "step,kind,energy,log_alpha,accepted,mask_size";

/// CSV trace with one row per step; `energy` is the post-step energy.
pub struct TraceCsv<W: Write> {
    out: W,
}

impl<W: Write> TraceCsv<W> {
    pub fn new(mut out: W, seed: u64) -> Result<Self> {
        writeln!(out, "{}", header_line(seed))?;
        writeln!(out, "{TRACE_COLUMNS}")?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> ChainSink for TraceCsv<W> {
    fn record(&mut self, record: &MoveRecord, state: &ChainState) -> Result<()> {
        let mask = record.mask.as_ref().map_or(0, Vec::len);
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            record.step + 1,
            record.kind,
            format_real(state.energy),
            format_real(record.log_acceptance),
            record.accepted as u8,
            mask
        )?;
        Ok(())
    }

    fn snapshot(&mut self, _: u64, _: &Matrix) -> Result<()> {
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Plain-text logit snapshots, one `[snapshot step]` block each.
pub struct SnapshotText<W: Write> {
    out: W,
}

impl<W: Write> SnapshotText<W> {
    pub fn new(mut out: W, seed: u64) -> Result<Self> {
        writeln!(out, "{}", header_line(seed))?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> ChainSink for SnapshotText<W> {
    fn record(&mut self, _: &MoveRecord, _: &ChainState) -> Result<()> {
        Ok(())
    }

    fn snapshot(&mut self, step: u64, logits: &Matrix) -> Result<()> {
        writeln!(self.out, "[snapshot {step}]")?;
        for row in logits.row_iter() {
            let line: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
            writeln!(self.out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Keeps snapshots and (optionally) energies in memory.
#[derive(Default)]
pub struct SnapshotMemory {
    pub snapshots: Vec<(u64, Matrix)>,
    pub energies: Vec<f64>,
    pub records: Vec<MoveRecord>,
    keep_records: bool,
}

impl SnapshotMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_records() -> Self {
        Self {
            keep_records: true,
            ..Self::default()
        }
    }
}

impl ChainSink for SnapshotMemory {
    fn record(&mut self, record: &MoveRecord, state: &ChainState) -> Result<()> {
        self.energies.push(state.energy);
        if self.keep_records {
            self.records.push(record.clone());
        }
        Ok(())
    }

    fn snapshot(&mut self, step: u64, logits: &Matrix) -> Result<()> {
        self.snapshots.push((step, logits.clone()));
        Ok(())
    }
}
