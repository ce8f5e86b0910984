//! Score a network against classic-solver labels.

use rayon::prelude::*;
use viscid_core::loss::LossReport;
use viscid_core::nn::Unet;
use viscid_core::sim::predict_from_stack;
use viscid_core::symgrid::ChannelStack;

use crate::dataset::FrameRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEval {
    pub frame: u64,
    pub report: LossReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub frames: Vec<FrameEval>,
}

impl EvalReport {
    pub fn l2_mean(&self) -> f64 {
        self.mean(|r| r.l2)
    }

    pub fn l_v_mean(&self) -> f64 {
        self.mean(|r| r.l_v)
    }

    pub fn l2_max(&self) -> f64 {
        self.frames.iter().map(|f| f.report.l2).fold(0.0, f64::max)
    }

    fn mean(&self, f: impl Fn(&LossReport) -> f64) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().map(|e| f(&e.report)).sum::<f64>() / self.frames.len() as f64
    }

    /// `key=value` lines: one per frame, then a summary.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .frames
            .iter()
            .map(|f| {
                format!(
                    "frame={} l2={:e} l_v={:e} inertia={:e} dissipation={:e}",
                    f.frame, f.report.l2, f.report.l_v, f.report.inertia_term, f.report.dissipation_term
                )
            })
            .collect();
        out.push(format!(
            "summary frames={} l2_mean={:e} l2_max={:e} l_v_mean={:e}",
            self.frames.len(),
            self.l2_mean(),
            self.l2_max(),
            self.l_v_mean()
        ));
        out
    }
}

/// Network input for a record, dropping the viscosity channel when the
/// network does not take one.
fn input_for(record: &FrameRecord, in_channels: usize) -> Result<ChannelStack> {
    let stack = &record.input;
    if stack.channels == in_channels {
        return Ok(stack.clone());
    }
    if stack.channels > in_channels {
        let n = stack.sx * stack.sy;
        return Ok(ChannelStack::from_vec(in_channels, stack.sx, stack.sy, stack.data[..in_channels * n].to_vec())?);
    }
    Err(Error::Invalid(format!(
        "network expects {in_channels} input channels, dataset frame {} has {}",
        record.frame, stack.channels
    )))
}

/// Evaluate every record; frames run in parallel, results keep file order.
pub fn evaluate(records: &[FrameRecord], net: &Unet) -> Result<EvalReport> {
    let frames = records
        .par_iter()
        .map(|r| {
            let input = input_for(r, net.config().in_channels)?;
            let pred = predict_from_stack(net, &input, &r.dims)?;
            let report = LossReport::evaluate(&pred, &r.label, &r.vel_old, &r.params(), &r.dims)?;
            Ok(FrameEval { frame: r.frame, report })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { frames })
}
