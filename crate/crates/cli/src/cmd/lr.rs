use std::io::Write;

use anyhow::Context;
use warmstart_core::corpus::SequenceStore;
use warmstart_core::schedule::{total_steps_for, LrSchedule, ScheduleShape};

use super::{output, require_file, require_parent};
use crate::args::{Emit, LrArgs, ShapeArg};
use crate::CliError;

pub fn run(a: &LrArgs, _seed: Option<u64>) -> anyhow::Result<()> {
    if let Some(p) = &a.out {
        require_parent("output", p)?;
    }
    let total = match (a.total, &a.store) {
        (Some(t), _) => t,
        (None, Some(store)) => {
            require_file("store", store)?;
            let n = SequenceStore::open(store).with_context(|| format!("store {}", store.display()))?.len();
            total_steps_for(n, a.epochs, a.effective_batch)
        }
        (None, None) => return Err(CliError::config("lr-curve needs --total or --store").into()),
    };
    let shape = match a.shape {
        ShapeArg::Linear => ScheduleShape::LinearWarmupLinearDecay,
        ShapeArg::InverseSqrt => ScheduleShape::InverseSqrt,
    };
    let schedule = LrSchedule::with_shape(a.peak, a.warmup, total, shape)?;
    let mut w = output(a.out.as_ref(), true)?;
    match a.emit {
        Emit::Csv => {
            writeln!(w, "step,lr")?;
            let mut step = 0;
            while step <= total {
                writeln!(w, "{step},{}", schedule.lr_at(step)?)?;
                step += a.every;
            }
            if total % a.every != 0 {
                writeln!(w, "{total},{}", schedule.lr_at(total)?)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
