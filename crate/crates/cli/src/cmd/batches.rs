//! `sample-batches`: one epoch of masked, padded micro-batches.
//!
//! Text output has one line per example, in batch order:
//! `seq_index<TAB>input ids<TAB>target ids`, ids separated by spaces.
//! Binary output is a sequence store holding, for every example in batch
//! order, its input followed by its target; the report lists which store
//! sequence each pair came from.

use std::io::Write;

use anyhow::Context;
use num_rational::Ratio;
use warmstart_core::batcher::{epoch_batches, padding_efficiency, plan_accumulation, EpochConfig, MicroBatch};
use warmstart_core::corpus::{write_store, SequenceStore};
use warmstart_core::masking::{MaskMode, MaskSpec};
use warmstart_core::vocab::{load_vocab, TokenId};

use super::{output, require_file, require_parent};
use crate::args::{BatchFormat, ModeArg, SampleArgs};
use crate::CliError;

fn join(ids: &[TokenId]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn ratio(r: Ratio<u64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[derive(Default)]
struct Totals {
    batches: u64,
    sequences: u64,
    real: u64,
    cells: u64,
}

impl Totals {
    fn add(&mut self, mb: &MicroBatch, report: &mut dyn Write) -> std::io::Result<()> {
        let b = &mb.batch;
        self.batches += 1;
        self.sequences += mb.seq_indices.len() as u64;
        self.real += b.input.real_cells() + b.target.real_cells();
        self.cells += b.input.total_cells() + b.target.total_cells();
        let seqs: Vec<String> = mb.seq_indices.iter().map(u64::to_string).collect();
        writeln!(
            report,
            "batch={}\tstep={}\tmicro={}\trows={}\tinput_width={}\ttarget_width={}\tefficiency={}\tseq_indices={}",
            self.batches - 1,
            mb.step,
            mb.micro_index,
            b.rows(),
            b.input.width,
            b.target.width,
            ratio(padding_efficiency(b)),
            seqs.join(","),
        )
    }
}

pub fn run(a: &SampleArgs) -> anyhow::Result<()> {
    require_file("store", &a.store)?;
    require_file("vocabulary", &a.vocab)?;
    for p in a.out.iter().chain(&a.report) {
        require_parent("output", p)?;
    }
    if a.format == BatchFormat::Binary && a.out.as_ref().is_none_or(|p| p.as_os_str() == "-") {
        return Err(CliError::config("--format binary needs --out PATH").into());
    }
    let mode = match a.mode {
        ModeArg::Span => MaskMode::Span,
        ModeArg::Iid => MaskMode::Iid,
    };
    let mask = MaskSpec::new(a.rate, a.mean_span, mode)?;
    let plan = plan_accumulation(a.effective_batch, a.micro_batch)?;
    let vocab = load_vocab(&a.vocab, a.specials.ids()).with_context(|| format!("vocabulary {}", a.vocab.display()))?;
    let store = SequenceStore::open(&a.store).with_context(|| format!("store {}", a.store.display()))?;
    let config = EpochConfig {
        seed: a.seed,
        epoch: a.epoch,
        mask,
        plan,
        sort_by_length: a.sort_by_length,
    };

    let mut report = output(a.report.as_ref(), false)?;
    let mut totals = Totals::default();
    let batches = epoch_batches(&store, &vocab, &config)?;
    match a.format {
        BatchFormat::Text => {
            let mut out = output(a.out.as_ref(), true)?;
            for mb in batches {
                let mb = mb?;
                totals.add(&mb, &mut *report)?;
                for (i, ex) in mb.seq_indices.iter().zip(&mb.examples) {
                    writeln!(out, "{i}\t{}\t{}", join(&ex.input_ids), join(&ex.target_ids))?;
                }
            }
            out.flush()?;
        }
        BatchFormat::Binary => {
            let path = a.out.as_ref().expect("checked above");
            let mut failure = None;
            let mut report_error = None;
            let pairs = batches
                .map_while(|mb| mb.map_err(|e| failure = Some(e)).ok())
                .inspect(|mb| {
                    if let Err(e) = totals.add(mb, &mut *report) {
                        report_error.get_or_insert(e);
                    }
                })
                .flat_map(|mb| mb.examples.into_iter().flat_map(|ex| [ex.input_ids, ex.target_ids]));
            let written = write_store(path, pairs, false);
            if let Some(e) = failure {
                let _ = std::fs::remove_file(path);
                return Err(e.into());
            }
            written.with_context(|| format!("writing {}", path.display()))?;
            if let Some(e) = report_error {
                return Err(e.into());
            }
        }
    }
    let pooled = if totals.cells == 0 {
        Ratio::from_integer(1)
    } else {
        Ratio::new(totals.real, totals.cells)
    };
    writeln!(
        report,
        "summary\tseed={}\tepoch={}\tmode={}\trate={}\tmean_span={}\tmicro_batch={}\teffective_batch={}\taccumulation_steps={}\tbatches={}\tsequences={}\tefficiency={}",
        a.seed,
        a.epoch,
        match a.mode {
            ModeArg::Span => "span",
            ModeArg::Iid => "iid",
        },
        a.rate,
        a.mean_span,
        plan.micro_batch_size,
        plan.effective_batch,
        plan.accumulation_steps,
        totals.batches,
        totals.sequences,
        ratio(pooled),
    )?;
    report.flush()?;
    Ok(())
}
