use warmstart_core::memplan::{
    evaluate, interconnect_compare, recommend, Action, HardwareSpec, Location, MemoryReport, ModelSpec, Precision,
    GB,
};

use super::seed_field;
use crate::args::{MemplanArgs, PrecisionArg};

fn gb(bytes: u64) -> String {
    format!("{:.2} GB", bytes as f64 / GB as f64)
}

fn action_key(a: &Action) -> String {
    match a {
        Action::OffloadOptimizer => "offload-optimizer".into(),
        Action::UseHalfPrecision => "half-precision".into(),
        Action::ModelParallel { gpus } => format!("model-parallel-{gpus}"),
        Action::InsufficientHardware => "insufficient-hardware".into(),
    }
}

fn describe(r: &MemoryReport, hw: &HardwareSpec) {
    let f = &r.footprint;
    println!(
        "  {} parameters, {}, optimizer state on {}",
        r.model.param_count,
        r.precision.name(),
        match f.optimizer_location {
            Location::Gpu => "GPU",
            Location::Cpu => "CPU",
        }
    );
    println!("  weights    {:>16} B  ({})", f.weights_bytes, gb(f.weights_bytes));
    println!("  gradients  {:>16} B  ({})", f.gradients_bytes, gb(f.gradients_bytes));
    println!("  optimizer  {:>16} B  ({})", f.optimizer_bytes, gb(f.optimizer_bytes));
    println!("  on GPUs    {:>16} B  ({}), {} per GPU over {}", f.gpu_bytes, gb(f.gpu_bytes), gb(r.per_gpu_bytes), r.gpus_used);
    println!("  in RAM     {:>16} B  ({})", f.cpu_bytes, gb(f.cpu_bytes));
    println!(
        "  fits: {} ({} per GPU, {} RAM, headroom {:.1}%)",
        if r.fits { "yes" } else { "no" },
        gb(hw.gpu_memory_bytes),
        gb(hw.system_ram_bytes),
        r.headroom_fraction * 100.0
    );
    for n in &r.notes {
        println!("  note: {n}");
    }
}

pub fn run(a: &MemplanArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let model = ModelSpec { param_count: a.params };
    let precision = match a.precision {
        PrecisionArg::Fp32 => Precision::Full32,
        PrecisionArg::Fp16 => Precision::Half16,
        PrecisionArg::Bf16 => Precision::Brain16,
    };
    let hw = HardwareSpec {
        gpu_count: a.gpus.max(1),
        gpu_memory_bytes: a.gpu_mem,
        system_ram_bytes: a.ram,
        nvlink_pairs: a.nvlink,
        pcie_generation: a.pcie_gen,
    };
    let report = evaluate(model, precision, a.offload, &hw, hw.gpu_count);
    let link = interconnect_compare(&hw);
    let advice = recommend(model, &hw);

    println!("memory plan (activations excluded)");
    describe(&report, &hw);
    println!();
    println!("interconnect");
    for line in &link.lines {
        println!("  {line}");
    }
    println!();
    println!("recommendation, starting from fp32 with the optimizer on one GPU");
    if advice.actions.is_empty() {
        println!("  none required");
    }
    for (i, action) in advice.actions.iter().enumerate() {
        println!("  {}. {action}", i + 1);
    }
    if !advice.actions.is_empty() {
        describe(&advice.report, &hw);
    }
    for n in &advice.notes {
        println!("  guidance: {n}");
    }

    println!();
    for (k, v) in report.key_values() {
        println!("{k}={v}");
    }
    println!("gpus={}", hw.gpu_count);
    println!("gpu_memory_bytes={}", hw.gpu_memory_bytes);
    println!("system_ram_bytes={}", hw.system_ram_bytes);
    println!("interconnect_applicable={}", link.applicable);
    if let Some(bw) = link.pcie_gbps {
        println!("pcie_gbps={bw}");
    }
    if let Some((lo, hi)) = link.nvlink_gbps {
        println!("nvlink_gbps={lo}-{hi}");
    }
    if let Some((lo, hi)) = link.nvlink_advantage {
        println!("nvlink_advantage={lo:.3}-{hi:.3}");
    }
    let actions: Vec<String> = advice.actions.iter().map(action_key).collect();
    println!("recommended_actions={}", if actions.is_empty() { "none".into() } else { actions.join(",") });
    println!("seed={}", seed_field(seed));
    Ok(())
}
