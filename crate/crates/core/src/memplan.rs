//! Training memory accounting and hardware advice.
//!
//! Byte counts cover weights, gradients and optimizer moments only. An
//! Adam-family optimizer keeps two extra values per parameter (first and
//! second moment), stored at 4 bytes each whatever the weight precision.
//! Activation memory depends on batch shape and model internals and is
//! left out of every fit check. All totals are exact integers.

use std::fmt;

pub const OPTIMIZER_STATES_PER_PARAM: u64 = 2;
pub const OPTIMIZER_STATE_BYTES: u64 = 4;
/// Decimal gigabyte, the unit used for device capacities and bandwidths.
pub const GB: u64 = 1_000_000_000;
pub const RECOMMENDED_RAM_BYTES: u64 = 512 * GB;

pub const NVLINK_GBPS: (f64, f64) = (50.0, 100.0);
pub const PCIE4_GBPS: f64 = 31.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub param_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Full32,
    Half16,
    Brain16,
}

impl Precision {
    pub fn bytes_per_value(self) -> u64 {
        match self {
            Precision::Full32 => 4,
            Precision::Half16 | Precision::Brain16 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Full32 => "fp32",
            Precision::Half16 => "fp16",
            Precision::Brain16 => "bf16",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardwareSpec {
    pub gpu_count: u32,
    pub gpu_memory_bytes: u64,
    pub system_ram_bytes: u64,
    pub nvlink_pairs: bool,
    pub pcie_generation: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Gpu,
    Cpu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub weights_bytes: u64,
    pub gradients_bytes: u64,
    pub optimizer_bytes: u64,
    pub optimizer_location: Location,
    /// Everything charged to accelerators, before any split.
    pub gpu_bytes: u64,
    pub cpu_bytes: u64,
}

pub fn estimate(model: ModelSpec, precision: Precision, offload: bool) -> Footprint {
    let p = model.param_count;
    let weights = p * precision.bytes_per_value();
    let gradients = p * precision.bytes_per_value();
    let optimizer = OPTIMIZER_STATES_PER_PARAM * p * OPTIMIZER_STATE_BYTES;
    let (gpu, cpu, location) = if offload {
        (weights + gradients, optimizer, Location::Cpu)
    } else {
        (weights + gradients + optimizer, 0, Location::Gpu)
    };
    Footprint {
        weights_bytes: weights,
        gradients_bytes: gradients,
        optimizer_bytes: optimizer,
        optimizer_location: location,
        gpu_bytes: gpu,
        cpu_bytes: cpu,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryReport {
    pub model: ModelSpec,
    pub precision: Precision,
    pub offload: bool,
    pub footprint: Footprint,
    /// GPUs the accelerator share is split across evenly.
    pub gpus_used: u32,
    pub per_gpu_bytes: u64,
    pub fits: bool,
    /// `(capacity - per_gpu) / capacity`; negative when it does not fit.
    pub headroom_fraction: f64,
    pub notes: Vec<String>,
}

/// Footprint checked against `hw`, with the accelerator share split evenly
/// over `gpus_used` devices.
pub fn evaluate(model: ModelSpec, precision: Precision, offload: bool, hw: &HardwareSpec, gpus_used: u32) -> MemoryReport {
    let gpus_used = gpus_used.clamp(1, hw.gpu_count.max(1));
    let footprint = estimate(model, precision, offload);
    let per_gpu = footprint.gpu_bytes.div_ceil(u64::from(gpus_used));
    let gpu_ok = per_gpu <= hw.gpu_memory_bytes;
    let ram_ok = footprint.cpu_bytes <= hw.system_ram_bytes;
    let headroom = if hw.gpu_memory_bytes == 0 {
        f64::NEG_INFINITY
    } else {
        (hw.gpu_memory_bytes as f64 - per_gpu as f64) / hw.gpu_memory_bytes as f64
    };
    let mut notes = vec![
        "activation memory is not included; leave headroom for activations".to_string(),
        format!(
            "optimizer keeps {OPTIMIZER_STATES_PER_PARAM} extra values per parameter at {OPTIMIZER_STATE_BYTES} bytes each, \
             i.e. two additional values per parameter (not 2x the weight bytes)"
        ),
    ];
    if precision != Precision::Full32 {
        notes.push("optimizer moments stay at 4 bytes per value under 16-bit weights (assumed)".into());
    }
    if !ram_ok {
        notes.push(format!(
            "offloaded optimizer state needs {} bytes but system RAM is {} bytes",
            footprint.cpu_bytes, hw.system_ram_bytes
        ));
    }
    MemoryReport {
        model,
        precision,
        offload,
        footprint,
        gpus_used,
        per_gpu_bytes: per_gpu,
        fits: gpu_ok && ram_ok,
        headroom_fraction: headroom,
        notes,
    }
}

impl MemoryReport {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let f = &self.footprint;
        vec![
            ("params", self.model.param_count.to_string()),
            ("precision", self.precision.name().to_string()),
            ("offload", self.offload.to_string()),
            ("weights_bytes", f.weights_bytes.to_string()),
            ("gradients_bytes", f.gradients_bytes.to_string()),
            ("optimizer_bytes", f.optimizer_bytes.to_string()),
            (
                "optimizer_location",
                match f.optimizer_location {
                    Location::Gpu => "gpu",
                    Location::Cpu => "cpu",
                }
                .to_string(),
            ),
            ("gpu_total_bytes", f.gpu_bytes.to_string()),
            ("cpu_bytes", f.cpu_bytes.to_string()),
            ("gpus_used", self.gpus_used.to_string()),
            ("per_gpu_bytes", self.per_gpu_bytes.to_string()),
            ("fits", self.fits.to_string()),
            ("headroom_fraction", format!("{:.4}", self.headroom_fraction)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    NvLink,
    Pcie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectReport {
    pub applicable: bool,
    pub pcie_generation: u8,
    /// x16 bandwidth of the configured PCIe generation, if known.
    pub pcie_gbps: Option<f64>,
    pub nvlink_gbps: Option<(f64, f64)>,
    /// NVLink bandwidth over PCIe 4.0 bandwidth, low and high end.
    pub nvlink_advantage: Option<(f64, f64)>,
    /// Link that bounds GPU-to-GPU traffic somewhere in the machine.
    pub slowest_gpu_link: Option<Link>,
    pub lines: Vec<String>,
}

pub fn pcie_x16_gbps(generation: u8) -> Option<f64> {
    match generation {
        3 => Some(15.75),
        4 => Some(PCIE4_GBPS),
        5 => Some(63.0),
        _ => None,
    }
}

pub fn interconnect_compare(hw: &HardwareSpec) -> InterconnectReport {
    if hw.gpu_count < 2 {
        return InterconnectReport {
            applicable: false,
            pcie_generation: hw.pcie_generation,
            pcie_gbps: pcie_x16_gbps(hw.pcie_generation),
            nvlink_gbps: None,
            nvlink_advantage: None,
            slowest_gpu_link: None,
            lines: vec!["interconnect: not applicable (single GPU)".into()],
        };
    }
    let pcie = pcie_x16_gbps(hw.pcie_generation);
    let mut lines = vec![match pcie {
        Some(bw) => format!("PCIe {}.0 x16: {bw} GB/s", hw.pcie_generation),
        None => format!("PCIe generation {}: bandwidth unknown", hw.pcie_generation),
    }];
    let (nvlink, advantage, slowest) = if hw.nvlink_pairs {
        let adv = (NVLINK_GBPS.0 / PCIE4_GBPS, NVLINK_GBPS.1 / PCIE4_GBPS);
        lines.push(format!(
            "NVLink bridge: {}-{} GB/s (depending on GPU generation), {:.3}x-{:.3}x PCIe 4.0 at {PCIE4_GBPS} GB/s",
            NVLINK_GBPS.0, NVLINK_GBPS.1, adv.0, adv.1
        ));
        // bridges join pairs; traffic between pairs still crosses PCIe
        let slowest = if hw.gpu_count > 2 { Link::Pcie } else { Link::NvLink };
        (Some(NVLINK_GBPS), Some(adv), slowest)
    } else {
        lines.push("no NVLink bridges: GPU-to-GPU traffic goes over PCIe".into());
        (None, None, Link::Pcie)
    };
    lines.push(format!(
        "slowest GPU-to-GPU path: {}",
        match slowest {
            Link::NvLink => "NVLink",
            Link::Pcie => "PCIe",
        }
    ));
    InterconnectReport {
        applicable: true,
        pcie_generation: hw.pcie_generation,
        pcie_gbps: pcie,
        nvlink_gbps: nvlink,
        nvlink_advantage: advantage,
        slowest_gpu_link: Some(slowest),
        lines,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    OffloadOptimizer,
    UseHalfPrecision,
    ModelParallel { gpus: u32 },
    /// Nothing in the rule chain makes the model fit.
    InsufficientHardware,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::OffloadOptimizer => write!(f, "offload optimizer state to CPU memory"),
            Action::UseHalfPrecision => write!(f, "train with 16-bit weights and gradients (bf16 where supported)"),
            Action::ModelParallel { gpus } => write!(f, "split the model evenly across {gpus} GPUs"),
            Action::InsufficientHardware => write!(f, "does not fit on this hardware; more GPU memory is needed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    /// Required changes, in the order they were applied.
    pub actions: Vec<Action>,
    /// Report for the last configuration tried.
    pub report: MemoryReport,
    /// Standing hardware guidance; informational only.
    pub notes: Vec<String>,
}

/// Starts from 32-bit weights with the optimizer on one GPU and relaxes one
/// setting at a time (offload, 16-bit, model parallelism) until it fits.
pub fn recommend(model: ModelSpec, hw: &HardwareSpec) -> Recommendation {
    let mut actions = Vec::new();
    let mut report = evaluate(model, Precision::Full32, false, hw, 1);
    if !report.fits {
        actions.push(Action::OffloadOptimizer);
        report = evaluate(model, Precision::Full32, true, hw, 1);
    }
    if !report.fits {
        actions.push(Action::UseHalfPrecision);
        report = evaluate(model, Precision::Brain16, true, hw, 1);
    }
    if !report.fits && hw.gpu_count > 1 {
        actions.push(Action::ModelParallel { gpus: hw.gpu_count });
        report = evaluate(model, Precision::Brain16, true, hw, hw.gpu_count);
    }
    if !report.fits {
        actions.push(Action::InsufficientHardware);
    }

    let mut notes = vec![
        "prefer GPU memory capacity over compute speed when buying accelerators".to_string(),
        format!(
            "bridge GPU pairs with NVLink ({}-{} GB/s) rather than relying on PCIe 4.0 ({PCIE4_GBPS} GB/s)",
            NVLINK_GBPS.0, NVLINK_GBPS.1
        ),
        "prefer GPUs with native fp16 and bf16 support".to_string(),
        "plan for 512 GB or more of system RAM; leave DIMM slots free for upgrades".to_string(),
        "leave spare PCIe slots so GPUs can be added later".to_string(),
    ];
    if hw.system_ram_bytes < RECOMMENDED_RAM_BYTES {
        notes.push(format!(
            "system RAM ({} GB) is below the 512 GB guideline",
            hw.system_ram_bytes / GB
        ));
    }
    Recommendation {
        actions,
        report,
        notes,
    }
}
