use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub struct RunRecord<'a> {
    pub subcommand: &'a str,
    pub config_hash: &'a str,
    pub seed: Option<u64>,
    pub status: &'a str,
}

impl RunRecord<'_> {
    pub fn line(&self) -> String {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!(
            "ts={ts}\tsubcommand={}\tconfig_sha256={}\tseed={}\twarmstart={}\twarmstart_core={}\tstatus={}",
            self.subcommand,
            self.config_hash,
            self.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
            env!("CARGO_PKG_VERSION"),
            warmstart_core::VERSION,
            self.status,
        )
    }

    pub fn append_to(&self, path: &Path) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{}", self.line())
    }
}
