//! Run manifests: everything needed to reproduce a `map` run.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use uvgs_core::synth::SynthSpec;
use uvgs_core::{GridConfig, HeatmapMode, MappingConfig, ReportFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDescriptor {
    Ply { path: PathBuf },
    Synth { spec: SynthSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapOutput {
    pub path: PathBuf,
    pub mode: HeatmapMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub path: PathBuf,
    pub format: ReportFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub tensor: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<HeatmapOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Measurements {
    pub wall_seconds: f64,
    /// Peak resident set size in KiB, where the platform reports it.
    pub peak_rss_kib: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub input: InputDescriptor,
    pub mapping: MappingConfig,
    pub grid: GridConfig,
    pub outputs: Outputs,
    #[serde(default)]
    pub measurements: Measurements,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    /// Same run with every output moved into `dir`, keeping file names.
    pub fn relocated(&self, dir: &Path) -> Self {
        let move_to = |p: &Path| dir.join(p.file_name().unwrap_or(p.as_os_str()));
        let mut m = self.clone();
        m.outputs.tensor = move_to(&self.outputs.tensor);
        if let Some(h) = &mut m.outputs.heatmap {
            h.path = move_to(&h.path);
        }
        if let Some(r) = &mut m.outputs.report {
            r.path = move_to(&r.path);
        }
        m
    }
}

/// Default manifest location next to the tensor: `t.uvgt` -> `t.uvgt.manifest.json`.
pub fn default_manifest_path(tensor: &Path) -> PathBuf {
    let mut name = tensor.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Peak resident set size (`VmHWM`) in KiB; `None` off Linux.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}
