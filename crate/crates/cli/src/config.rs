//! Strict JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, ensure, Context};
use conformal_qw::curved::{AncillaInit, PipelineConfig, Sector};
use conformal_qw::lattice::{Grid, PacketParams};
use conformal_qw::metric::{ConformalField, MetricTable};
use conformal_qw::walk::CoinParams;
use serde::{Deserialize, Serialize};

use crate::failure::Outcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub steps: usize,
    #[serde(default)]
    pub t_start: f64,
    /// Coin mass `θ` of the Ψ sector.
    #[serde(default)]
    pub theta: f64,
    /// Coin mass of the Φ sector; defaults to `theta`.
    pub theta_phi: Option<f64>,
    #[serde(default = "one")]
    pub eta: f64,
    pub metric: Option<MetricSection>,
    #[serde(default = "default_packet")]
    pub packet: PacketSection,
    #[serde(default)]
    pub ancilla_init: AncillaChoice,
    #[serde(default)]
    pub sector: SectorChoice,
    /// Record every `snapshot_cadence`-th step; 0 records only the ends.
    #[serde(default)]
    pub snapshot_cadence: usize,
    /// Also write the flat-frame state before the final decode.
    #[serde(default)]
    pub export_flat_frame: bool,
    /// Write measured wallclock into the sweep CSV instead of zeros.
    #[serde(default)]
    pub record_wallclock: bool,
    pub sweep: Option<SweepSection>,
}

fn one() -> f64 {
    1.0
}

fn default_packet() -> PacketSection {
    PacketSection { x0: 0.0, sigma: 0.5, k0: 0.0, chi: 0.0, phase: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_sites: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub x0: f64,
    pub sigma: f64,
    #[serde(default)]
    pub k0: f64,
    #[serde(default)]
    pub chi: f64,
    #[serde(default)]
    pub phase: f64,
}

impl From<PacketSection> for PacketParams<f64> {
    fn from(p: PacketSection) -> Self {
        PacketParams { x0: p.x0, sigma: p.sigma, k0: p.k0, chi: p.chi, phase: p.phase }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSection {
    Constant {
        value: f64,
    },
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    ExponentialTime {
        scale: f64,
        rate: f64,
    },
    PowerTime {
        scale: f64,
        power: f64,
    },
    /// CSV with header `t,x,omega2`, resolved relative to the config file.
    Tabulated {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaChoice {
    #[default]
    Zero,
    Packet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorChoice {
    #[default]
    Psi,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Flat,
    Curved,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub eta_list: Vec<f64>,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_width")]
    pub width: f64,
    pub domain_length: Option<f64>,
    pub horizon: Option<f64>,
}

fn default_width() -> f64 {
    1.0
}

/// Parsed configuration plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.check_ranges()?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn grid(&self) -> anyhow::Result<Grid<f64>> {
        let g = self.config.grid.context("config has no `grid` section")?;
        Grid::new(g.n_sites, g.eps).context("invalid grid")
    }

    /// The metric section as a conformal field. A table with a nonpositive
    /// entry is a numerical failure, a malformed one a config failure.
    pub fn metric(&self) -> Outcome<ConformalField<f64>> {
        let m = self.config.metric.as_ref().context("config has no `metric` section")?;
        Ok(match *m {
            MetricSection::Constant { value } => ConformalField::constant(value),
            MetricSection::GaussianBump { amplitude, width, center } => {
                ConformalField::gaussian_bump(amplitude, width, center)
            }
            MetricSection::ExponentialTime { scale, rate } => ConformalField::exponential_time(scale, rate),
            MetricSection::PowerTime { scale, power } => ConformalField::power_time(scale, power),
            MetricSection::Tabulated { ref path } => {
                let full = self.base_dir.join(path);
                let file = std::fs::File::open(&full).with_context(|| format!("opening {}", full.display()))?;
                match MetricTable::from_csv_reader(file) {
                    Ok(table) => ConformalField::tabulated(table),
                    Err(e @ conformal_qw::Error::Table(_)) => {
                        return Err(anyhow!("metric table {}: {e}", full.display()).into())
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        })
    }

    pub fn pipeline(&self, metric: ConformalField<f64>) -> Outcome<PipelineConfig<f64>> {
        let c = &self.config;
        let grid = self.grid()?;
        let mut cfg = PipelineConfig::lattice_units(grid, c.steps, c.theta, c.eta, metric, c.packet.into())?;
        cfg.t_start = c.t_start;
        cfg.coin_phi = c.theta_phi.map(|theta| CoinParams::new(grid.spacing(), theta));
        cfg.ancilla_init = match c.ancilla_init {
            AncillaChoice::Zero => AncillaInit::Zero,
            AncillaChoice::Packet => AncillaInit::Packet,
        };
        cfg.sector = match c.sector {
            SectorChoice::Psi => Sector::Psi,
            SectorChoice::Phi => Sector::Phi,
        };
        Ok(cfg)
    }
}

fn finite(name: &str, v: f64) -> anyhow::Result<()> {
    ensure!(v.is_finite(), "`{name}` must be finite, got {v}");
    Ok(())
}

impl RunConfig {
    /// Ranges of the physical parameters. Metric values are deliberately
    /// not checked here; positivity is a numerical precondition.
    pub fn check_ranges(&self) -> anyhow::Result<()> {
        if let Some(g) = self.grid {
            ensure!(g.eps > 0.0 && g.eps <= 1.0, "`grid.eps` must lie in (0, 1], got {}", g.eps);
            ensure!(g.n_sites >= 4, "`grid.n_sites` must be at least 4");
        }
        for (name, v) in [("t_start", self.t_start), ("theta", self.theta), ("eta", self.eta)] {
            finite(name, v)?;
        }
        ensure!(self.eta > 0.0, "`eta` must be positive, got {}", self.eta);
        if let Some(t) = self.theta_phi {
            finite("theta_phi", t)?;
        }
        let p = self.packet;
        for (name, v) in [
            ("packet.x0", p.x0),
            ("packet.sigma", p.sigma),
            ("packet.k0", p.k0),
            ("packet.chi", p.chi),
            ("packet.phase", p.phase),
        ] {
            finite(name, v)?;
        }
        ensure!(p.sigma > 0.0, "`packet.sigma` must be positive");
        if let Some(s) = &self.sweep {
            ensure!(s.eps_list.iter().all(|&e| e > 0.0 && e <= 1.0), "`sweep.eps_list` entries must lie in (0, 1]");
            ensure!(s.eta_list.iter().all(|&e| e > 0.0 && e.is_finite()), "`sweep.eta_list` entries must be positive");
            ensure!(s.amplitudes.iter().all(|&a| a >= 0.0 && a.is_finite()), "`sweep.amplitudes` must be nonnegative");
            ensure!(s.width > 0.0, "`sweep.width` must be positive");
            finite("sweep.mass", s.mass)?;
            for (name, v) in [("sweep.domain_length", s.domain_length), ("sweep.horizon", s.horizon)] {
                if let Some(v) = v {
                    ensure!(v > 0.0 && v.is_finite(), "`{name}` must be positive");
                }
            }
        }
        Ok(())
    }
}
