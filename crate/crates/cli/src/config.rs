//! Run configuration: defaults, optional JSON file, then flag overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sure_amp::uncertainty::{Probe, SureConfig};
use sure_amp::WaveletSpec;

use crate::error::{usage, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Gaussian,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Phantom {
    SheppLogan,
    Spikes,
    Blocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeArg {
    Rademacher,
    Gaussian,
}

impl From<ProbeArg> for Probe {
    fn from(p: ProbeArg) -> Self {
        match p {
            ProbeArg::Rademacher => Probe::Rademacher,
            ProbeArg::Gaussian => Probe::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// PGM input; a synthetic phantom is used when absent.
    pub image: Option<PathBuf>,
    pub phantom: Phantom,
    /// Side of the synthetic phantom.
    pub size: usize,
    pub measure: Measure,
    pub rate: f64,
    pub snr_db: f64,
    /// `soft`, `subband`, `sure-shrink`, `pixel-soft`, `identity` or
    /// `plugin:<path>`.
    pub denoiser: String,
    pub plugin_args: Vec<String>,
    /// Threshold multiplier of the soft-threshold denoisers.
    pub threshold: f64,
    pub levels: usize,
    #[serde(rename = "T")]
    pub iterations: Option<usize>,
    pub early_stop: Option<f64>,
    /// Keep the Onsager correction in AMP.
    pub onsager: bool,
    pub patch: usize,
    pub stride: Option<usize>,
    #[serde(rename = "K")]
    pub k: usize,
    pub probe: Probe,
    /// Directory with the outputs of a previous `recon`; defaults to `out`.
    pub input: Option<PathBuf>,
    /// Generate a denoising problem instead of reading `input`.
    pub synthetic: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            image: None,
            phantom: Phantom::SheppLogan,
            size: 128,
            measure: Measure::Fourier,
            rate: 0.25,
            snr_db: 20.0,
            denoiser: "subband".into(),
            plugin_args: Vec::new(),
            threshold: sure_amp::denoise::DEFAULT_THRESHOLD_MULTIPLIER,
            levels: WaveletSpec::default().levels,
            iterations: None,
            early_stop: None,
            onsager: true,
            patch: 48,
            stride: None,
            k: 2,
            probe: Probe::default(),
            input: None,
            synthetic: false,
            out: PathBuf::from("out"),
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags given alongside override its fields
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit
    #[arg(long, global = true)]
    pub print_config: bool,
    /// Master seed for every random stream
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Input image (binary PGM)
    #[arg(long, global = true, value_name = "PGM")]
    pub image: Option<PathBuf>,
    /// Synthetic image used when no --image is given
    #[arg(long, global = true, value_enum)]
    pub phantom: Option<Phantom>,
    /// Side of the synthetic image
    #[arg(long, global = true)]
    pub size: Option<usize>,
    /// Measurement model
    #[arg(long, global = true, value_enum)]
    pub measure: Option<Measure>,
    /// Sampling rate m/n
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Measurement-domain SNR in dB
    #[arg(long = "snr-db", global = true, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// soft | subband | sure-shrink | pixel-soft | identity | plugin:<path>
    #[arg(long, global = true)]
    pub denoiser: Option<String>,
    /// Argument passed to a plugin denoiser (repeatable)
    #[arg(long = "plugin-arg", global = true, allow_hyphen_values = true)]
    pub plugin_args: Vec<String>,
    /// Threshold multiplier of the soft-threshold denoisers
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Wavelet decomposition levels
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Iteration count
    #[arg(long = "T", global = true)]
    pub iterations: Option<usize>,
    /// Stop AMP once sigma_hat falls by less than this fraction
    #[arg(long = "early-stop", global = true)]
    pub early_stop: Option<f64>,
    /// Drop the Onsager correction (plain iterative thresholding)
    #[arg(long = "no-onsager", global = true)]
    pub no_onsager: bool,
    /// Heatmap patch side
    #[arg(long, global = true)]
    pub patch: Option<usize>,
    /// Heatmap patch stride [default: patch/4]
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Monte-Carlo probes per divergence estimate
    #[arg(long = "K", global = true)]
    pub k: Option<usize>,
    /// Probe distribution for divergence estimates
    #[arg(long, global = true, value_enum)]
    pub probe: Option<ProbeArg>,
    /// Directory holding `recon` outputs
    #[arg(long, global = true, value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// Use a generated denoising problem instead of --input
    #[arg(long, global = true)]
    pub synthetic: bool,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Merges defaults, the config file and the flags, then fills derived
    /// defaults and validates.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { c.$field = v.into(); } )* };
        }
        set!(seed, phantom, size, measure, rate, snr_db, denoiser, threshold, levels, patch, k, out);
        if self.image.is_some() {
            c.image = self.image.clone();
        }
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.iterations.is_some() {
            c.iterations = self.iterations;
        }
        if self.early_stop.is_some() {
            c.early_stop = self.early_stop;
        }
        if self.stride.is_some() {
            c.stride = self.stride;
        }
        if let Some(p) = self.probe {
            c.probe = p.into();
        }
        if !self.plugin_args.is_empty() {
            c.plugin_args = self.plugin_args.clone();
        }
        c.synthetic |= self.synthetic;
        c.onsager &= !self.no_onsager;
        c.iterations.get_or_insert(match c.measure {
            Measure::Gaussian => 30,
            Measure::Fourier => 10,
        });
        c.stride.get_or_insert((c.patch / 4).max(1));
        c.validate()?;
        Ok(c)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let full_ok = self.measure == Measure::Fourier && self.rate == 1.0;
        if !(self.rate > 0.0 && self.rate < 1.0) && !full_ok {
            return usage(format!("--rate must be in (0, 1) (1 is allowed for fourier), got {}", self.rate));
        }
        if !self.snr_db.is_finite() {
            return usage("--snr-db must be finite");
        }
        if self.size == 0 {
            return usage("--size must be positive");
        }
        if self.levels == 0 {
            return usage("--levels must be at least 1");
        }
        if !(self.threshold >= 0.0) {
            return usage("--threshold must be non-negative");
        }
        if self.iterations == Some(0) {
            return usage("--T must be at least 1");
        }
        if self.k == 0 {
            return usage("--K must be at least 1");
        }
        if self.patch == 0 {
            return usage("--patch must be positive");
        }
        if let Some(s) = self.stride {
            if s == 0 || s > self.patch {
                return usage(format!("--stride must be in [1, patch = {}]", self.patch));
            }
        }
        if let Some(img) = &self.image {
            require_file(img, "image")?;
        }
        match self.denoiser.split_once(':') {
            Some(("plugin", path)) => require_file(Path::new(path), "plugin")?,
            _ if KNOWN_DENOISERS.contains(&self.denoiser.as_str()) => {}
            _ => {
                return usage(format!(
                    "unknown denoiser {:?}; expected one of {} or plugin:<path>",
                    self.denoiser,
                    KNOWN_DENOISERS.join(", ")
                ))
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> WaveletSpec {
        WaveletSpec { levels: self.levels }
    }

    pub fn iterations(&self) -> usize {
        self.iterations.expect("resolved config")
    }

    pub fn sure_config(&self) -> SureConfig {
        SureConfig::with_patch(self.patch)
            .stride(self.stride.expect("resolved config"))
            .k(self.k)
            .probe(self.probe)
    }

    pub fn input_dir(&self) -> &Path {
        self.input.as_deref().unwrap_or(&self.out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }
}

pub const KNOWN_DENOISERS: [&str; 5] = ["soft", "subband", "sure-shrink", "pixel-soft", "identity"];

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        usage(format!("{what} {} does not exist", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = RunArgs::default().resolve().unwrap();
        assert_eq!(c.iterations, Some(10));
        assert_eq!(c.stride, Some(12));
        let g = RunArgs { measure: Some(Measure::Gaussian), patch: Some(16), ..Default::default() };
        let c = g.resolve().unwrap();
        assert_eq!((c.iterations, c.stride), (Some(30), Some(4)));
    }

    #[test]
    fn rejects_bad_values() {
        for args in [
            RunArgs { rate: Some(0.0), ..Default::default() },
            RunArgs { rate: Some(1.0), measure: Some(Measure::Gaussian), ..Default::default() },
            RunArgs { snr_db: Some(f64::INFINITY), ..Default::default() },
            RunArgs { denoiser: Some("bm3d".into()), ..Default::default() },
            RunArgs { denoiser: Some("plugin:/no/such/file".into()), ..Default::default() },
            RunArgs { image: Some("/no/such.pgm".into()), ..Default::default() },
            RunArgs { k: Some(0), ..Default::default() },
        ] {
            assert!(matches!(args.resolve(), Err(CliError::Usage(_))), "{args:?}");
        }
        assert!(RunArgs { rate: Some(1.0), ..Default::default() }.resolve().is_ok());
    }

    #[test]
    fn json_round_trip_and_hash() {
        let c = RunArgs { seed: Some(7), ..Default::default() }.resolve().unwrap();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        let other = RunArgs { seed: Some(8), ..Default::default() }.resolve().unwrap();
        assert_ne!(other.hash(), c.hash());
        assert!(c.to_json().contains(r#""T": 10"#));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "K": 5}"#).unwrap();
        assert_eq!((c.seed, c.k, c.patch), (3, 5, 48));
    }
}
