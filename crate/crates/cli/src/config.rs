//! Run configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use sentiprobe_core::corpus::DEFAULT_MIN_ABS_SCORE;
use sentiprobe_core::scorer::{Normalization, ProbeTemplate, RemoteConfig, DEFAULT_CLAMP, DEFAULT_TEMPLATE};
use sentiprobe_core::sst::{DEFAULT_KS, DEFAULT_Q_EPS};
use sentiprobe_core::sat::DEFAULT_THRESHOLDS;
use sentiprobe_core::ScoreUnit;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENDPOINT_ENV: &str = "SENTIPROBE_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Toy,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconConfig {
    pub vader: Option<PathBuf>,
    pub mpqa: Option<PathBuf>,
    pub min_abs_score: f64,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        Self { vader: None, mpqa: None, min_abs_score: DEFAULT_MIN_ABS_SCORE }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewsConfig {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
    pub retries: u32,
    pub retry_delay_ms: u64,
    pub cue_table: Option<PathBuf>,
    pub clamp: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Toy,
            endpoint: None,
            timeout_secs: 60,
            batch_size: 16,
            retries: 2,
            retry_delay_ms: 500,
            cue_table: None,
            clamp: DEFAULT_CLAMP,
        }
    }
}

impl BackendConfig {
    pub fn remote(&self) -> Result<RemoteConfig, CliError> {
        let endpoint = self
            .endpoint
            .clone()
            .ok_or_else(|| CliError::Usage(format!("remote backend needs an endpoint (--endpoint, backend.endpoint or {ENDPOINT_ENV})")))?;
        Ok(RemoteConfig {
            endpoint,
            timeout: Duration::from_secs(self.timeout_secs),
            batch_size: self.batch_size,
            retries: self.retries,
            retry_delay: Duration::from_millis(self.retry_delay_ms),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lexicon: LexiconConfig,
    pub reviews: ReviewsConfig,
    pub backend: BackendConfig,
    pub per_class_count: usize,
    pub template: String,
    pub sat_thresholds: Vec<f64>,
    pub sst_ks: Vec<usize>,
    pub score_unit: ScoreUnit,
    pub q_eps: f64,
    pub normalization: Normalization,
    pub out_dir: PathBuf,
    /// Threads making backend calls.
    pub workers: usize,
    /// Reviews per SAT checkpoint unit.
    pub chunk_size: usize,
    pub top_n: usize,
    pub agreement_k: usize,
    /// SAT threshold whose verdicts feed overlap and agreement.
    pub overlap_threshold: f64,
    /// Extra run directories unioned into the cross-test sets.
    pub analyze_runs: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lexicon: LexiconConfig::default(),
            reviews: ReviewsConfig::default(),
            backend: BackendConfig::default(),
            per_class_count: 400,
            template: DEFAULT_TEMPLATE.to_string(),
            sat_thresholds: DEFAULT_THRESHOLDS.to_vec(),
            sst_ks: DEFAULT_KS.to_vec(),
            score_unit: ScoreUnit::Percent,
            q_eps: DEFAULT_Q_EPS,
            normalization: Normalization::Candidates,
            out_dir: PathBuf::from("out"),
            workers: 4,
            chunk_size: 64,
            top_n: 10,
            agreement_k: 50,
            overlap_threshold: 0.5,
            analyze_runs: Vec::new(),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub ks: Option<Vec<usize>>,
    pub thresholds: Option<Vec<f64>>,
    pub per_class_count: Option<usize>,
    pub template: Option<String>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Parses a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.lexicon.vader,
            &mut self.lexicon.mpqa,
            &mut self.reviews.path,
            &mut self.backend.cue_table,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out_dir);
        self.analyze_runs.iter_mut().for_each(fix);
    }

    /// Applies flags, then falls back to the environment for the endpoint.
    pub fn apply(&mut self, o: Overrides) {
        if let Some(kind) = o.backend {
            self.backend.kind = kind;
        }
        if let Some(e) = o.endpoint {
            self.backend.endpoint = Some(e);
        }
        if self.backend.endpoint.is_none() {
            self.backend.endpoint = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty());
        }
        if let Some(d) = o.out_dir {
            self.out_dir = d;
        }
        if let Some(ks) = o.ks {
            self.sst_ks = ks;
        }
        if let Some(ms) = o.thresholds {
            self.sat_thresholds = ms;
        }
        if let Some(n) = o.per_class_count {
            self.per_class_count = n;
        }
        if let Some(t) = o.template {
            self.template = t;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.per_class_count < 1 {
            return bad("per_class_count must be at least 1".into());
        }
        if self.sst_ks.is_empty() || self.sst_ks[0] == 0 || self.sst_ks.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sst_ks must be strictly increasing positive integers, got {:?}", self.sst_ks));
        }
        if self.sat_thresholds.is_empty() || self.sat_thresholds.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad(format!("sat_thresholds must be nonnegative, got {:?}", self.sat_thresholds));
        }
        if !(self.q_eps.is_finite() && self.q_eps >= 0.0) {
            return bad(format!("q_eps must be nonnegative, got {}", self.q_eps));
        }
        if !(self.overlap_threshold.is_finite() && self.overlap_threshold >= 0.0) {
            return bad(format!("overlap_threshold must be nonnegative, got {}", self.overlap_threshold));
        }
        for (name, v) in [
            ("workers", self.workers),
            ("chunk_size", self.chunk_size),
            ("top_n", self.top_n),
            ("agreement_k", self.agreement_k),
            ("backend.batch_size", self.backend.batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        self.probe_template()?;
        Ok(())
    }

    pub fn probe_template(&self) -> Result<ProbeTemplate, CliError> {
        ProbeTemplate::parse(&self.template).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sst_ks, [5, 10, 15]);

        let mut cfg: RunConfig = toml::from_str(
            "out_dir = \"o\"\nsst_ks = [5]\n[lexicon]\nvader = \"v.txt\"\n[backend]\nkind = \"remote\"\n",
        )
        .unwrap();
        cfg.resolve_paths(Path::new("/data"));
        assert_eq!(cfg.lexicon.vader.as_deref(), Some(Path::new("/data/v.txt")));
        assert_eq!(cfg.out_dir, Path::new("/data/o"));
        assert_eq!(cfg.backend.kind, BackendKind::Remote);
        assert!(toml::from_str::<RunConfig>("unknown = 1").is_err());
    }

    #[test]
    fn flags_win() {
        let mut cfg = RunConfig { per_class_count: 3, ..Default::default() };
        cfg.apply(Overrides { per_class_count: Some(7), ks: Some(vec![2]), ..Default::default() });
        assert_eq!((cfg.per_class_count, cfg.sst_ks.clone()), (7, vec![2]));
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let cases = [
            RunConfig { sst_ks: vec![5, 5], ..Default::default() },
            RunConfig { sst_ks: vec![0, 5], ..Default::default() },
            RunConfig { sst_ks: vec![10, 5], ..Default::default() },
            RunConfig { sat_thresholds: vec![-0.5], ..Default::default() },
            RunConfig { per_class_count: 0, ..Default::default() },
            RunConfig { template: "no slots".into(), ..Default::default() },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(CliError::Usage(_))), "{cfg:?}");
        }
    }
}
