//! End-to-end runs from a JSON configuration: ingest, identity, lifecycle,
//! metrics and survival, with artifacts, a manifest, and quarantine on
//! failure.

mod report;

pub use report::{
    format_p, format_test, read_coefficient_csv, read_hazard_csv, render_coefficient_table, signif4, stars,
    write_hazard_csv, CoefficientRow, Format,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::identity::{parse_suffix_list, read_overrides, resolve_identities, Denylists, IdentityMap, ResolveOptions};
use crate::ingest::{
    parse_git_log, utc_z, BotPolicy, EventKind, EventStream, FetchConfig, Fetcher, IngestError, NormalizeOptions,
    OfflineTransport, RepoId, ResponseCache, SystemClock, Timestamp,
};
use crate::lifecycle::{
    committer_proportion, detect_immigrations, immigration_rate, read_corrections, write_immigrations_csv,
    CandidatePool, ImmigrationEvent, LifecycleConfig,
};
use crate::metrics::{
    build_panel, sparse_covariates, write_panel_csv, ActivityIndex, Covariate, LabelConfig, LexiconScorer,
    MetricsConfig, PanelRow,
};
use crate::survival::{
    default_cuts, fit_cox_tvc, fit_piecewise_exponential, model_tests, smoothed_hazard, vif_screen, zscore_filter,
    CoxFit, CoxOptions, HazardOptions, ModelTests, PweFit, SurvivalData, SurvivalError, Ties, VifReport,
    ZscoreReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Identity,
    Lifecycle,
    Metrics,
    Survival,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Identity => "identity",
            Stage::Lifecycle => "lifecycle",
            Stage::Metrics => "metrics",
            Stage::Survival => "survival",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{stage} stage failed [{code}]: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    /// Short machine-readable tag such as `unknown_repo` or `threshold`.
    pub code: String,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, code: &str, message: impl Into<String>) -> Self {
        Self { stage, code: code.into(), message: message.into() }
    }

    /// 1 for internal errors, 2 for configuration or input problems.
    pub fn exit_code(&self) -> i32 {
        match self.code.as_str() {
            "internal" | "io" => 1,
            "nonconvergence" => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Focal,
    Sibling,
}

/// One repository and where its data comes from. Paths are relative to the
/// configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoSpec {
    pub repo: RepoId,
    pub role: Role,
    /// Output of `git log` in the parser's record format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub git_log: Option<PathBuf>,
    /// Normalized events, one JSON object per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
    /// Response cache populated by `fetch`; read offline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub zscore: f64,
    pub vif: f64,
    pub ties: Ties,
    /// Hazard smoothing bandwidth in months; rule of thumb when absent.
    pub bandwidth: Option<f64>,
    pub grid_step: f64,
    /// Baseline cut points in months; event-time deciles when absent.
    pub cuts: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            zscore: 3.0,
            vif: 5.0,
            ties: Ties::Efron,
            bandwidth: None,
            grid_step: 0.25,
            cuts: None,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSets {
    /// Inline sets; `file` takes precedence when both are given.
    pub newcomer: Option<Vec<String>>,
    pub feature: Option<Vec<String>>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenylistPaths {
    pub public: Option<PathBuf>,
    pub academic: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub repos: Vec<RepoSpec>,
    #[serde(with = "utc_z")]
    pub collection_date: Timestamp,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub labels: LabelSets,
    #[serde(default)]
    pub denylists: DenylistPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrections: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<PathBuf>,
    /// Extra bot account names or logins.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bots: Vec<String>,
    /// Model covariates by name; every panel column when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Vec<String>>,
    pub output_dir: PathBuf,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| PipelineError::new(Stage::Config, "invalid_config", e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::new(Stage::Config, "invalid_config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn focal(&self) -> Option<&RepoSpec> {
        self.repos.iter().find(|r| r.role == Role::Focal)
    }

    /// Structural checks that need no input files.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let focal = self.repos.iter().filter(|r| r.role == Role::Focal).count();
        if focal != 1 {
            return Err(PipelineError::new(
                Stage::Config,
                "invalid_config",
                format!("exactly one focal repository is required, found {focal}"),
            ));
        }
        let mut seen = BTreeSet::new();
        for r in &self.repos {
            if !seen.insert(&r.repo) {
                return Err(PipelineError::new(Stage::Config, "invalid_config", format!("{} listed twice", r.repo)));
            }
        }
        if let Some(names) = &self.covariates {
            for n in names {
                n.parse::<Covariate>()
                    .map_err(|_| PipelineError::new(Stage::Config, "invalid_config", format!("unknown covariate {n:?}")))?;
            }
        }
        Ok(())
    }

    /// Canonical JSON (declared field order) used for the manifest hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub developers: usize,
    pub candidates: usize,
    pub immigrants: usize,
    pub founding_committers: usize,
    pub excluded: usize,
    pub committer_proportion: Option<f64>,
    pub immigration_rate: Option<f64>,
    pub panel_rows: usize,
}

/// Contents of `tests.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub tests: Option<ModelTests>,
    pub diagnostics: Vec<String>,
    pub dropped: Vec<DroppedCovariate>,
    pub vif: BTreeMap<String, f64>,
    pub fit: CoxFit,
    pub piecewise: Result<PweFit, String>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCovariate {
    pub covariate: String,
    pub rule: String,
    pub detail: String,
}

/// Contents of `screening.json`: why each covariate left the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningTrace {
    pub requested: Vec<String>,
    pub sparse: Vec<DroppedCovariate>,
    pub zscore: ZscoreReport,
    pub vif: Option<VifReport>,
    pub modelled: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    /// Hash of every input file the run read.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    /// Present when the run reached the survival stage.
    pub diagnostics: Option<Diagnostics>,
    pub warnings: Vec<String>,
}

impl ReportBundle {
    pub fn converged(&self) -> bool {
        self.diagnostics.as_ref().is_none_or(|d| d.converged)
    }

    /// Process exit status: 0, or 3 when the model did not converge.
    pub fn exit_code(&self) -> i32 {
        if self.converged() {
            0
        } else {
            3
        }
    }
}

pub const IMMIGRATIONS: &str = "immigrations.csv";
pub const PANEL: &str = "panel.csv";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const TESTS: &str = "tests.json";
pub const HAZARD: &str = "hazard.csv";
pub const SCREENING: &str = "screening.json";
pub const REPORT: &str = "report.md";
pub const MANIFEST: &str = "manifest.json";
pub const QUARANTINE: &str = "quarantine";
const LOCKFILE: &str = ".commitgate.lock";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(LOCKFILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::new(
                Stage::Config,
                "locked",
                format!("{} exists; another run is using this output directory", path.display()),
            )),
            Err(e) => Err(io_err(Stage::Config, &path, e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn io_err(stage: Stage, path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::new(stage, "io", format!("{}: {e}", path.display()))
}

/// Artifacts accumulate in a staging directory and only move into the
/// output directory once every requested stage succeeded.
struct Staging {
    dir: PathBuf,
    written: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
}

impl Staging {
    fn write(&mut self, stage: Stage, name: &str, contents: &str) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err(stage, &path, e))?;
        self.written.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    stage: Stage,
    staging: &'a mut Staging,
}

impl Ctx<'_> {
    fn read(&mut self, p: &Path) -> Result<String, PipelineError> {
        let path = self.cfg.resolve(p);
        let text = fs::read_to_string(&path)
            .map_err(|e| PipelineError::new(self.stage, "missing_input", format!("{}: {e}", path.display())))?;
        self.staging.inputs.insert(p.display().to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    fn fail(&self, code: &str, message: impl Into<String>) -> PipelineError {
        PipelineError::new(self.stage, code, message)
    }
}

/// Runs every stage and writes all artifacts.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ReportBundle, PipelineError> {
    run_until(cfg, Stage::Report)
}

/// Runs the stages up to and including `last`. `Lifecycle` writes the
/// immigration table, `Metrics` adds the panel, `Survival` adds the model
/// outputs, and `Report` adds the rendered table.
pub fn run_until(cfg: &RunConfig, last: Stage) -> Result<ReportBundle, PipelineError> {
    cfg.validate()?;
    let out = cfg.resolve(&cfg.output_dir);
    fs::create_dir_all(&out).map_err(|e| io_err(Stage::Config, &out, e))?;
    let _lock = Lock::acquire(&out)?;
    let staging_dir = out.join(".staging");
    let _ = fs::remove_dir_all(&staging_dir);
    fs::create_dir_all(&staging_dir).map_err(|e| io_err(Stage::Config, &staging_dir, e))?;
    let mut staging = Staging { dir: staging_dir.clone(), written: BTreeMap::new(), inputs: BTreeMap::new() };

    let result = run_stages(cfg, last, &mut staging);
    let quarantine = out.join(QUARANTINE);
    match result {
        Ok((diagnostics, warnings)) => {
            let manifest = Manifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config_sha256: sha256_hex(cfg.canonical_json().as_bytes()),
                inputs: staging.inputs.clone(),
                artifacts: staging.written.clone(),
            };
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
            staging.write(Stage::Report, MANIFEST, &json)?;
            for name in staging.written.keys() {
                let (from, to) = (staging_dir.join(name), out.join(name));
                fs::rename(&from, &to).map_err(|e| io_err(Stage::Report, &to, e))?;
            }
            let _ = fs::remove_dir_all(&staging_dir);
            let _ = fs::remove_dir_all(&quarantine);
            Ok(ReportBundle { output_dir: out, manifest, diagnostics, warnings })
        }
        Err(err) => {
            let _ = fs::remove_dir_all(&quarantine);
            let body = serde_json::to_string_pretty(&err).expect("error serializes") + "\n";
            let _ = fs::write(staging_dir.join("error.json"), body);
            let _ = fs::rename(&staging_dir, &quarantine);
            Err(err)
        }
    }
}

type StageOutput = (Option<Diagnostics>, Vec<String>);

fn run_stages(cfg: &RunConfig, last: Stage, staging: &mut Staging) -> Result<StageOutput, PipelineError> {
    let mut ctx = Ctx { cfg, stage: Stage::Ingest, staging };
    let mut warnings = Vec::new();

    // ingest
    let bots = BotPolicy::with_accounts(cfg.bots.iter().cloned());
    let mut focal = None;
    let mut siblings = Vec::new();
    for spec in &cfg.repos {
        let stream = ingest_repo(&mut ctx, spec, &bots)?;
        log::info!("{}: {} events", spec.repo, stream.len());
        match spec.role {
            Role::Focal => focal = Some(stream),
            Role::Sibling => siblings.push(stream),
        }
    }
    let focal = focal.expect("validated");
    if let Some(t) = focal.last_time().filter(|t| *t > cfg.collection_date) {
        let w = format!(
            "collection date {} precedes the last event at {}; later events are ignored",
            utc_z::format(&cfg.collection_date),
            utc_z::format(&t)
        );
        log::warn!("{w}");
        warnings.push(w);
    }
    let sibling_stream = (!siblings.is_empty()).then(|| EventStream::merge(siblings));

    // identity
    ctx.stage = Stage::Identity;
    let mut denylists = Denylists::default();
    if let Some(p) = &cfg.denylists.public {
        denylists.public = parse_suffix_list(&ctx.read(p)?);
    }
    if let Some(p) = &cfg.denylists.academic {
        denylists.academic = parse_suffix_list(&ctx.read(p)?);
    }
    let everything = match &sibling_stream {
        Some(s) => EventStream::merge([focal.clone(), s.clone()]),
        None => focal.clone(),
    };
    let mut ids = resolve_identities(&everything, &ResolveOptions { denylists: denylists.clone(), bots });
    if let Some(p) = &cfg.overrides {
        let text = ctx.read(p)?;
        let overrides = read_overrides(&text).map_err(|e| ctx.fail("invalid_input", e.to_string()))?;
        ids.apply_overrides(&overrides, &denylists);
    }

    // lifecycle
    ctx.stage = Stage::Lifecycle;
    let corrections = match &cfg.corrections {
        Some(p) => {
            let text = ctx.read(p)?;
            read_corrections(&text).map_err(|e| ctx.fail("invalid_input", e.to_string()))?
        }
        None => Vec::new(),
    };
    let (immigrations, pool) =
        detect_immigrations(&focal, &ids, &corrections, cfg.collection_date, &LifecycleConfig::default())
            .map_err(|e| ctx.fail("invalid_input", e.to_string()))?;
    log::info!("{} candidates, {} immigrants", pool.candidates.len(), pool.immigrants.len());
    ctx.staging.write(Stage::Lifecycle, IMMIGRATIONS, &write_immigrations_csv(&immigrations))?;
    if last <= Stage::Lifecycle {
        return Ok((None, warnings));
    }

    // metrics
    ctx.stage = Stage::Metrics;
    let labels = load_labels(&mut ctx)?;
    let mcfg = MetricsConfig { labels, denylists };
    let index = ActivityIndex::build(&focal, sibling_stream.as_ref(), &ids, &mcfg, &LexiconScorer::default());
    let panel = build_panel(&index, &pool, &immigrations, cfg.collection_date)
        .map_err(|e| ctx.fail("invalid_input", e.to_string()))?;
    log::info!("panel has {} rows", panel.len());
    ctx.staging.write(Stage::Metrics, PANEL, &write_panel_csv(&panel))?;
    if last <= Stage::Metrics {
        return Ok((None, warnings));
    }

    // survival
    ctx.stage = Stage::Survival;
    let summary = summarize(&focal, &ids, &pool, &immigrations, panel.len());
    let diagnostics = survival_stage(&mut ctx, &panel, summary, &mut warnings)?;
    if last >= Stage::Report {
        ctx.stage = Stage::Report;
        ctx.staging.write(Stage::Report, REPORT, &render_coefficient_table(&diagnostics.fit, Format::Markdown))?;
    }
    Ok((Some(diagnostics), warnings))
}

fn ingest_repo(ctx: &mut Ctx, spec: &RepoSpec, bots: &BotPolicy) -> Result<EventStream, PipelineError> {
    if spec.git_log.is_none() && spec.events.is_none() && spec.cache.is_none() {
        return Err(ctx.fail("unknown_repo", format!("{} has no git_log, events or cache source", spec.repo)));
    }
    let mut commits = Vec::new();
    let mut events = Vec::new();
    if let Some(p) = &spec.git_log {
        let text = ctx.read(p)?;
        commits = parse_git_log(&text, &spec.repo).map_err(|e| ctx.fail("invalid_input", e.to_string()))?;
    }
    if let Some(p) = &spec.events {
        let text = ctx.read(p)?;
        let stream = EventStream::from_ndjson(&text).map_err(|e| ctx.fail("invalid_input", e.to_string()))?;
        events.extend(stream.into_events().into_iter().filter(|e| e.repo == spec.repo));
    }
    if let Some(p) = &spec.cache {
        let root = ctx.cfg.resolve(p);
        let fetcher =
            Fetcher::new(OfflineTransport, SystemClock, ResponseCache::new(&root), "", FetchConfig::default());
        let kinds: BTreeSet<EventKind> = EventKind::ALL.into_iter().collect();
        let fetched = fetcher.fetch_events(&spec.repo, &kinds, None).map_err(|e| match e {
            IngestError::CacheMiss(url) => {
                ctx.fail("unknown_repo", format!("{} is not in the cache at {} ({url})", spec.repo, root.display()))
            }
            other => ctx.fail("invalid_input", other.to_string()),
        })?;
        hash_tree(&root, &spec.repo, &mut ctx.staging.inputs).map_err(|e| io_err(Stage::Ingest, &root, e))?;
        events.extend(fetched);
    }
    let opts = NormalizeOptions { window: Some((Timestamp::MIN_UTC, ctx.cfg.collection_date)), bots: bots.clone() };
    let stream = crate::ingest::normalize(commits, events, &opts);
    if stream.is_empty() {
        return Err(ctx.fail("unknown_repo", format!("no activity found for {}", spec.repo)));
    }
    Ok(stream)
}

/// Hashes every cached file of one repository, in path order.
fn hash_tree(root: &Path, repo: &RepoId, into: &mut BTreeMap<String, String>) -> std::io::Result<()> {
    let mut stack = vec![root.to_path_buf()];
    let mut files = Vec::new();
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in &files {
        h.update(f.strip_prefix(root).unwrap_or(f).to_string_lossy().as_bytes());
        h.update(fs::read(f)?);
    }
    into.insert(format!("cache:{repo}"), hex::encode(h.finalize()));
    Ok(())
}

fn load_labels(ctx: &mut Ctx) -> Result<LabelConfig, PipelineError> {
    let sets = &ctx.cfg.labels;
    if let Some(p) = &sets.file {
        let p = p.clone();
        let text = ctx.read(&p)?;
        return LabelConfig::parse(&text).map_err(|e| ctx.fail("invalid_input", e.to_string()));
    }
    let defaults = LabelConfig::default();
    Ok(LabelConfig {
        newcomer: sets.newcomer.as_ref().map_or(defaults.newcomer, |v| v.iter().map(|s| s.to_lowercase()).collect()),
        feature: sets.feature.as_ref().map_or(defaults.feature, |v| v.iter().map(|s| s.to_lowercase()).collect()),
    })
}

fn summarize(
    focal: &EventStream,
    ids: &IdentityMap,
    pool: &CandidatePool,
    immigrations: &[ImmigrationEvent],
    panel_rows: usize,
) -> Summary {
    Summary {
        developers: ids.devs().filter(|d| !ids.is_bot(&d.id)).count(),
        candidates: pool.candidates.len(),
        immigrants: immigrations.iter().filter(|i| !i.censored()).count(),
        founding_committers: pool.founding_committers.len(),
        excluded: pool.exclusions.len(),
        committer_proportion: committer_proportion(focal, ids).ok(),
        immigration_rate: immigration_rate(pool).ok(),
        panel_rows,
    }
}

fn survival_err(ctx: &Ctx, e: SurvivalError) -> PipelineError {
    let code = match e {
        SurvivalError::Threshold(_) => "threshold",
        SurvivalError::Singular { .. } | SurvivalError::CollinearDesign(_) => "singular",
        SurvivalError::NoEvents | SurvivalError::Empty => "no_events",
        SurvivalError::BadCuts(_) | SurvivalError::ZeroExposure { .. } => "bad_cuts",
        SurvivalError::NotConverged => "nonconvergence",
        _ => "invalid_input",
    };
    ctx.fail(code, e.to_string())
}

fn survival_stage(
    ctx: &mut Ctx,
    panel: &[PanelRow],
    summary: Summary,
    warnings: &mut Vec<String>,
) -> Result<Diagnostics, PipelineError> {
    let th = &ctx.cfg.thresholds;
    if !(th.vif > 1.0) {
        return Err(ctx.fail("threshold", format!("VIF threshold must exceed 1, got {}", th.vif)));
    }
    if panel.is_empty() {
        return Err(ctx.fail("no_events", "the panel is empty; no candidates were found"));
    }
    let requested: Vec<Covariate> = match &ctx.cfg.covariates {
        Some(names) => names.iter().map(|n| n.parse().expect("validated")).collect(),
        None => Covariate::ALL.to_vec(),
    };
    let sparse: Vec<DroppedCovariate> = sparse_covariates(panel)
        .into_iter()
        .filter(|(c, _)| requested.contains(c))
        .map(|(c, why)| DroppedCovariate {
            covariate: c.name().into(),
            rule: if why.starts_with("absent") { "absent".into() } else { "sparse".into() },
            detail: why,
        })
        .collect();
    let kept: Vec<Covariate> =
        requested.iter().copied().filter(|c| !sparse.iter().any(|d| d.covariate == c.name())).collect();
    if kept.is_empty() {
        return Err(ctx.fail("no_covariates", "every requested covariate was dropped as sparse or absent"));
    }
    let data = SurvivalData::from_panel(panel, &kept).map_err(|e| survival_err(ctx, e))?;
    let (data, zreport) = zscore_filter(&data, th.zscore).map_err(|e| survival_err(ctx, e))?;
    let (data, vreport) = if data.n_covariates() >= 2 {
        let (d, r) = vif_screen(&data, th.vif).map_err(|e| survival_err(ctx, e))?;
        (d, Some(r))
    } else {
        (data, None)
    };
    let mut dropped = sparse.clone();
    if let Some(r) = &vreport {
        dropped.extend(r.dropped.iter().map(|(name, v)| DroppedCovariate {
            covariate: name.clone(),
            rule: "vif".into(),
            detail: format!("VIF {v:.3} above {}", r.threshold),
        }));
    }
    let trace = ScreeningTrace {
        requested: requested.iter().map(|c| c.name().to_string()).collect(),
        sparse,
        zscore: zreport,
        vif: vreport.clone(),
        modelled: data.names().to_vec(),
    };
    ctx.staging.write(Stage::Survival, SCREENING, &(serde_json::to_string_pretty(&trace).unwrap() + "\n"))?;

    let opts = CoxOptions { ties: th.ties, tol: th.tol, max_iter: th.max_iter, baseline_cuts: th.cuts.clone() };
    let fit = fit_cox_tvc(&data, &opts).map_err(|e| survival_err(ctx, e))?;
    for d in &fit.diagnostics {
        log::warn!("{d}");
    }
    let tests = model_tests(&fit).ok();
    let cuts = th.cuts.clone().unwrap_or_else(|| default_cuts(&data, 10));
    let piecewise = fit_piecewise_exponential(&data, &cuts, th.tol, th.max_iter).map_err(|e| e.to_string());
    if let Err(e) = &piecewise {
        let w = format!("piecewise-exponential fit failed: {e}");
        log::warn!("{w}");
        warnings.push(w);
    }
    let curve = smoothed_hazard(&data, &HazardOptions { bandwidth: th.bandwidth, grid_step: th.grid_step });

    ctx.staging.write(Stage::Survival, COEFFICIENTS, &render_coefficient_table(&fit, Format::Csv))?;
    ctx.staging.write(Stage::Survival, HAZARD, &write_hazard_csv(&curve))?;
    let diagnostics = Diagnostics {
        converged: fit.converged,
        tests,
        diagnostics: fit.diagnostics.clone(),
        dropped,
        vif: vreport.map(|r| r.vif).unwrap_or_default(),
        fit,
        piecewise,
        summary,
        warnings: warnings.clone(),
    };
    ctx.staging.write(Stage::Survival, TESTS, &(serde_json::to_string_pretty(&diagnostics).unwrap() + "\n"))?;
    Ok(diagnostics)
}

/// Reads `tests.json` from a finished run.
pub fn read_diagnostics(output_dir: &Path) -> Result<Diagnostics, PipelineError> {
    let path = output_dir.join(TESTS);
    let text = fs::read_to_string(&path).map_err(|e| PipelineError::new(Stage::Report, "missing_input", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::new(Stage::Report, "invalid_input", format!("{}: {e}", path.display())))
}
