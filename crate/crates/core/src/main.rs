use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commitgate::ingest::{normalize, parse_git_log, utc_z, EventStream, NormalizeOptions, RepoId};
use commitgate::pipeline::{
    read_diagnostics, render_coefficient_table, run_until, Format, PipelineError, RunConfig, Stage,
};
use commitgate::survival::Ties;

#[derive(Parser)]
#[command(name = "commitgate", version, about = "Committer immigration mining and survival models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download API events for one repository into the response cache.
    Fetch {
        #[arg(long)]
        repo: RepoId,
        #[arg(long, default_value = "cache")]
        cache: PathBuf,
        /// Only events at or after this instant (RFC 3339).
        #[arg(long, value_parser = parse_time)]
        since: Option<commitgate::ingest::Timestamp>,
        /// Also write the normalized events here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "COMMITGATE_TOKEN", hide_env_values = true)]
        token: String,
        #[arg(long, default_value = "https://api.github.com")]
        base_url: String,
    },
    /// Convert `git log` output into normalized events.
    ParseLog {
        #[arg(long)]
        repo: RepoId,
        /// File holding the log; stdin when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve identities and write the immigration table.
    Detect(RunArgs),
    /// Detection plus the developer-month panel.
    Panel(RunArgs),
    /// Everything through the Cox model, screening and hazard curve.
    Fit(RunArgs),
    /// Render the coefficient table of a finished run.
    Report {
        /// Run output directory (holding tests.json).
        #[arg(long, conflicts_with = "config")]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "markdown")]
        format: Format,
    },
    /// Every stage plus the rendered report.
    All(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_time)]
    collection_date: Option<commitgate::ingest::Timestamp>,
    #[arg(long)]
    zscore: Option<f64>,
    #[arg(long)]
    vif: Option<f64>,
    #[arg(long)]
    ties: Option<Ties>,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Comma-separated baseline cut points in months.
    #[arg(long, value_delimiter = ',')]
    cuts: Option<Vec<f64>>,
    #[arg(long)]
    corrections: Option<PathBuf>,
    #[arg(long)]
    overrides: Option<PathBuf>,
    /// Comma-separated covariate names.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
}

fn parse_time(s: &str) -> Result<commitgate::ingest::Timestamp, String> {
    utc_z::parse(s).map_err(|e| e.to_string())
}

impl RunArgs {
    // flags given on the command line are relative to the working directory
    fn load(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        let cwd = |p: &PathBuf| std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.clone());
        if let Some(d) = &self.output_dir {
            cfg.output_dir = cwd(d);
        }
        if let Some(t) = self.collection_date {
            cfg.collection_date = t;
        }
        let th = &mut cfg.thresholds;
        th.zscore = self.zscore.unwrap_or(th.zscore);
        th.vif = self.vif.unwrap_or(th.vif);
        th.ties = self.ties.unwrap_or(th.ties);
        th.bandwidth = self.bandwidth.or(th.bandwidth);
        th.cuts = self.cuts.clone().or(th.cuts.take());
        if let Some(p) = &self.corrections {
            cfg.corrections = Some(cwd(p));
        }
        if let Some(p) = &self.overrides {
            cfg.overrides = Some(cwd(p));
        }
        if let Some(c) = &self.covariates {
            cfg.covariates = Some(c.clone());
        }
        Ok(cfg)
    }
}

fn fail(err: &PipelineError) -> ExitCode {
    eprintln!("error: {err}");
    eprintln!("{}", serde_json::to_string(err).unwrap());
    ExitCode::from(err.exit_code() as u8)
}

fn input_error(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, "invalid_input", e.to_string())
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| PipelineError::new(Stage::Ingest, "io", format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_stage(args: &RunArgs, last: Stage) -> ExitCode {
    let bundle = match args.load().and_then(|cfg| run_until(&cfg, last)) {
        Ok(b) => b,
        Err(e) => return fail(&e),
    };
    for (name, hash) in &bundle.manifest.artifacts {
        println!("{}  {}", hash, bundle.output_dir.join(name).display());
    }
    if let Some(d) = &bundle.diagnostics {
        if last == Stage::Report {
            println!("\n{}", render_coefficient_table(&d.fit, Format::Markdown));
        }
        if !d.converged {
            eprintln!("model did not converge: {}", d.diagnostics.join("; "));
        }
    }
    ExitCode::from(bundle.exit_code() as u8)
}

#[cfg(feature = "http")]
fn fetch(repo: &RepoId, cache: &Path, since: Option<commitgate::ingest::Timestamp>, token: &str, base_url: &str) -> Result<EventStream, PipelineError> {
    use commitgate::ingest::{EventKind, FetchConfig, Fetcher, HttpTransport, ResponseCache, SystemClock};
    let transport = HttpTransport::new().map_err(|e| PipelineError::new(Stage::Ingest, "io", e.to_string()))?;
    let config = FetchConfig { base_url: base_url.to_string(), ..FetchConfig::default() };
    let fetcher = Fetcher::new(transport, SystemClock, ResponseCache::new(cache), token, config);
    let kinds = EventKind::ALL.into_iter().collect();
    let events = fetcher.fetch_events(repo, &kinds, since).map_err(|e| input_error(Stage::Ingest, e))?;
    Ok(normalize(Vec::new(), events, &NormalizeOptions::default()))
}

#[cfg(not(feature = "http"))]
fn fetch(_: &RepoId, _: &Path, _: Option<commitgate::ingest::Timestamp>, _: &str, _: &str) -> Result<EventStream, PipelineError> {
    Err(PipelineError::new(Stage::Ingest, "internal", "built without the `http` feature"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fetch { repo, cache, since, out, token, base_url } => fetch(&repo, &cache, since, &token, &base_url)
            .and_then(|s| {
                eprintln!("{} events for {repo} cached under {}", s.len(), cache.display());
                match out {
                    Some(p) => write_out(Some(&p), &s.to_ndjson()),
                    None => Ok(()),
                }
            }),
        Command::ParseLog { repo, log, out } => (|| {
            let text = match &log {
                Some(p) => std::fs::read_to_string(p).map_err(|e| input_error(Stage::Ingest, format!("{}: {e}", p.display())))?,
                None => std::io::read_to_string(std::io::stdin()).map_err(|e| input_error(Stage::Ingest, e))?,
            };
            let commits = parse_git_log(&text, &repo).map_err(|e| input_error(Stage::Ingest, e))?;
            let stream = normalize(commits, Vec::new(), &NormalizeOptions::default());
            write_out(out.as_deref(), &stream.to_ndjson())
        })(),
        Command::Detect(a) => return run_stage(&a, Stage::Lifecycle),
        Command::Panel(a) => return run_stage(&a, Stage::Metrics),
        Command::Fit(a) => return run_stage(&a, Stage::Survival),
        Command::All(a) => return run_stage(&a, Stage::Report),
        Command::Report { output_dir, config, format } => (|| {
            let dir = match (output_dir, config) {
                (Some(d), _) => d,
                (None, Some(c)) => {
                    let cfg = RunConfig::from_file(&c)?;
                    cfg.resolve(&cfg.output_dir)
                }
                (None, None) => PathBuf::from("out"),
            };
            let d = read_diagnostics(&dir)?;
            print!("{}", render_coefficient_table(&d.fit, format));
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
