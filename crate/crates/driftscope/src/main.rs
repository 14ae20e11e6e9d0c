use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use driftscope::bundle::{self, Bundle, ForecastKey, Stat};
use driftscope::io::{self, PipelineConfig};
use driftscope::{pipeline, service, svg};
use driftscope_core::clustering::render_report;
use driftscope_core::explore::project_trajectory;
use driftscope_core::forecast::{render_keyword_errors, render_reports, ModelKind, TaskSource};
use driftscope_core::synth::{generate_corpus, SynthSpec};

#[derive(Parser)]
#[command(name = "driftscope", version, about = "Word usage drift and meaning shift over time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted shifts and trends.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Ingest a JSONL corpus and train the weekly embedding series.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Compute drift and shift difference series.
    Dynamics {
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Cluster smoothed difference series for one statistic.
    Cluster {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "e")]
        stat: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Cross-validated forecast of the final shift value.
    Forecast {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "shift")]
        task: String,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        #[arg(long, default_value = "lstm")]
        model: String,
        #[arg(long)]
        region: Option<String>,
        /// File with one keyword per line for the relative-error table.
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// 2-D trajectory of a word with its nearest neighbors.
    Explore {
        word: String,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Serve a bundle over HTTP.
    Serve {
        #[arg(long)]
        bundle: PathBuf,
        /// Overridden by DRIFTSCOPE_BIND when that is set.
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Directory of static UI files served at `/`.
        #[arg(long)]
        r#static: Option<PathBuf>,
    },
    /// Run every stage and write a complete bundle.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bundle: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn ingest(corpus: &Path, cfg: &PipelineConfig) -> Result<(Vec<driftscope_core::corpus::Post>, io::IngestStats, std::collections::BTreeSet<String>)> {
    let stemmer = cfg.stemmer.build();
    let (records, malformed) = io::read_records_file(corpus)?;
    if malformed > 0 {
        log::warn!("skipped {malformed} malformed records");
    }
    let stats = io::IngestStats {
        records: records.len(),
        malformed,
        before_origin: 0,
    };
    let posts = io::to_posts(records, stemmer.as_ref());
    let stopwords = cfg.stopwords(stemmer.as_ref())?;
    Ok((posts, stats, stopwords))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { spec, out, truth } => {
            let spec: SynthSpec = match spec {
                Some(p) => toml::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => SynthSpec::default(),
            };
            let (records, gt) = generate_corpus(&spec)?;
            let f = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            io::write_jsonl(BufWriter::new(f), &records)?;
            if let Some(t) = truth {
                bundle::write_json_file(&t, &gt)?;
            }
            log::info!("wrote {} posts to {}", records.len(), out.display());
        }
        Command::Embed { corpus, config, bundle } => {
            let cfg = load_config(config.as_deref())?;
            let (posts, stats, stopwords) = ingest(&corpus, &cfg)?;
            let b = pipeline::embed_stage(posts, stats, &stopwords, &cfg)?;
            b.save(&bundle)?;
            println!("{} weeks, {} words, {} cap hits", b.meta.weeks, b.meta.vocab_size, b.meta.cap_hits);
        }
        Command::Dynamics { bundle } => {
            let mut b = Bundle::load(&bundle)?;
            pipeline::dynamics_stage(&mut b)?;
            b.save(&bundle)?;
            println!("dynamics written for {} words", b.meta.vocab_size);
        }
        Command::Cluster { bundle, stat, config } => {
            let cfg = load_config(config.as_deref())?;
            let Some(stat) = Stat::parse(&stat) else {
                bail!("unknown statistic {stat:?}; expected f, chi or e");
            };
            let b = Bundle::load(&bundle)?;
            let file = pipeline::cluster_stage(&b, stat, &cfg.cluster)?;
            b.save_clusters(&bundle, &file)?;
            print!("{}", render_report(&file.report));
        }
        Command::Forecast {
            bundle,
            task,
            horizon,
            model,
            region,
            keywords,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let task = TaskSource::parse(&task).with_context(|| format!("unknown task {task:?}"))?;
            let model = ModelKind::parse(&model).with_context(|| format!("unknown model {model:?}"))?;
            if !(1..=3).contains(&horizon) {
                bail!("horizon must be 1, 2 or 3");
            }
            let kws: Vec<String> = match keywords {
                Some(p) => fs::read_to_string(&p)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect(),
                None => cfg.forecast.keywords.clone(),
            };
            let b = Bundle::load(&bundle)?;
            let key = ForecastKey { task, horizon, model };
            let report = pipeline::forecast_stage(&b, key, &cfg.forecast, region.as_deref(), &kws)?;
            let dir = match &region {
                Some(r) => bundle::region_dir(&bundle, r),
                None => bundle.clone(),
            };
            bundle::save_forecast(&dir, &report)?;
            print!("{}", render_reports(std::slice::from_ref(&report)));
            if !report.keywords.is_empty() {
                println!();
                print!("{}", render_keyword_errors(&report, |id| b.vocab.word(id).to_string()));
            }
        }
        Command::Explore { word, bundle, k, svg: svg_out } => {
            let b = Bundle::load(&bundle)?;
            let id = b.vocab.lookup(&word)?;
            let tr = project_trajectory(&b.embeddings, id, k)?;
            let json = service::trajectory_json(&b, &word, &tr);
            println!("{}", serde_json::to_string_pretty(&json)?);
            if let Some(p) = svg_out {
                fs::write(&p, svg::render(&tr, &word, |i| b.vocab.word(i).to_string()))?;
            }
        }
        Command::Serve { bundle, bind, r#static } => {
            let bind = std::env::var("DRIFTSCOPE_BIND").ok().filter(|s| !s.is_empty()).unwrap_or(bind);
            let b = Bundle::load(&bundle).context("bundle failed validation")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(Arc::new(b), &bind, r#static))?;
        }
        Command::Pipeline { corpus, config, bundle } => {
            let cfg = load_config(config.as_deref())?;
            let (posts, stats, stopwords) = ingest(&corpus, &cfg)?;
            let b = pipeline::run_pipeline(posts, stats, &stopwords, &cfg)?;
            b.save(&bundle)?;
            let reports: Vec<_> = b.forecasts.values().cloned().collect();
            print!("{}", render_reports(&reports));
        }
    }
    Ok(())
}
