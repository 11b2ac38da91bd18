use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use seqsel::diversity::{cluster_captions, diversity_score};
use seqsel::lexmodel::{train, Vocabulary, WordModel};
use seqsel::pipeline::{
    associate_video, derive_seed, lexical_bags, load_bundle, map_rank, oracle_search, run_pool, save_bundle,
    save_results, select_video, synth_fixture, training_video, Caption, CategoryScoreTable, OracleSolution,
    RunConfig, SynthKind, SynthSpec, VideoBundle, VideoSelection,
};
use seqsel::selector::learn_weights;
use seqsel::submodular::LexicalMode;
use seqsel::{Error, Result};

#[derive(Parser)]
#[command(name = "seqsel", version, about = "Region-sequence selection for video captioning")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, env = "SEQSEL_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Result file; stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for per-video work.
    #[arg(long, global = true, env = "SEQSEL_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Bundles {
    /// Bundle directories.
    #[arg(required = true)]
    bundles: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate diverse region sequences per video.
    Select(Bundles),
    /// Learn objective weights from captioned videos.
    LearnWeights(Bundles),
    /// Associate captions to sequences (winner takes all).
    Wta {
        #[command(flatten)]
        bundles: Bundles,
        /// Output of `select`; sequences are generated when omitted.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Diversity score of a caption set.
    Diversity {
        /// Bundle directory or captions JSON file.
        captions: PathBuf,
    },
    /// Cluster captions and report representatives.
    Cluster {
        captions: PathBuf,
        #[arg(long)]
        clusters: Option<usize>,
    },
    /// Pick the best sentence under a category prior.
    Rank {
        /// Bundle directory or score-table JSON file.
        scores: PathBuf,
    },
    /// Exhaustive optimum for small videos.
    Oracle(Bundles),
    /// Train the per-word lexical classifiers on captioned bundles.
    TrainLexical(Bundles),
    /// Write synthetic bundles.
    Synth {
        /// Destination directory; bundles go to `<out>/<id>`.
        out: PathBuf,
        #[arg(long, value_enum, default_value = "random")]
        kind: KindArg,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        vocab: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        captions: Option<usize>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum KindArg {
    Random,
    TwoCluster,
    Redundant,
}

impl From<KindArg> for SynthKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Random => SynthKind::Random,
            KindArg::TwoCluster => SynthKind::TwoCluster,
            KindArg::Redundant => SynthKind::Redundant,
        }
    }
}

struct Ctx {
    config: RunConfig,
    workers: Option<usize>,
}

impl Ctx {
    fn bundles(&self, paths: &[PathBuf]) -> Result<Vec<VideoBundle>> {
        run_pool(paths, self.workers, |_, p| load_bundle(p))
    }
}

fn read_captions(path: &Path) -> Result<Vec<String>> {
    let captions: Vec<Caption> = if path.is_dir() {
        load_bundle(path)?
            .captions
            .ok_or_else(|| Error::Precondition(format!("{} has no captions", path.display())))?
    } else {
        serde_json::from_slice(&std::fs::read(path)?)?
    };
    Ok(captions.into_iter().map(|c| c.text).collect())
}

#[derive(Serialize)]
struct DiversityReport {
    captions: usize,
    score: f64,
}

#[derive(Serialize)]
struct ClusterReport {
    clustering: seqsel::diversity::Clustering,
    representatives: Vec<String>,
    diversity_all: f64,
    diversity_representatives: Option<f64>,
}

#[derive(Serialize)]
struct OracleReport {
    id: String,
    solution: OracleSolution,
}

#[derive(Serialize)]
struct LexicalReport {
    vocabulary: Vocabulary,
    model: WordModel,
    trace: Vec<f64>,
}

#[derive(Serialize)]
struct SynthReport {
    bundles: Vec<String>,
}

fn emit<T: Serialize>(output: Option<&Path>, value: &T) -> Result<()> {
    match output {
        Some(path) => save_results(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    let ctx = Ctx {
        config,
        workers: cli.workers,
    };
    let config = &ctx.config;
    let out = cli.output.as_deref();

    match cli.command {
        Command::Select(b) => {
            let bundles = ctx.bundles(&b.bundles)?;
            let results = run_pool(&bundles, ctx.workers, |_, bundle| select_video(bundle, config))?;
            emit(out, &results)
        }
        Command::LearnWeights(b) => {
            let bundles = ctx.bundles(&b.bundles)?;
            let videos = bundles.iter().map(training_video).collect::<Result<Vec<_>>>()?;
            emit(out, &learn_weights(&videos, &config.learn_config())?)
        }
        Command::Wta { bundles, selection } => {
            let bundles = ctx.bundles(&bundles.bundles)?;
            let given: Option<Vec<VideoSelection>> = match selection {
                Some(path) => Some(serde_json::from_slice(&std::fs::read(path)?)?),
                None => None,
            };
            let results = run_pool(&bundles, ctx.workers, |_, bundle| {
                let selection = match &given {
                    Some(all) => all.iter().find(|s| s.id == bundle.id).cloned().ok_or_else(|| {
                        Error::Precondition(format!("selection file has no entry for {}", bundle.id))
                    })?,
                    None => select_video(bundle, config)?,
                };
                associate_video(bundle, &selection.region_sequences(bundle)?, config)
            })?;
            emit(out, &results)
        }
        Command::Diversity { captions } => {
            let captions = read_captions(&captions)?;
            let vocab = Vocabulary::from_captions(&captions)?;
            let score = diversity_score(&captions, &vocab, config.lsa_rank, config.normalization)?;
            emit(
                out,
                &DiversityReport {
                    captions: captions.len(),
                    score,
                },
            )
        }
        Command::Cluster { captions, clusters } => {
            let captions = read_captions(&captions)?;
            let vocab = Vocabulary::from_captions(&captions)?;
            let n = clusters.unwrap_or(config.clusters);
            let clustering = cluster_captions(&captions, &vocab, config.lsa_rank, n, config.seed)?;
            let representatives: Vec<String> = clustering
                .representatives()
                .into_iter()
                .map(|i| captions[i].clone())
                .collect();
            let diversity_all = diversity_score(&captions, &vocab, config.lsa_rank, config.normalization)?;
            let diversity_representatives = if representatives.len() >= 2 {
                Some(diversity_score(&representatives, &vocab, config.lsa_rank, config.normalization)?)
            } else {
                None
            };
            emit(
                out,
                &ClusterReport {
                    clustering,
                    representatives,
                    diversity_all,
                    diversity_representatives,
                },
            )
        }
        Command::Rank { scores } => {
            let table: CategoryScoreTable = if scores.is_dir() {
                load_bundle(&scores)?
                    .scores
                    .ok_or_else(|| Error::Precondition(format!("{} has no score table", scores.display())))?
            } else {
                serde_json::from_slice(&std::fs::read(&scores)?)?
            };
            emit(out, &map_rank(&table)?)
        }
        Command::Oracle(b) => {
            let bundles = ctx.bundles(&b.bundles)?;
            let results = run_pool(&bundles, ctx.workers, |_, bundle| {
                let objective = seqsel::pipeline::objective_for(bundle, config, LexicalMode::Unsupervised)?;
                Ok(OracleReport {
                    id: bundle.id.clone(),
                    solution: oracle_search(&objective, &[])?,
                })
            })?;
            emit(out, &results)
        }
        Command::TrainLexical(b) => {
            let bundles = ctx.bundles(&b.bundles)?;
            let vocabulary = bundles[0].vocabulary()?.clone();
            if let Some(other) = bundles.iter().find(|x| x.vocabulary.as_ref() != Some(&vocabulary)) {
                return Err(Error::Vocabulary(format!(
                    "bundle {} does not share the vocabulary of {}",
                    other.id, bundles[0].id
                )));
            }
            let mut bags = Vec::new();
            for b in &bundles {
                bags.extend(lexical_bags(b)?);
            }
            let dim = bundles[0].featmap.dim();
            let model = WordModel::init(vocabulary.len(), dim, derive_seed(config.seed, 0))?;
            let mut train_config = config.lexical.clone();
            train_config.seed = derive_seed(config.seed, 1);
            let (model, trace) = train(&model, &bags, &train_config)?;
            emit(
                out,
                &LexicalReport {
                    vocabulary,
                    model,
                    trace,
                },
            )
        }
        Command::Synth {
            out: dir,
            kind,
            count,
            frames,
            rows,
            cols,
            vocab,
            dim,
            captions,
        } => {
            let d = SynthSpec::default();
            let spec = SynthSpec {
                kind: kind.into(),
                frames: frames.unwrap_or(d.frames),
                rows: rows.unwrap_or(d.rows),
                cols: cols.unwrap_or(d.cols),
                vocab: vocab.unwrap_or(d.vocab),
                dim: dim.unwrap_or(d.dim),
                captions: captions.unwrap_or(d.captions),
                categories: d.categories,
            };
            let indices: Vec<u64> = (0..count as u64).collect();
            let bundles = run_pool(&indices, ctx.workers, |_, &i| synth_fixture(&spec, derive_seed(config.seed, i)))?;
            let mut ids = Vec::with_capacity(bundles.len());
            for b in &bundles {
                save_bundle(&dir.join(&b.id), b)?;
                ids.push(b.id.clone());
            }
            emit(out, &SynthReport { bundles: ids })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
