//! The `place` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{
    build_embedding_store, gen_dataset, load_dataset, run_eval, save_dataset, DatasetRecord, DatasetSpec, EvalConfig,
    InstructionTemplates, ObjectVocabulary, Pipeline, Split, EMBEDDINGS_FILE,
};
use crate::adapter::{
    grounding_accuracy, load_weights_expecting, mean_loss, prepare_samples, save_weights, train_prepared,
    AdapterConfig, AdapterPair, TrainConfig, TrainSample,
};
use crate::embeddings::{EmbeddingStore, Encoder, HttpEncoder, StoreEncoder, SyntheticConfig, SyntheticWorld};
use crate::parser::llm::{examples_from_instructions, LlmClient, PromptExample};
use crate::parser::{parse_instruction, Lexicon, ParsedInstruction};
use crate::pipeline::{ground_and_place, LlmParsing, ModelAssets};
use crate::placement::{placement_field, render_field, FieldDump, PlacementField, PlacementParams};
use crate::scene::Scene;
use crate::{Error, Result};

/// Seen-template instructions used as the LLM prompt's examples.
const PROMPT_INSTRUCTIONS: [&str; 3] = [
    "put it to the right part of the table.",
    "put it behind the blue mug.",
    "put it left to the scissors and in front of the hard drive.",
];

/// Settings read from `--config`. Every field is optional.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub placement: PlacementParams,
    pub adapter: AdapterConfig,
    pub synthetic: SyntheticSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub noise_sigma: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        Self { noise_sigma: SyntheticConfig::default().noise_sigma }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "place", version, about = "Ground placement instructions in tabletop scenes and sample placements")]
struct Cli {
    /// Seed for generation, training, synthetic embeddings and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with `train`, `placement`, `adapter` and `synthetic` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    GenDataset {
        #[arg(long)]
        out: PathBuf,
        /// Training records.
        #[arg(long, default_value_t = 2000)]
        train: usize,
        /// Records per test subset.
        #[arg(long, default_value_t = 400)]
        test: usize,
        /// Only these splits (comma separated).
        #[arg(long, value_delimiter = ',')]
        splits: Vec<Split>,
        /// Object vocabulary JSON ({"seen": [...], "unseen": [...]}).
        #[arg(long)]
        objects: Option<PathBuf>,
    },
    /// Precompute an embedding store for a dataset.
    Embed {
        #[arg(long)]
        dataset: PathBuf,
        /// Defaults to `embeddings.jsonl` inside the dataset; `.bin` writes the binary format.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Provider::Synthetic)]
        provider: Provider,
        #[arg(long)]
        objects: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Train the adapters on a dataset's training split.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Where to write the weights.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Share of the training split to use, from its start.
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[command(flatten)]
        encoder: EncoderArgs,
    },
    /// Print the grounded pairs for an instruction.
    Ground {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        instruction: String,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Sample a placement for an instruction and print `x,y`.
    Place {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        instruction: String,
        /// Write the field as a heatmap (.ppm or .svg).
        #[arg(long)]
        render: Option<PathBuf>,
        /// Write the field grid as JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate placement success on a dataset and print the report.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test_seen")]
        split: Split,
        /// Use ground-truth groundings instead of the model.
        #[arg(long)]
        oracle: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Render a placement field: from a JSON dump or by grounding an instruction.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, conflicts_with = "instruction", required_unless_present = "instruction")]
        field: Option<PathBuf>,
        #[arg(long)]
        instruction: Option<String>,
        /// Output image, .ppm or .svg.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Parse an instruction into (reference | relation) tuples.
    Parse {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Fall back to the LLM at $PLACE_LLM_URL when the grammar fails.
        #[arg(long)]
        llm: bool,
        instruction: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Provider {
    Synthetic,
    Http,
}

#[derive(Debug, Args)]
struct EncoderArgs {
    /// Embedding store (.jsonl, or .bin/.emb binary).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Use the HTTP encoder at $PLACE_ENCODER_URL.
    #[arg(long, conflicts_with = "embeddings")]
    http: bool,
    /// Object vocabulary for the synthetic encoder.
    #[arg(long)]
    objects: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Adapter weights; freshly initialized adapters when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Fall back to the LLM at $PLACE_LLM_URL when the grammar fails.
    #[arg(long)]
    llm: bool,
    #[command(flatten)]
    encoder: EncoderArgs,
}

struct Ctx {
    seed: u64,
    cfg: RunConfig,
}

impl Ctx {
    fn synthetic(&self, objects: Option<&Path>) -> Result<SyntheticWorld> {
        let vocab = load_vocab(objects)?;
        let names: Vec<&str> = vocab.all().collect();
        Ok(SyntheticWorld::new(
            &names,
            SyntheticConfig {
                dim: self.cfg.adapter.dim,
                noise_sigma: self.cfg.synthetic.noise_sigma,
                seed: self.seed,
                identity_transform: false,
            },
        ))
    }

    /// Store, HTTP, or synthetic encoder; a dataset's own store is the default when present.
    fn encoder(&self, args: &EncoderArgs, dataset: Option<&Path>) -> Result<Box<dyn Encoder>> {
        let default_store = dataset.map(|d| d.join(EMBEDDINGS_FILE)).filter(|p| p.exists());
        if args.http {
            return Ok(Box::new(HttpEncoder::from_env(self.cfg.adapter.dim)?));
        }
        match args.embeddings.clone().or(default_store) {
            Some(p) => {
                let store = EmbeddingStore::load(&p)?;
                if store.dim().is_some_and(|d| d != self.cfg.adapter.dim) {
                    return Err(Error::Shape(format!(
                        "{} holds {}-dim tokens but the adapters use {}",
                        p.display(),
                        store.dim().unwrap_or(0),
                        self.cfg.adapter.dim
                    )));
                }
                Ok(Box::new(StoreEncoder::new(store)))
            }
            None => Ok(Box::new(self.synthetic(args.objects.as_deref())?)),
        }
    }

    fn weights(&self, path: Option<&Path>) -> Result<AdapterPair> {
        match path {
            Some(p) => load_weights_expecting(p, self.cfg.adapter.dim),
            None => AdapterPair::init(&self.cfg.adapter, self.seed),
        }
    }
}

fn load_vocab(path: Option<&Path>) -> Result<ObjectVocabulary> {
    path.map_or_else(|| Ok(ObjectVocabulary::default()), ObjectVocabulary::load)
}

fn load_lexicon(path: Option<&Path>) -> Result<Lexicon> {
    path.map_or_else(|| Ok(Lexicon::default()), Lexicon::load)
}

fn prompt_examples(lex: &Lexicon) -> Result<Vec<PromptExample>> {
    examples_from_instructions(PROMPT_INSTRUCTIONS, lex)
}

fn print_tuples(out: &mut dyn Write, parsed: &ParsedInstruction) -> Result<()> {
    for t in &parsed.tuples {
        writeln!(out, "({} | {})", t.ref_expr(), t.rel_expr()).map_err(stdout_err)?;
    }
    Ok(())
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Shared setup for commands that run the learned pipeline.
struct Model {
    pair: AdapterPair,
    encoder: Box<dyn Encoder>,
    lexicon: Lexicon,
    llm: Option<(LlmClient, Vec<PromptExample>)>,
}

impl Model {
    fn load(ctx: &Ctx, args: &ModelArgs, dataset: Option<&Path>) -> Result<Self> {
        let lexicon = load_lexicon(args.lexicon.as_deref())?;
        let pair = ctx.weights(args.weights.as_deref())?;
        let encoder = ctx.encoder(&args.encoder, dataset)?;
        let llm = if args.llm {
            Some((LlmClient::from_env()?, prompt_examples(&lexicon)?))
        } else {
            None
        };
        Ok(Self { pair, encoder, lexicon, llm })
    }

    fn assets(&self) -> ModelAssets<'_> {
        ModelAssets {
            pair: &self.pair,
            encoder: self.encoder.as_ref(),
            lexicon: &self.lexicon,
            llm: self.llm.as_ref().map(|(client, examples)| LlmParsing { client, examples }),
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.train.seed);
    let ctx = Ctx { seed, cfg };

    match cli.command {
        Command::GenDataset { out: dir, train, test, splits, objects } => {
            let mut spec = DatasetSpec::scaled(train, test, seed);
            spec.placement = ctx.cfg.placement;
            if !splits.is_empty() {
                spec = spec.only(&splits);
            }
            let vocab = load_vocab(objects.as_deref())?;
            let records = gen_dataset(&spec, &vocab, &InstructionTemplates::default(), &Lexicon::default())?;
            save_dataset(&dir, &records)?;
            writeln!(out, "wrote {} records to {}", records.len(), dir.display()).map_err(stdout_err)?;
        }
        Command::Embed { dataset, out: path, provider, objects, lexicon } => {
            let records = load_dataset(&dataset)?;
            let lex = load_lexicon(lexicon.as_deref())?;
            let encoder: Box<dyn Encoder> = match provider {
                Provider::Synthetic => Box::new(ctx.synthetic(objects.as_deref())?),
                Provider::Http => Box::new(HttpEncoder::from_env(ctx.cfg.adapter.dim)?),
            };
            let store = build_embedding_store(&records, encoder.as_ref(), &lex)?;
            let path = path.unwrap_or_else(|| dataset.join(EMBEDDINGS_FILE));
            store.save(&path)?;
            writeln!(out, "wrote {} embeddings to {}", store.len(), path.display()).map_err(stdout_err)?;
        }
        Command::Train { dataset, out: path, steps, lr, fraction, encoder } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidInput("--fraction must lie in (0, 1]".into()));
            }
            let mut tcfg = ctx.cfg.train;
            tcfg.seed = seed;
            tcfg.steps = steps.unwrap_or(tcfg.steps);
            tcfg.learning_rate = lr.unwrap_or(tcfg.learning_rate);
            let records: Vec<DatasetRecord> =
                load_dataset(&dataset)?.into_iter().filter(|r| r.split == Split::Train).collect();
            let take = ((records.len() as f64 * fraction).ceil() as usize).min(records.len());
            let samples: Vec<TrainSample> = records[..take].iter().map(DatasetRecord::train_sample).collect();
            let enc = ctx.encoder(&encoder, Some(&dataset))?;
            let data = prepare_samples(enc.as_ref(), &samples)?;
            let init = AdapterPair::init(&ctx.cfg.adapter, seed)?;
            let trained = train_prepared(&init, &data, &tcfg)?.pair;
            save_weights(&trained, &path)?;
            writeln!(
                out,
                "trained on {} records for {} steps: loss {:.6}, grounding accuracy {:.4}",
                data.len(),
                tcfg.steps,
                mean_loss(&trained, &data)?,
                grounding_accuracy(&trained, &data)?
            )
            .map_err(stdout_err)?;
        }
        Command::Ground { scene, instruction, model } => {
            let scene = Scene::load(&scene)?;
            let m = Model::load(&ctx, &model, None)?;
            let assets = m.assets();
            let parsed = assets.parse(&instruction)?;
            for (g, t) in assets.ground(&scene, &parsed)?.iter().zip(&parsed.tuples) {
                let name = scene.objects.get(g.object_index).map_or("table", |o| o.name.as_str());
                writeln!(out, "{}\t{}\t{}\t({})", g.object_index, name, g.relation, t.ref_expr()).map_err(stdout_err)?;
            }
        }
        Command::Place { scene, instruction, render, dump, model } => {
            let scene = Scene::load(&scene)?;
            let m = Model::load(&ctx, &model, None)?;
            let p = ground_and_place(&scene, &instruction, &m.assets(), &ctx.cfg.placement, seed)?;
            if let Some(path) = render {
                render_field(&p.field, &scene, &path)?;
            }
            if let Some(path) = dump {
                write_dump(&p.field, &path)?;
            }
            writeln!(out, "{:.6},{:.6}", p.point.x, p.point.y).map_err(stdout_err)?;
        }
        Command::Eval { dataset, split, oracle, out: path, model } => {
            let records: Vec<DatasetRecord> =
                load_dataset(&dataset)?.into_iter().filter(|r| r.split == split).collect();
            let cfg = EvalConfig { seed, placement: ctx.cfg.placement };
            let report = if oracle {
                run_eval(&Pipeline::Oracle, &records, &cfg)
            } else {
                let m = Model::load(&ctx, &model, Some(&dataset))?;
                run_eval(&Pipeline::Model(m.assets()), &records, &cfg)
            };
            let json = report.to_json();
            match path {
                Some(p) => std::fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?,
                None => writeln!(out, "{json}").map_err(stdout_err)?,
            }
        }
        Command::Render { scene, field, instruction, out: path, model } => {
            let scene = Scene::load(&scene)?;
            let f = match (field, instruction) {
                (Some(p), _) => read_dump(&p, &scene)?,
                (None, Some(text)) => {
                    let m = Model::load(&ctx, &model, None)?;
                    let assets = m.assets();
                    let grounded = assets.ground(&scene, &assets.parse(&text)?)?;
                    placement_field(&grounded, &scene, &ctx.cfg.placement)?
                }
                (None, None) => unreachable!("clap requires one of --field and --instruction"),
            };
            render_field(&f, &scene, &path)?;
        }
        Command::Parse { lexicon, llm, instruction } => {
            let lex = load_lexicon(lexicon.as_deref())?;
            let parsed = match parse_instruction(&instruction, &lex) {
                Err(Error::ParseFailure(_)) if llm => {
                    LlmClient::from_env()?.parse(&prompt_examples(&lex)?, &instruction, &lex)?
                }
                other => other?,
            };
            print_tuples(out, &parsed)?;
        }
    }
    Ok(())
}

fn write_dump(f: &PlacementField, path: &Path) -> Result<()> {
    let json = serde_json::to_string(&FieldDump::from(f))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn read_dump(path: &Path, scene: &Scene) -> Result<PlacementField> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let d: FieldDump = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut f = PlacementField::empty(scene.workspace, d.resolution);
    if (f.width_cells, f.height_cells) != (d.width_cells, d.height_cells)
        || d.probs.len() != f.len()
        || d.mask.len() != f.len()
    {
        return Err(Error::Format(format!(
            "{}: a {}x{} grid does not fit this workspace at resolution {}",
            path.display(),
            d.width_cells,
            d.height_cells,
            d.resolution
        )));
    }
    f.probs = d.probs;
    f.mask = d.mask;
    Ok(f)
}

/// Runs the CLI on `args` (program name first), writing normal output to
/// `out` and diagnostics to `err`. Returns the process exit code: 0 on
/// success, 1 on a domain error, 2 on a usage error.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
