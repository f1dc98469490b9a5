//! The `kbfollow` command line: grid and question generation, the
//! throughput benchmark, training, evaluation and one-off follow queries.

pub mod bench;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kbfollow::{decode_topk, encode_relations, encode_set, follow_naive, load_kb_tsv, save_kb_tsv, TypedKb};
use kbfollow_grad::{restore_into, save_checkpoint};
use kbfollow_tasks::models::{ChainModel, FixedHopModel, KbcModel, QaModel, TemplateModel};
use kbfollow_tasks::synth::{gen_cvt, gen_family, gen_movies, split};
use kbfollow_tasks::{
    evaluate, gen_chain_questions, gen_grid, grammar_words, read_jsonl, train, write_jsonl, Example, GridSpec, Vocab,
};

use crate::config::{RunConfig, TaskKind};
use crate::error::{io_err, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "kbfollow", about = "Relation-set following over symbolic KBs", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the grid KB as TSV.
    GenGrid(Common),
    /// Write train and test grid questions as JSON lines.
    GenQuestions(Common),
    /// Time the two-hop probe for every strategy and relation count.
    Bench(Common),
    /// Train a model, logging per-epoch metrics and saving a checkpoint.
    Train(Common),
    /// Evaluate a checkpoint on the test split.
    Eval(Common),
    /// Follow relations from a set of entities and print the top k.
    Follow {
        #[command(flatten)]
        common: Common,
        /// KB in TSV form.
        #[arg(long)]
        kb: PathBuf,
        /// Entities, comma separated, each optionally `name:weight`.
        #[arg(long)]
        x: String,
        /// Relations, comma separated, each optionally `name:weight`.
        #[arg(long)]
        r: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(common.config.as_deref())?.with_overrides(common.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, out: &mut dyn Write, what: &str) -> Result<()> {
    writeln!(out, "wrote {what} to {}", path.display()).map_err(io_err(path))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenGrid(c) => {
            let cfg = load_config(&c)?;
            let kb = gen_grid(&GridSpec {
                n: cfg.grid.n,
                relations: cfg.grid.relations,
            })?;
            save_kb_tsv(&kb, &cfg.grid.out)?;
            write_file(&cfg.grid.out, out, "grid")
        }
        Command::GenQuestions(c) => {
            let cfg = load_config(&c)?;
            let (tr, te) = chain_questions(&cfg)?;
            write_jsonl(&cfg.questions.train_out, &tr)?;
            write_jsonl(&cfg.questions.test_out, &te)?;
            write_file(&cfg.questions.train_out, out, "training questions")?;
            write_file(&cfg.questions.test_out, out, "test questions")
        }
        Command::Bench(c) => {
            let cfg = load_config(&c)?;
            let results = bench::run_bench(&cfg.bench, cfg.seed)?;
            let file = std::fs::File::create(&cfg.bench_out).map_err(io_err(&cfg.bench_out))?;
            bench::write_csv(&results, file)?;
            let path = &cfg.bench_out;
            match bench::crossover(&results) {
                Some(m) => writeln!(out, "reified overtakes late mixing at m = {m}").map_err(io_err(path))?,
                None => writeln!(out, "reified never overtakes late mixing in this sweep").map_err(io_err(path))?,
            }
            write_file(path, out, "benchmark")
        }
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            let (mut model, tr, te) = build_task(&cfg)?;
            let metrics = &cfg.train.metrics;
            let mut lines = Vec::new();
            let mut log_err = None;
            train(model.as_mut(), &tr, Some(&te), &cfg.train.optim, |log| {
                if let Err(e) = writeln!(out, "{}", serde_json::to_string(log).expect("log serializes")) {
                    log_err.get_or_insert(e);
                }
                lines.push(*log);
            })?;
            if let Some(e) = log_err {
                return Err(CliError::Io {
                    path: "<stdout>".into(),
                    source: e,
                });
            }
            write_jsonl(metrics, &lines)?;
            save_checkpoint(model.params(), &cfg.train.checkpoint)?;
            write_file(&cfg.train.checkpoint, out, "checkpoint")
        }
        Command::Eval(c) => {
            let cfg = load_config(&c)?;
            let (mut model, _, te) = build_task(&cfg)?;
            restore_into(model.params_mut(), &cfg.train.checkpoint)?;
            let hits = evaluate(model.as_ref(), &te, 100)?;
            writeln!(out, "{}", serde_json::to_string(&hits).expect("hits serialize")).map_err(io_err(Path::new("<stdout>")))
        }
        Command::Follow { common, kb, x, r, k } => {
            // the config is optional here; read it only to surface errors
            load_config(&common)?;
            let kb = load_kb_tsv(&kb)?;
            for (name, w) in follow_query(&kb, &x, &r, k)? {
                writeln!(out, "{name} {w:?}").map_err(io_err(Path::new("<stdout>")))?;
            }
            Ok(())
        }
    }
}

fn parse_members(spec: &str) -> Result<Vec<(String, f64)>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| match item.rsplit_once(':') {
            Some((name, w)) => w
                .parse::<f64>()
                .map(|w| (name.to_string(), w))
                .map_err(|_| CliError::Invalid(format!("bad weight in `{item}`"))),
            None => Ok((item.to_string(), 1.0)),
        })
        .collect()
}

/// Single-example naive following over typed sets.
pub fn follow_query(kb: &TypedKb, x: &str, r: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let xs = parse_members(x)?;
    let rs = parse_members(r)?;
    let first = xs.first().ok_or_else(|| CliError::Invalid("empty entity set".into()))?;
    let ty = kb.entity(&first.0)?.ty;
    fn as_refs(v: &[(String, f64)]) -> Vec<(&str, f64)> {
        v.iter().map(|(n, w)| (n.as_str(), *w)).collect()
    }
    let xv = encode_set(kb, ty, &as_refs(&xs))?;
    let rv = encode_relations(kb, &as_refs(&rs))?;
    let y = follow_naive(&xv, &rv, kb)?;
    Ok(decode_topk(kb, &y, k.max(1)))
}

fn chain_questions(cfg: &RunConfig) -> Result<(Vec<Example>, Vec<Example>)> {
    let q = &cfg.questions;
    let hops = q.min_hops..=q.max_hops;
    let gen = |count, seed| -> Result<Vec<Example>> {
        Ok(gen_chain_questions(q.n, count, hops.clone(), seed)?
            .iter()
            .map(|c| c.to_example())
            .collect())
    };
    // distinct streams for the two splits
    Ok((gen(q.train, cfg.seed)?, gen(q.test, cfg.seed ^ 0x9e37_79b9_7f4a_7c15)?))
}

type Task = (Box<dyn QaModel>, Vec<Example>, Vec<Example>);

fn held_out(examples: Vec<Example>, cfg: &RunConfig) -> (Vec<Example>, Vec<Example>) {
    let test = (examples.len() as f64 * cfg.train.test_fraction).round() as usize;
    split(examples, test, cfg.seed)
}

/// The model and (train, test) data described by the `train` section.
pub fn build_task(cfg: &RunConfig) -> Result<Task> {
    let t = &cfg.train;
    Ok(match t.task {
        TaskKind::Chain => {
            let kb = match &t.kb {
                Some(p) => load_kb_tsv(p)?,
                None => gen_grid(&GridSpec::new(cfg.questions.n))?,
            };
            let (tr, te) = match (&t.train_data, &t.test_data) {
                (Some(a), Some(b)) => (read_jsonl(a)?, read_jsonl(b)?),
                (None, None) => chain_questions(cfg)?,
                _ => return Err(CliError::Invalid("give both train_data and test_data or neither".into())),
            };
            let model = ChainModel::new(kb, Vocab::new(grammar_words()), &t.chain)?;
            (Box::new(model), tr, te)
        }
        TaskKind::Template => {
            let (kb, examples) = gen_cvt(&t.cvt)?;
            let vocab = Vocab::from_examples(&examples);
            let (tr, te) = held_out(examples, cfg);
            (Box::new(TemplateModel::new(kb, vocab, &t.template)?), tr, te)
        }
        TaskKind::FixedHop => {
            let (kb, examples) = gen_movies(&t.movies)?;
            let examples: Vec<_> = examples.into_iter().filter(|e| e.hops == t.fixed_hop.hops).collect();
            let vocab = Vocab::from_examples(&examples);
            let (tr, te) = held_out(examples, cfg);
            (Box::new(FixedHopModel::new(kb, vocab, &t.fixed_hop)?), tr, te)
        }
        TaskKind::Kbc => {
            let (kb, examples) = gen_family(&t.family)?;
            let queries = Vocab::from_examples(&examples);
            let (tr, te) = held_out(examples, cfg);
            (Box::new(KbcModel::new(kb, queries, &t.kbc)?), tr, te)
        }
    })
}
