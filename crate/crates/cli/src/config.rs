//! The run configuration shared by every subcommand. All keys are optional;
//! omitted keys take the defaults below.

use std::path::{Path, PathBuf};

use kbfollow_tasks::models::{ChainConfig, FixedHopConfig, KbcConfig, TemplateConfig};
use kbfollow_tasks::synth::{CvtSpec, FamilySpec, MovieSpec};
use kbfollow_tasks::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Logical shards for the reified KB (benchmark and models).
    pub shards: usize,
    pub grid: GridSection,
    pub questions: QuestionsSection,
    pub bench: BenchConfig,
    /// Where `bench` writes its CSV.
    pub bench_out: PathBuf,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            shards: 1,
            grid: GridSection::default(),
            questions: QuestionsSection::default(),
            bench: BenchConfig::default(),
            bench_out: "bench.csv".into(),
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    /// Invented relation count (benchmark grid); omit for north/south/east/west.
    pub relations: Option<usize>,
    pub out: PathBuf,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: 10,
            relations: None,
            out: "grid.tsv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestionsSection {
    pub n: usize,
    pub train: usize,
    pub test: usize,
    pub min_hops: usize,
    pub max_hops: usize,
    pub train_out: PathBuf,
    pub test_out: PathBuf,
}

impl Default for QuestionsSection {
    fn default() -> Self {
        QuestionsSection {
            n: 10,
            train: 36_000,
            test: 1_200,
            min_hops: 1,
            max_hops: 10,
            train_out: "train.jsonl".into(),
            test_out: "test.jsonl".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Chain,
    Template,
    FixedHop,
    Kbc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub task: TaskKind,
    /// Grid KB file for the chain task; generated from `questions.n` if absent.
    pub kb: Option<PathBuf>,
    /// Chain-task datasets; generated from `questions` if absent.
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    /// Held-out fraction for the synthetic template, fixed-hop and
    /// completion datasets.
    pub test_fraction: f64,
    pub chain: ChainConfig,
    pub template: TemplateConfig,
    pub fixed_hop: FixedHopConfig,
    pub kbc: KbcConfig,
    pub cvt: CvtSpec,
    pub movies: MovieSpec,
    pub family: FamilySpec,
    pub optim: TrainConfig,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            task: TaskKind::Chain,
            kb: None,
            train_data: None,
            test_data: None,
            test_fraction: 0.2,
            chain: ChainConfig::default(),
            template: TemplateConfig::default(),
            fixed_hop: FixedHopConfig::default(),
            kbc: KbcConfig::default(),
            cvt: CvtSpec::default(),
            movies: MovieSpec::default(),
            family: FamilySpec::default(),
            optim: TrainConfig::default(),
            metrics: "metrics.jsonl".into(),
            checkpoint: "model.ckpt".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies one seed to every generator, model and optimizer, and the
    /// shard count to the benchmark and models.
    pub fn with_overrides(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        let (s, m) = (self.seed, self.shards);
        let t = &mut self.train;
        t.chain.seed = s;
        t.template.seed = s;
        t.fixed_hop.seed = s;
        t.kbc.seed = s;
        t.cvt.seed = s;
        t.movies.seed = s;
        t.family.seed = s;
        t.optim.seed = s;
        t.chain.shards = m;
        t.template.shards = m;
        t.fixed_hop.shards = m;
        t.kbc.shards = m;
        self.bench.shards = m.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.shards == 0 {
            return Err(CliError::Invalid("shards must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.train.test_fraction) {
            return Err(CliError::Invalid("test_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sharts": 2}"#).is_err());
    }

    #[test]
    fn seed_and_shards_propagate() {
        let cfg: RunConfig = serde_json::from_str(r#"{"shards": 3, "train": {"task": "fixed-hop"}}"#).unwrap();
        let cfg = cfg.with_overrides(Some(9));
        assert_eq!(cfg.train.task, TaskKind::FixedHop);
        assert_eq!((cfg.train.kbc.seed, cfg.train.optim.seed, cfg.bench.shards), (9, 9, 3));
    }
}
