use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use epex::commands::{self, SweepParam};
use epex::config::{Preset, RunConfig};
use epex::io::save_json;
use epex::report;
use epex_core::checks::SuiteOptions;
use epex_core::model::RcMode;
use epex_core::train::EpochRecord;

#[derive(Parser)]
#[command(name = "epex", version, about = "Joint entity and relation extraction")]
struct Cli {
    /// JSON run configuration; omitted fields keep preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Args, Default)]
struct ModelArgs {
    /// Replace the config file's preset (values from the file are dropped).
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    encoder_layers: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, value_enum)]
    rc_mode: Option<RcModeArg>,
    #[arg(long)]
    no_lstm_decoder: bool,
    #[arg(long)]
    no_connect_layernorm: bool,
    /// Plain LSTM recurrence in place of the Encoder-LSTM.
    #[arg(long)]
    plain_lstm: bool,
    /// Stop once the training set is extracted perfectly.
    #[arg(long)]
    stop_when_perfect: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RcModeArg {
    Softmax,
    Sigmoid,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the checkpoint and epoch log.
    Train(ModelArgs),
    /// Score a checkpoint on a corpus (strict and relaxed).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Extract triples for every line of an input file.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<out>/predictions.jsonl`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare analytic and numeric gradients for every block.
    Gradcheck {
        /// Check every coordinate instead of a sample.
        #[arg(long)]
        all_coords: bool,
        /// Test hook: corrupt the gradient of this block.
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
    /// Count candidate pairs per extraction scheme.
    Redundancy {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        slots: usize,
    },
    /// k-fold cross validation with a macro-averaged report.
    Kfold {
        #[arg(long)]
        folds: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write a synthetic corpus.
    Synth {
        /// JSON generator spec; omitted fields take defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        sentences: Option<usize>,
        /// Defaults to `<out>/synthetic.jsonl`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train once per value of a hyperparameter and write a CSV.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

impl Cli {
    fn run_config(&self, args: Option<&ModelArgs>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(a) = args {
            if let Some(p) = a.preset {
                cfg.preset = p;
                cfg.model = p.model();
            }
            let m = &mut cfg.model;
            set(&mut m.epochs, a.epochs);
            set(&mut m.learning_rate, a.learning_rate);
            set(&mut m.batch_size, a.batch_size);
            set(&mut m.slots, a.slots);
            set(&mut m.encoder_layers, a.encoder_layers);
            set(&mut m.hidden_dim, a.hidden_dim);
            set(&mut m.max_len, a.max_len);
            if let Some(mode) = a.rc_mode {
                m.rc_mode = match mode {
                    RcModeArg::Softmax => RcMode::SoftmaxMulticlass,
                    RcModeArg::Sigmoid => RcMode::SigmoidMultilabel,
                };
            }
            m.ablation.no_lstm_decoder |= a.no_lstm_decoder;
            m.ablation.no_connect_layernorm |= a.no_connect_layernorm;
            m.ablation.plain_lstm |= a.plain_lstm;
            cfg.stop_when_perfect |= a.stop_when_perfect;
            for (slot, v) in [(&mut cfg.corpus, &a.corpus), (&mut cfg.validation, &a.validation), (&mut cfg.checkpoint, &a.checkpoint)] {
                if v.is_some() {
                    slot.clone_from(v);
                }
            }
        }
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.out_dir, self.out.clone());
        Ok(cfg)
    }

    /// The model section of an explicitly given config file, for checking
    /// against a checkpoint.
    fn expected_model(&self) -> Result<Option<epex_core::model::ModelConfig>> {
        Ok(match &self.config {
            Some(p) => Some(RunConfig::load(p)?.model),
            None => None,
        })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn progress(quiet: bool) -> impl FnMut(&EpochRecord) {
    move |r| {
        if quiet {
            return;
        }
        let f1 = |x: Option<epex_core::train::F1s>| x.map_or("-".to_string(), |f| format!("{:.4}", f.overall));
        eprintln!(
            "epoch {:>4}  loss {:>10.4}  train F1 {}  validation F1 {}",
            r.epoch,
            r.loss_all,
            f1(r.train_f1),
            f1(r.validation_f1)
        );
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Train(args) => {
            let cfg = cli.run_config(Some(args))?;
            let s = commands::cmd_train(&cfg, progress(args.quiet))?;
            println!("best epoch {} of {}", s.best_epoch, s.records.len());
            print!("{}", report::eval_table(&s.train_report));
            println!("checkpoint {}\nlog {}", s.checkpoint.display(), s.log.display());
        }
        Command::Eval { checkpoint, corpus } => {
            let cfg = cli.run_config(None)?;
            let r = commands::cmd_eval(checkpoint, corpus, cli.expected_model()?.as_ref())?;
            save_json(&cfg.out_dir.join("eval.json"), &r)?;
            print!("{}", report::eval_table(&r));
        }
        Command::Predict { checkpoint, input, output } => {
            let cfg = cli.run_config(None)?;
            let output = output.clone().unwrap_or_else(|| cfg.out_dir.join("predictions.jsonl"));
            let lines = commands::cmd_predict(checkpoint, input, &output, cli.expected_model()?.as_ref())?;
            let errors = lines
                .iter()
                .filter(|l| matches!(l, commands::PredictLine::Error { .. }))
                .count();
            println!("{} lines, {errors} errors -> {}", lines.len(), output.display());
        }
        Command::Gradcheck { all_coords, corrupt } => {
            let cfg = cli.run_config(None)?;
            let opts = SuiteOptions {
                seed: cfg.seed,
                max_coords: if *all_coords { None } else { SuiteOptions::default().max_coords },
                corrupt: corrupt.clone(),
            };
            let s = commands::cmd_gradcheck(&opts)?;
            print!("{}", report::gradcheck_table(&s.blocks));
            println!("{:.1}s", s.elapsed.as_secs_f64());
            return Ok(s.passed());
        }
        Command::Redundancy { corpus, slots } => {
            let cfg = cli.run_config(None)?;
            let r = commands::cmd_redundancy(corpus, *slots)?;
            save_json(&cfg.out_dir.join("redundancy.json"), &r)?;
            print!("{}", report::redundancy_table(&r));
        }
        Command::Kfold { folds, model } => {
            let mut cfg = cli.run_config(Some(model))?;
            set(&mut cfg.folds, *folds);
            let mut log = progress(model.quiet);
            let out = commands::cmd_kfold(&cfg, |_, r| log(r))?;
            for f in &out.folds {
                println!("fold {} (seed {}, {} train / {} test)", f.fold, f.seed, f.train.len(), f.test.len());
                print!("{}", report::eval_table(&f.report));
            }
            println!("macro average");
            print!("{}", report::eval_table(&out.macro_report));
        }
        Command::Synth { spec, sentences, output } => {
            let mut cfg = cli.run_config(None)?;
            if let Some(p) = spec {
                let text = epex::io::read_text(p)?;
                cfg.synth = serde_json::from_str(&text).with_context(|| format!("reading {}", p.display()))?;
            }
            set(&mut cfg.synth.sentences, *sentences);
            if let Some(seed) = cli.seed {
                cfg.synth.seed = seed;
            }
            let output = output.clone().unwrap_or_else(|| cfg.out_dir.join("synthetic.jsonl"));
            let corpus = commands::cmd_synth(&cfg.synth, &output)?;
            println!("{} sentences -> {}", corpus.len(), output.display());
        }
        Command::Sweep { param, values, model } => {
            let cfg = cli.run_config(Some(model))?;
            let rows = commands::cmd_sweep(&cfg, *param, values)?;
            for r in &rows {
                println!("{:?}={:<5} overall F1 {:.4} ({})", r.param, r.value, r.overall_f1, r.scored_on);
            }
            println!("{}", Path::new(&cfg.out_dir).join("sweep.csv").display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
