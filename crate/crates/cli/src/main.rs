use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use boss_core::batch::{run_batch, BatchConfig};
use boss_core::bench::{run_bench, BenchConfig};
use boss_core::data::{build_grid, CutoffGrid, Dataset};
use boss_core::engine::{boss_test, boss_test_pair, Sidedness, TestOptions};
use boss_core::error::BossError;
use boss_core::io::{read_dataset, read_table, Clinical, ExpressionFile, Layout, OutcomeColumns};
use boss_core::mvn::MvnOptions;
use boss_core::permutation::permute_fwer;
use boss_core::regress::{FitConfig, Model, Ties};
use boss_core::simulate::{build_panel, derive_seed, run_experiment, synthetic_source, Effect, ExperimentConfig, Scenario};

mod report;

use report::{Format, Sink};

#[derive(Parser, Debug)]
#[command(name = "boss", version, about = "Optimal biomarker cutoffs with family-wise error control")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for batch, simulate and permute (default: all cores)
    #[arg(long, env = "BOSS_THREADS", global = true)]
    threads: Option<usize>,

    /// Output format
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: Format,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Random seed
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select the optimal cutoff of one biomarker and its FWER
    Test(TestArgs),
    /// Double-positive vs double-negative over cutoff pairs of two biomarkers
    Pair(PairArgs),
    /// Permutation estimate of the FWER
    Permute(PermuteArgs),
    /// One test per expression column, FDR-controlled across biomarkers
    Batch(BatchArgs),
    /// Power / type I error experiment on blueprint-simulated data
    Simulate(SimulateArgs),
    /// Timing of BOSS against the permutation baseline
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Linear,
    Cox,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Linear => Model::Linear,
            ModelArg::Cox => Model::Cox,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SidedArg {
    Two,
    One,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TiesArg {
    Efron,
    Breslow,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EffectArg {
    Strong,
    Weak,
    Null,
}

#[derive(Args, Debug)]
struct ModelOpts {
    /// Outcome column, or TIME,EVENT for survival
    #[arg(long)]
    outcome: String,

    #[arg(long, value_enum)]
    model: ModelArg,

    /// Comma-separated covariate columns
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,

    /// Cox tie handling
    #[arg(long, value_enum, default_value = "efron")]
    ties: TiesArg,
}

impl ModelOpts {
    fn fit_config(&self) -> FitConfig {
        let mut cfg = match self.model {
            ModelArg::Linear => FitConfig::linear(),
            ModelArg::Cox => FitConfig::cox(),
        };
        cfg.ties = match self.ties {
            TiesArg::Efron => Ties::Efron,
            TiesArg::Breslow => Ties::Breslow,
        };
        cfg
    }

    fn outcome_columns(&self) -> Result<OutcomeColumns> {
        let cols = OutcomeColumns::parse(&self.outcome)?;
        match (&cols, self.model) {
            (OutcomeColumns::Quantitative(_), ModelArg::Cox) => {
                Err(BossError::InvalidInput("cox needs --outcome TIME,EVENT".into()).into())
            }
            (OutcomeColumns::Survival { .. }, ModelArg::Linear) => {
                Err(BossError::InvalidInput("linear needs a single --outcome column".into()).into())
            }
            _ => Ok(cols),
        }
    }
}

#[derive(Args, Debug)]
struct GridOpts {
    /// Number of quantile cutoffs
    #[arg(long, default_value_t = 10)]
    k: usize,

    /// Explicit cutoff values; overrides --k
    #[arg(long, value_delimiter = ',')]
    cutoffs: Vec<f64>,

    /// Smallest allowed group (default max(5, covariates + 2))
    #[arg(long)]
    min_group: Option<usize>,
}

impl GridOpts {
    fn grid(&self, biomarker: &[f64], min_group: usize) -> Result<CutoffGrid> {
        Ok(if self.cutoffs.is_empty() {
            build_grid(biomarker, self.k, min_group)?
        } else {
            CutoffGrid::from_values(biomarker, &self.cutoffs, min_group)?
        })
    }
}

#[derive(Args, Debug)]
struct FwerOpts {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    #[arg(long, value_enum, default_value = "two")]
    sided: SidedArg,

    /// Absolute error target of the normal probability
    #[arg(long, default_value_t = boss_core::mvn::DEFAULT_TOL)]
    mvn_tol: f64,
}

impl FwerOpts {
    fn options(&self, seed: u64) -> TestOptions {
        TestOptions {
            alpha: self.alpha,
            sidedness: match self.sided {
                SidedArg::Two => Sidedness::TwoSided,
                SidedArg::One => Sidedness::OneSided,
            },
            seed,
            mvn: MvnOptions {
                tol: self.mvn_tol,
                ..MvnOptions::default()
            },
        }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    /// CSV with a header row; first column is the sample id
    #[arg(long)]
    data: PathBuf,

    #[arg(long)]
    biomarker: String,

    #[command(flatten)]
    model: ModelOpts,

    #[command(flatten)]
    grid: GridOpts,

    #[command(flatten)]
    fwer: FwerOpts,
}

#[derive(Args, Debug)]
struct PairArgs {
    #[arg(long)]
    data: PathBuf,

    #[arg(long)]
    biomarker: String,

    #[arg(long)]
    biomarker2: String,

    #[command(flatten)]
    model: ModelOpts,

    /// Quantile cutoffs for the first biomarker
    #[arg(long, default_value_t = 3)]
    k: usize,

    /// Quantile cutoffs for the second biomarker (default: --k)
    #[arg(long)]
    k2: Option<usize>,

    #[arg(long)]
    min_group: Option<usize>,

    #[command(flatten)]
    fwer: FwerOpts,
}

#[derive(Args, Debug)]
struct PermuteArgs {
    #[arg(long)]
    data: PathBuf,

    #[arg(long)]
    biomarker: String,

    #[command(flatten)]
    model: ModelOpts,

    #[command(flatten)]
    grid: GridOpts,

    #[arg(long, default_value_t = 1000)]
    n_perm: usize,
}

#[derive(Args, Debug)]
struct BatchArgs {
    /// Clinical CSV: sample id, outcome and covariate columns
    #[arg(long)]
    clinical: PathBuf,

    /// Expression CSV, samples as rows unless --transpose
    #[arg(long)]
    expression: PathBuf,

    /// Expression file has genes as rows and samples as columns
    #[arg(long)]
    transpose: bool,

    #[command(flatten)]
    model: ModelOpts,

    #[arg(long, default_value_t = 10)]
    k: usize,

    #[arg(long)]
    min_group: Option<usize>,

    /// FDR level for the significance flag
    #[arg(long, default_value_t = 0.05)]
    fdr: f64,

    /// Genes parsed per pass over the expression file
    #[arg(long, default_value_t = 1024)]
    block: usize,

    #[command(flatten)]
    fwer: FwerOpts,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,

    #[arg(long, default_value_t = 10)]
    k: usize,

    #[arg(long, value_enum, default_value = "strong")]
    effect: EffectArg,

    /// Resampled size relative to the source data
    #[arg(long, default_value_t = 1.0)]
    n_scale: f64,

    #[arg(long, default_value_t = 100)]
    replicates: usize,

    /// Permutations per replicate; 0 runs BOSS only
    #[arg(long, default_value_t = 1000)]
    n_perm: usize,

    /// Blueprint genes per effect class
    #[arg(long, default_value_t = 50)]
    genes: usize,

    /// Synthetic source sample size
    #[arg(long, default_value_t = 500)]
    n: usize,

    /// Synthetic source biomarkers to choose blueprints from
    #[arg(long, default_value_t = 400)]
    pool: usize,

    /// Real clinical data to learn blueprints from (with --expression)
    #[arg(long, requires = "expression")]
    clinical: Option<PathBuf>,

    #[arg(long, requires = "clinical")]
    expression: Option<PathBuf>,

    #[arg(long)]
    transpose: bool,

    /// Outcome column(s) of --clinical
    #[arg(long)]
    outcome: Option<String>,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Write x/y series of per-gene rejection rates as JSON
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![6, 8, 10, 12, 14])]
    ks: Vec<usize>,

    #[arg(long, default_value_t = 500)]
    n: usize,

    /// Datasets per model and k
    #[arg(long, default_value_t = 10)]
    datasets: usize,

    #[arg(long, default_value_t = 1000)]
    n_perm: usize,

    /// Restrict to one model (default: linear and cox pooled)
    #[arg(long, value_enum)]
    model: Option<ModelArg>,

    /// Write x/y series of mean times and ratio as JSON
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

fn load(data: &PathBuf, biomarker: &str, second: Option<&str>, model: &ModelOpts) -> Result<Dataset> {
    let cols = model.outcome_columns()?;
    Ok(read_dataset(data, &cols, biomarker, second, &model.covariates)?)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    let sink = Sink::new(cli.format, cli.output.clone());
    match cli.command {
        Command::Test(a) => {
            let data = load(&a.data, &a.biomarker, None, &a.model)?;
            let min_group = a.grid.min_group.unwrap_or_else(|| data.default_min_group());
            let grid = a.grid.grid(&data.biomarker, min_group)?;
            let result = boss_test(&data, &grid, &a.model.fit_config(), &a.fwer.options(cli.seed))?;
            sink.test(&result)
        }
        Command::Pair(a) => {
            let data = load(&a.data, &a.biomarker, Some(&a.biomarker2), &a.model)?;
            let min_group = a.min_group.unwrap_or_else(|| data.default_min_group());
            let g1 = build_grid(&data.biomarker, a.k, min_group)?;
            let b2 = data.second_biomarker.as_ref().expect("pair dataset");
            let g2 = build_grid(b2, a.k2.unwrap_or(a.k), min_group)?;
            let result = boss_test_pair(&data, &g1, &g2, &a.model.fit_config(), &a.fwer.options(cli.seed), min_group)?;
            sink.pair(&result)
        }
        Command::Permute(a) => {
            let data = load(&a.data, &a.biomarker, None, &a.model)?;
            let min_group = a.grid.min_group.unwrap_or_else(|| data.default_min_group());
            let grid = a.grid.grid(&data.biomarker, min_group)?;
            let result = permute_fwer(&data, &grid, &a.model.fit_config(), a.n_perm, cli.seed)?;
            sink.permute(&result)
        }
        Command::Batch(a) => {
            let cols = a.model.outcome_columns()?;
            let clinical = Clinical::from_table(&read_table(&a.clinical)?, &cols, &a.model.covariates)?;
            let layout = if a.transpose { Layout::GenesAsRows } else { Layout::SamplesAsRows };
            let expression = ExpressionFile::open(&a.expression, layout)?;
            let cfg = BatchConfig {
                fit: a.model.fit_config(),
                k: a.k,
                min_group: a.min_group,
                alpha_fdr: a.fdr,
                test: a.fwer.options(cli.seed),
                block: a.block,
            };
            if !(a.fdr > 0.0 && a.fdr < 1.0) {
                return Err(BossError::InvalidInput("--fdr must lie in (0, 1)".into()).into());
            }
            let report = run_batch(&expression, &clinical, &cfg, cli.seed)?;
            sink.batch(&report)
        }
        Command::Simulate(a) => simulate(a, &sink, cli.seed),
        Command::Bench(a) => {
            let cfg = BenchConfig {
                ks: a.ks,
                n: a.n,
                datasets: a.datasets,
                n_perm: a.n_perm,
                models: match a.model {
                    Some(m) => vec![m.into()],
                    None => vec![Model::Linear, Model::Cox],
                },
                seed: cli.seed,
            };
            let report = run_bench(&cfg)?;
            if let Some(path) = &a.plot_data {
                report::write_plot_data(path, &report.plot_series())?;
            }
            sink.bench(&report)
        }
    }
}

fn simulate(a: SimulateArgs, sink: &Sink, seed: u64) -> Result<()> {
    let model: Model = a.model.into();
    let fit = match model {
        Model::Linear => FitConfig::linear(),
        Model::Cox => FitConfig::cox(),
    };
    let sources = match (&a.clinical, &a.expression) {
        (Some(clinical), Some(expression)) => {
            let outcome = a
                .outcome
                .as_deref()
                .ok_or_else(|| BossError::InvalidInput("--clinical needs --outcome".into()))?;
            let clinical = Clinical::from_table(&read_table(clinical)?, &OutcomeColumns::parse(outcome)?, &[])?;
            let layout = if a.transpose { Layout::GenesAsRows } else { Layout::SamplesAsRows };
            let expr = ExpressionFile::open(expression, layout)?;
            let (pairs, _, _) = boss_core::io::inner_join(&clinical.sample_ids, &expr.sample_ids)?;
            if pairs.is_empty() {
                return Err(BossError::NoJoinableBiomarkers.into());
            }
            let rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let joined = clinical.select(&rows);
            let mut sources = Vec::new();
            expr.for_each_block(1024, |_, values| {
                for v in values {
                    let aligned: Vec<f64> = pairs.iter().map(|p| v[p.1]).collect();
                    if let Ok(d) = joined.dataset(aligned) {
                        sources.push(d);
                    }
                }
                Ok(())
            })?;
            sources
        }
        _ => synthetic_source(model, a.n, a.pool, derive_seed(seed, 0, 11))?,
    };
    let panel = build_panel(&sources, &fit, a.genes, a.alpha, seed)?;
    let scenario = Scenario {
        model,
        k: a.k,
        effect: match a.effect {
            EffectArg::Strong => Effect::Strong,
            EffectArg::Weak => Effect::Weak,
            EffectArg::Null => Effect::Null,
        },
        n_scale: a.n_scale,
    };
    let cfg = ExperimentConfig {
        replicates: a.replicates,
        n_perm: a.n_perm,
        alpha: a.alpha,
        seed,
    };
    let report = run_experiment(&panel, &scenario, &cfg)?;
    if let Some(path) = &a.plot_data {
        report::write_plot_data(path, &report.plot_series())?;
    }
    sink.simulate(&report)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<BossError>() {
        Some(e) if !e.is_input_error() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
