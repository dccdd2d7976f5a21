//! `hsic-select` command-line tool.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hsic_select::bench::{run_benchmark, write_table, BenchMethod, BenchmarkConfig};
use hsic_select::data::{load_csv, save_csv, zscore_normalize, Dataset, LabelKind, SynthKind};
use hsic_select::estimator::{
    asymptotic_p_value, hsic_unbiased, hsic_unbiased_with_variance, permutation_test,
};
use hsic_select::kernels::{build_label_kernel, DiagonalConvention, LabelKernelSpec};
use hsic_select::selection::{
    data_kernel_matrix, select, DataKernel, FeatureRanking, RoundRecord, SelectionConfig,
    SelectionMethod,
};

/// Version of the JSON documents written by `select` and `bench`.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "hsic-select", version, about = "HSIC dependence tests and feature selection")]
struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Unbiased HSIC between all features and the labels, with a p-value.
    Hsic(HsicArgs),
    /// Rank features by backward elimination or forward selection.
    Select(SelectArgs),
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Median rank of the relevant features over sizes and runs.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "y")]
    label_col: String,
    /// Override label-type inference.
    #[arg(long, value_enum)]
    label_kind: Option<KindArg>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// Data kernel.
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    kernel: KernelArg,
    /// Fixed Gaussian parameter in exp(-sigma * ||x - x'||^2); default
    /// 1 / (2 * dimension).
    #[arg(long)]
    sigma: Option<f64>,
    /// Skip z-scoring of the features.
    #[arg(long)]
    no_normalize: bool,
}

impl KernelArgs {
    fn data_kernel(&self) -> anyhow::Result<DataKernel> {
        match (self.kernel, self.sigma) {
            (KernelArg::Linear, Some(_)) => bail!("--sigma applies only to the gaussian kernel"),
            (KernelArg::Linear, None) => Ok(DataKernel::Linear),
            (KernelArg::Gaussian, Some(s)) => Ok(DataKernel::GaussianFixed(s)),
            (KernelArg::Gaussian, None) => Ok(DataKernel::GaussianAdaptive),
        }
    }
}

#[derive(Args, Debug)]
struct HsicArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Significance test.
    #[arg(long, value_enum, default_value_t = TestArg::Permutation)]
    test: TestArg,
    /// Number of permutations.
    #[arg(long, default_value_t = 999)]
    perms: usize,
    #[arg(long, env = "HSIC_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Bahsic)]
    method: MethodArg,
    /// Number of features to keep; default lists every feature.
    #[arg(long)]
    num_features: Option<usize>,
    /// Fraction of the candidates moved per round.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, env = "HSIC_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the ranking as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    #[arg(long)]
    samples: usize,
    #[arg(long, env = "HSIC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "40,80,120,160,200,240,280,320,360,400")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Comma-separated subset of bahsic, fohsic, pearson, mi.
    #[arg(long, value_delimiter = ',', default_value = "bahsic,fohsic,pearson,mi")]
    methods: Vec<BenchMethod>,
    #[arg(long, env = "HSIC_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the median-rank table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Binary,
    Multiclass,
    Real,
}

impl From<KindArg> for LabelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Binary => LabelKind::Binary,
            KindArg::Multiclass => LabelKind::Multiclass,
            KindArg::Real => LabelKind::Real,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KernelArg {
    Gaussian,
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum TestArg {
    Permutation,
    Asymptotic,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Bahsic,
    Fohsic,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DatasetArg {
    Xor,
    Multiclass,
    Regression,
}

impl From<DatasetArg> for SynthKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Xor => SynthKind::Xor,
            DatasetArg::Multiclass => SynthKind::Multiclass,
            DatasetArg::Regression => SynthKind::Regression,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Hsic(a) => cmd_hsic(a),
        Command::Select(a) => cmd_select(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<hsic_select::Error>() {
        Some(inner) if inner.is_shape_error() => 3,
        _ => 2,
    }
}

fn load(input: &InputArgs) -> anyhow::Result<Dataset> {
    load_csv(&input.data, &input.label_col, input.label_kind.map(Into::into))
        .with_context(|| format!("reading {}", input.data.display()))
}

fn cmd_hsic(args: HsicArgs) -> anyhow::Result<()> {
    let data = load(&args.input)?;
    let data_kernel = args.kernel.data_kernel()?;
    let data = if args.kernel.no_normalize {
        data
    } else {
        zscore_normalize(&data)?
    };
    let (k, sigma) = data_kernel_matrix(data.features(), data_kernel, DiagonalConvention::ZeroDiagonal)?;
    let spec = LabelKernelSpec::auto(data.labels());
    let label = build_label_kernel(&spec, data.labels(), DiagonalConvention::ZeroDiagonal)?;

    let mut out = io::stdout().lock();
    let (value, p_value, detail) = match args.test {
        TestArg::Permutation => {
            let value = hsic_unbiased(&k, &label.matrix)?.value;
            let res = permutation_test(&k, &spec, data.labels(), args.perms, args.seed)?;
            (value, res.p_value, format!("permutation ({} permutations, seed {})", args.perms, args.seed))
        }
        TestArg::Asymptotic => {
            let est = hsic_unbiased_with_variance(&k, &label.matrix)?;
            let res = asymptotic_p_value(&est)?;
            let var = est.variance.unwrap_or(0.0);
            (est.value, res.p_value, format!("asymptotic (variance {var:e})"))
        }
    };
    writeln!(out, "hsic\t{value:e}")?;
    writeln!(out, "samples\t{}", data.n_samples())?;
    writeln!(out, "features\t{}", data.n_features())?;
    match sigma {
        Some(s) => writeln!(out, "sigma\t{s}")?,
        None => writeln!(out, "sigma\tlinear kernel")?,
    }
    writeln!(out, "label_kernel\t{}", spec.name())?;
    if let Some(s) = label.sigma {
        let note = if label.used_fallback { " (fallback)" } else { "" };
        writeln!(out, "label_sigma\t{s}{note}")?;
    }
    writeln!(out, "test\t{detail}")?;
    writeln!(out, "p_value\t{p_value}")?;
    Ok(())
}

#[derive(Serialize)]
struct RankingDocument<'a> {
    schema_version: u32,
    data: String,
    n_samples: usize,
    n_features: usize,
    config: ConfigEcho,
    label_kernel: LabelKernelEcho,
    /// Most relevant first.
    ranking: Vec<RankedFeature>,
    selected: Vec<usize>,
    /// Order of elimination, least relevant first.
    elimination_order: &'a [usize],
    rounds: &'a [RoundRecord],
}

#[derive(Serialize)]
struct RankedFeature {
    rank: usize,
    index: usize,
    name: String,
}

#[derive(Serialize)]
struct ConfigEcho {
    method: SelectionMethod,
    data_kernel: DataKernel,
    elimination_fraction: f64,
    target_count: Option<usize>,
    normalize: bool,
    seed: u64,
}

#[derive(Serialize)]
struct LabelKernelEcho {
    kind: &'static str,
    sigma: Option<f64>,
    fallback: bool,
}

fn ranking_document<'a>(data: &Dataset, path: &Path, r: &'a FeatureRanking) -> RankingDocument<'a> {
    let names = data.feature_names();
    let spec = r
        .config
        .label_kernel
        .clone()
        .unwrap_or_else(|| LabelKernelSpec::auto(data.labels()));
    RankingDocument {
        schema_version: SCHEMA_VERSION,
        data: path.display().to_string(),
        n_samples: data.n_samples(),
        n_features: data.n_features(),
        config: ConfigEcho {
            method: r.config.method,
            data_kernel: r.config.data_kernel,
            elimination_fraction: r.config.elimination_fraction,
            target_count: r.config.target_count,
            normalize: r.config.normalize,
            seed: r.config.seed,
        },
        label_kernel: LabelKernelEcho {
            kind: spec.name(),
            sigma: r.label_sigma,
            fallback: r.label_fallback,
        },
        ranking: r
            .most_relevant_first()
            .into_iter()
            .enumerate()
            .map(|(i, j)| RankedFeature {
                rank: i + 1,
                index: j,
                name: names[j].clone(),
            })
            .collect(),
        selected: r.selected(),
        elimination_order: &r.ordering,
        rounds: &r.rounds,
    }
}

fn cmd_select(args: SelectArgs) -> anyhow::Result<()> {
    let data = load(&args.input)?;
    let config = SelectionConfig {
        method: match args.method {
            MethodArg::Bahsic => SelectionMethod::Bahsic,
            MethodArg::Fohsic => SelectionMethod::Fohsic,
        },
        data_kernel: args.kernel.data_kernel()?,
        label_kernel: None,
        elimination_fraction: args.fraction,
        target_count: args.num_features,
        normalize: !args.kernel.no_normalize,
        seed: args.seed,
    };
    let ranking = select(&data, &config)?;

    let mut out = io::stdout().lock();
    for (i, &j) in ranking.selected().iter().enumerate() {
        writeln!(out, "{}\t{}", i + 1, data.feature_names()[j])?;
    }
    if let Some(path) = &args.out {
        let doc = ranking_document(&data, &args.input.data, &ranking);
        write_json(path, &doc)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let kind: SynthKind = args.dataset.into();
    // generator preconditions are usage errors here, whatever their kind
    let data = kind
        .generate(args.samples, args.seed)
        .map_err(|e| anyhow::anyhow!("{}: {e}", kind.name()))?;
    save_csv(&data, &args.out, "y").with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    let config = BenchmarkConfig {
        dataset: args.dataset.into(),
        sizes: args.sizes,
        runs: args.runs,
        methods: args.methods,
        seed: args.seed,
    };
    let report = run_benchmark(&config)?;
    write_table(&report, io::stdout().lock())?;
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    if let Some(path) = &args.csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_table(&report, BufWriter::new(file))?;
    }
    Ok(())
}
