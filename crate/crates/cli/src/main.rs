//! `mixfit`: class-prevalence, loss-rate and cost forecasts for a shifted
//! test population.
//!
//! Exit status: 0 on success, 2 when the likelihood fit raised the boundary
//! alarm (the document is still written), 1 on any error.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mixfit_core::cost::{
    cost_total_covariate, cost_total_density_ratio, expected_total_cost, CostProfile,
};
use mixfit_core::io::{self, CostReport, Format};
use mixfit_core::sim::{compare, random_scenario, ShiftKind};
use mixfit_core::{
    fit, BinnedDistribution, DensityRatioProfile, SimplexWeights, SolverConfig, SolverMethod,
    TrainingModel,
};

#[derive(Parser)]
#[command(
    name = "mixfit",
    version,
    about = "Prevalence and loss-rate forecasts under dataset shift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-likelihood class weights of the test population.
    Fit {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Covariate-shift, Scaled Probability Average and ML forecasts side by side.
    Quantify {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-class totals of a per-bin cost under both shift assumptions.
    Cost {
        #[command(flatten)]
        inputs: Inputs,
        /// `feature,cost` table; defaults to a `cost` column of the test or training file.
        #[arg(long)]
        costs: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Random shift scenario with the comparison computed on it (JSON by default).
    Simulate {
        #[arg(long, value_enum, default_value = "prior")]
        kind: Kind,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 8)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Forecast table from an aggregated exposure report.
    Report {
        /// `band,last_share,last_rate[,this_share]` in percent.
        #[arg(long)]
        report: PathBuf,
        /// This period's rows, when the report lacks a `this_share` column.
        #[arg(long)]
        test: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Prior,
    Covariate,
}

#[derive(Args)]
struct Inputs {
    /// Row-level training CSV (`feature,class[,weight][,cost]`) or a model JSON document.
    #[arg(long)]
    training: Option<PathBuf>,
    /// Test CSV (`feature[,weight][,cost]`).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Aggregated report supplying the model (and the test shares if present).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Scenario JSON document supplying model, test and known truth.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// em, newton, gauss-seidel or auto.
    #[arg(long, default_value = "auto")]
    method: String,
    /// Sup-norm of the likelihood gradient at convergence [default: 1e-10]
    #[arg(long)]
    tol_grad: Option<f64>,
    /// EM stops once successive weights move less than this [default: 1e-12]
    #[arg(long)]
    tol_weight: Option<f64>,
    /// Iteration cap per solver [default: 10000]
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// text, csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Decimals of printed percentages (or cost units).
    #[arg(long, default_value_t = io::DEFAULT_PRECISION)]
    precision: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let method: SolverMethod = self.method.parse()?;
        let mut config = SolverConfig::with_method(method);
        if let Some(t) = self.tol_grad {
            config.gradient_tolerance = t;
        }
        if let Some(t) = self.tol_weight {
            config.weight_tolerance = t;
        }
        if let Some(n) = self.max_iter {
            config.max_iterations = n;
        }
        config.validate()?;
        Ok(config)
    }
}

impl OutputArgs {
    fn format(&self, default: Format) -> Result<Format> {
        Ok(match &self.format {
            Some(f) => f.parse()?,
            None => default,
        })
    }
}

struct Problem {
    model: TrainingModel,
    test: BinnedDistribution,
    truth: Option<SimplexWeights>,
    training_costs: Option<CostProfile>,
    test_costs: Option<CostProfile>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn warn(messages: &[String]) {
    for m in messages {
        eprintln!("warning: {m}");
    }
}

fn read_test(path: &Path) -> Result<(BinnedDistribution, Option<CostProfile>)> {
    let data =
        io::parse_test_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    Ok((data.distribution, data.costs))
}

fn load(inputs: &Inputs) -> Result<Problem> {
    let sources = [&inputs.training, &inputs.report, &inputs.scenario]
        .iter()
        .filter(|s| s.is_some())
        .count();
    if sources != 1 {
        bail!("give exactly one of --training, --report or --scenario");
    }
    if let Some(path) = &inputs.scenario {
        if inputs.test.is_some() {
            bail!("--test cannot be combined with --scenario");
        }
        let sc = io::read_scenario(open(path)?)
            .with_context(|| format!("reading {}", path.display()))?;
        return Ok(Problem {
            model: sc.model,
            test: sc.test,
            truth: sc.truth,
            training_costs: None,
            test_costs: None,
        });
    }
    let (model, report_test, training_costs) = if let Some(path) = &inputs.report {
        let parsed = io::parse_aggregate_report(open(path)?)
            .with_context(|| format!("reading {}", path.display()))?;
        warn(&parsed.warnings);
        (parsed.model, parsed.test, None)
    } else {
        let path = inputs.training.as_ref().expect("one source is present");
        if path.extension().is_some_and(|e| e == "json") {
            let model = io::read_model(open(path)?)
                .with_context(|| format!("reading {}", path.display()))?;
            (model, None, None)
        } else {
            let data = io::parse_training_csv(open(path)?)
                .with_context(|| format!("reading {}", path.display()))?;
            (data.model, None, data.costs)
        }
    };
    let (test, test_costs) = match (&inputs.test, report_test) {
        (Some(path), _) => read_test(path)?,
        (None, Some(test)) => (test, None),
        (None, None) => bail!("no test distribution: pass --test"),
    };
    let test = test.aligned_to(model.support())?;
    Ok(Problem {
        model,
        test,
        truth: None,
        training_costs,
        test_costs,
    })
}

fn emit(document: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(document.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Runs one command; returns whether the boundary alarm was raised.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Fit {
            inputs,
            solver,
            output,
        } => {
            let config = solver.config()?;
            let format = output.format(Format::Text)?;
            let p = load(&inputs)?;
            let ratios = DensityRatioProfile::from_conditionals(&p.model, None)?;
            let result = fit(&p.test, &ratios, &config)?;
            emit(&io::write_fit(
                &result,
                p.model.class_labels(),
                format,
                output.precision,
            ))?;
            Ok(result.boundary_alarm)
        }
        Command::Quantify {
            inputs,
            solver,
            output,
        } => {
            let config = solver.config()?;
            let format = output.format(Format::Text)?;
            let p = load(&inputs)?;
            let comparison = compare(&p.model, &p.test, p.truth.as_ref(), &config)?;
            emit(&io::write_report(&comparison, format, output.precision))?;
            Ok(comparison.ml.boundary_alarm)
        }
        Command::Report {
            report,
            test,
            solver,
            output,
        } => {
            let inputs = Inputs {
                training: None,
                test,
                report: Some(report),
                scenario: None,
            };
            let config = solver.config()?;
            let format = output.format(Format::Text)?;
            let p = load(&inputs)?;
            let comparison = compare(&p.model, &p.test, None, &config)?;
            emit(&io::write_report(&comparison, format, output.precision))?;
            Ok(comparison.ml.boundary_alarm)
        }
        Command::Cost {
            inputs,
            costs,
            solver,
            output,
        } => {
            let config = solver.config()?;
            let format = output.format(Format::Text)?;
            let p = load(&inputs)?;
            let costs = match costs {
                Some(path) => io::parse_costs_csv(open(&path)?)
                    .with_context(|| format!("reading {}", path.display()))?,
                None => match p.test_costs.or(p.training_costs) {
                    Some(c) => c,
                    None => bail!("no costs: pass --costs or add a `cost` column"),
                },
            };
            let costs = costs.aligned_to(p.test.support())?;
            let ratios = DensityRatioProfile::from_conditionals(&p.model, None)?;
            let result = fit(&p.test, &ratios, &config)?;
            let density_ratio = if result.boundary_alarm {
                None
            } else {
                Some(cost_total_density_ratio(
                    &p.test,
                    &costs,
                    &ratios,
                    &result.weights,
                )?)
            };
            let report = CostReport {
                class_labels: p.model.class_labels().to_vec(),
                total: expected_total_cost(&p.test, &costs)?,
                covariate: cost_total_covariate(&p.test, &costs, &p.model)?,
                density_ratio,
                weights: result.weights.values().to_vec(),
                boundary_alarm: result.boundary_alarm,
            };
            emit(&io::write_costs(&report, format, output.precision))?;
            Ok(result.boundary_alarm)
        }
        Command::Simulate {
            kind,
            classes,
            bins,
            seed,
            solver,
            output,
        } => {
            let config = solver.config()?;
            let format = output.format(Format::Json)?;
            let kind = match kind {
                Kind::Prior => ShiftKind::PriorProbability,
                Kind::Covariate => ShiftKind::Covariate,
            };
            let scenario = random_scenario(kind, classes, bins, seed)?;
            let comparison = compare(
                &scenario.model,
                &scenario.test,
                scenario.truth.as_ref(),
                &config,
            )?;
            let document = match format {
                Format::Json => io::write_scenario(&scenario, Some(&comparison)),
                other => io::write_report(&comparison, other, output.precision),
            };
            emit(&document)?;
            Ok(comparison.ml.boundary_alarm)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: boundary alarm: no solution with all class weights positive");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
