//! wmtest: weighted multiple hypothesis testing from the command line.
//!
//! TSV in, TSV out. Exit code 0 on success, 2 on any input or contract
//! error, with a diagnostic naming the violated precondition. Stochastic
//! subcommands take an explicit --seed and rerun byte-identically.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wmtest::estimator::{self, Model};
use wmtest::hypotheses::{self, fmt17, EffectConfiguration, Probability, WeightVector};
use wmtest::procedures::by_name;
use wmtest::simulate::{self, SynthGenomeConfig, WeightsSpec};
use wmtest::{designer, distfn, optimal, power, robustness};

mod render;

#[derive(Parser)]
#[command(name = "wmtest", version, about = "Weighted multiple hypothesis testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a testing procedure on a battery file
    #[command(subcommand)]
    Test(TestCmd),
    /// Oracle weights for a known effect configuration
    #[command(subcommand)]
    Weights(WeightsCmd),
    /// Power of weighted tests
    #[command(subcommand)]
    Power(PowerCmd),
    /// How weighting fares when the guess is wrong
    #[command(subcommand)]
    Robustness(RobustnessCmd),
    /// Binary weighting schemes with power guarantees
    #[command(subcommand)]
    Design(DesignCmd),
    /// Estimate weights from grouped test statistics
    Estimate(EstimateArgs),
    /// Synthetic two-stage genome scans and Monte Carlo checks
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Worked numerical examples
    #[command(subcommand)]
    Example(ExampleCmd),
}

// --- test -------------------------------------------------------------------

#[derive(Subcommand)]
enum TestCmd {
    /// Weighted Bonferroni: reject when p/w <= alpha/m
    Bonferroni(TestArgs),
    /// Weighted Holm step-down
    Holm(TestArgs),
    /// Weighted Benjamini-Hochberg step-up
    Bh(TestArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Battery TSV: id<TAB>p[<TAB>stat][<TAB>group]
    #[arg(long)]
    battery: PathBuf,
    /// Weight TSV (id<TAB>weight, mean 1); unit weights when omitted
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Error level, in (0, 1)
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

// --- weights ----------------------------------------------------------------

#[derive(Subcommand)]
enum WeightsCmd {
    /// Solve for the power-maximizing weights of a means file
    Optimal {
        /// Means TSV: id<TAB>mean, zero rows are nulls
        #[arg(long)]
        means: PathBuf,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the weight-shape family over an effect grid, one column
    /// per normalizing constant, each normalized to max 1
    Family {
        /// Normalizing constants c, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        c_list: Vec<f64>,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Smallest effect size on the grid
        #[arg(long, default_value_t = 0.1)]
        xi_min: f64,
        /// Largest effect size on the grid
        #[arg(long, default_value_t = 8.0)]
        xi_max: f64,
        /// Grid points
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// --- power ------------------------------------------------------------------

#[derive(Subcommand)]
enum PowerCmd {
    /// Power against effect size, one column per weight
    Curve {
        /// Weights to tabulate, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1")]
        weight_list: Vec<f64>,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Smallest effect size on the grid
        #[arg(long, default_value_t = 0.0)]
        xi_min: f64,
        /// Largest effect size on the grid
        #[arg(long, default_value_t = 8.0)]
        xi_max: f64,
        /// Grid points
        #[arg(long, default_value_t = 161)]
        points: usize,
        /// Two-sided tests instead of one-sided
        #[arg(long)]
        two_sided: bool,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean power over the nonzero effects of a means file
    Average {
        /// Means TSV: id<TAB>mean, zero rows are nulls
        #[arg(long)]
        means: PathBuf,
        /// Weight TSV (id<TAB>weight, mean 1); unit weights when omitted
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// --- robustness ---------------------------------------------------------------

#[derive(Subcommand)]
enum RobustnessCmd {
    /// Power gained minus power lost for a two-point binary scheme,
    /// tabulated over the up-weight ratio B
    TwoPoint {
        /// Fraction of hypotheses up-weighted, in (0, 1)
        #[arg(long)]
        epsilon: f64,
        /// Effect size; the marginal effect z_{alpha/m} when omitted
        #[arg(long)]
        xi: Option<f64>,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Smallest ratio on the grid (B >= 1)
        #[arg(long, default_value_t = 1.0)]
        b_min: f64,
        /// Largest ratio on the grid
        #[arg(long, default_value_t = 200.0)]
        b_max: f64,
        /// Grid points
        #[arg(long, default_value_t = 400)]
        points: usize,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Worst-case power of oracle weights under contamination of the
    /// effect distribution, against plain Bonferroni and the clean oracle
    WorstCase {
        /// Mass on the real alternative, in (0, 1)
        #[arg(long)]
        a: f64,
        /// Contamination mass, in (0, 1)
        #[arg(long)]
        gamma: f64,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Smallest effect size on the grid
        #[arg(long, default_value_t = 1.0)]
        xi_min: f64,
        /// Largest effect size on the grid
        #[arg(long, default_value_t = 8.0)]
        xi_max: f64,
        /// Grid points
        #[arg(long, default_value_t = 141)]
        points: usize,
        /// Restrict the adversary to contamination locations below xi
        #[arg(long)]
        restrict_u: bool,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The ratio B0 where two-point weighting stops paying, and the best
    /// ratio before it
    Turnaround {
        /// Fraction of hypotheses up-weighted, in (0, 1)
        #[arg(long)]
        epsilon: f64,
        /// Effect size; the marginal effect z_{alpha/m} when omitted
        #[arg(long)]
        xi: Option<f64>,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper bound on the power a binary scheme can cost, valid for any
    /// effect size and any up-weighted fraction
    SafeZone {
        /// Up-weight value w1 (B >= 2)
        #[arg(long)]
        b: f64,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// --- design -------------------------------------------------------------------

#[derive(Subcommand)]
enum DesignCmd {
    /// Binary scheme reaching a target power on a chosen fraction while
    /// maximizing the power floor of everything else
    MinPower {
        /// Fraction of hypotheses up-weighted, in (0, 1)
        #[arg(long)]
        epsilon: f64,
        /// Allowed type II error at the marginal effect, in (0, 1/2)
        #[arg(long)]
        beta: f64,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binary scheme up-weighting as many hypotheses as possible while
    /// the rest keep power at least delta
    MaxCount {
        /// Allowed type II error at the marginal effect, in (0, 1/2)
        #[arg(long)]
        beta: f64,
        /// Power floor for the down-weighted hypotheses, in [0, 1-beta)
        #[arg(long)]
        delta: f64,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// --- estimate -----------------------------------------------------------------

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    /// Statistics are z-scores
    Normal,
    /// Statistics are z-scores whose squares follow chi-square(1)
    Chisq,
}

#[derive(Args)]
struct EstimateArgs {
    /// Battery TSV with stat and group columns: id<TAB>p<TAB>stat<TAB>group
    #[arg(long)]
    battery: PathBuf,
    /// Distribution of the group statistics
    #[arg(long, value_enum, default_value_t = ModelArg::Normal)]
    model: ModelArg,
    /// Shrinkage toward the group mean, in [0, 1]; 0 is none, 1 is unit weights
    #[arg(long, default_value_t = 0.0)]
    smooth: f64,
    /// Error level, in (0, 1)
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Weight TSV output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a per-group report TSV here
    #[arg(long)]
    report: Option<PathBuf>,
}

// --- simulate -----------------------------------------------------------------

#[derive(Args)]
struct GenomeConfigArgs {
    /// Chromosomes in the synthetic genome
    #[arg(long, default_value_t = 23)]
    n_chrom: usize,
    /// Trace positions per chromosome
    #[arg(long, default_value_t = 500)]
    positions_per_chrom: usize,
    /// Planted variants, at most one per chromosome
    #[arg(long, default_value_t = 20)]
    n_linkage_signals: usize,
    /// Association tests, spread evenly over the genome
    #[arg(long, default_value_t = 10000)]
    n_assoc: usize,
    /// Tests co-located with variants that carry a real effect
    #[arg(long, default_value_t = 20)]
    n_assoc_signals: usize,
    /// Mean of a signal's association statistic
    #[arg(long, default_value_t = 3.5)]
    signal_mean: f64,
    /// Lag-1 autocorrelation of the trace noise, in [0, 1)
    #[arg(long, default_value_t = 0.98)]
    phi: f64,
    /// Peak added to the trace mean at a variant
    #[arg(long, default_value_t = 3.0)]
    bump_height: f64,
    /// Positions for the peak to decay to zero
    #[arg(long, default_value_t = 40)]
    bump_halfwidth: usize,
}

impl GenomeConfigArgs {
    fn to_config(&self) -> SynthGenomeConfig {
        SynthGenomeConfig {
            n_chrom: self.n_chrom,
            positions_per_chrom: self.positions_per_chrom,
            n_linkage_signals: self.n_linkage_signals,
            n_assoc: self.n_assoc,
            n_assoc_signals: self.n_assoc_signals,
            signal_mean: self.signal_mean,
            phi: self.phi,
            bump_height: self.bump_height,
            bump_halfwidth: self.bump_halfwidth,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsSpecArg {
    /// All weights 1
    Unit,
    /// Weights from a file, in file order
    Fixed,
    /// Exponential draws renormalized to mean 1, fresh each replicate
    RandomExponential,
    /// Weight m on one hypothesis, 0 elsewhere
    ExtremeOneHot,
    /// Weights correlated with the null statistics, mean 1 in expectation
    DataDependent,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Generate one synthetic study and dump it per position
    Genome {
        #[command(flatten)]
        config: GenomeConfigArgs,
        /// Fraction of tests up-weighted from the trace, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Up/down weight ratio (B >= 1)
        #[arg(long, default_value_t = 10.0)]
        b: f64,
        /// RNG seed
        #[arg(long)]
        seed: u64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean discoveries, power, and familywise error over an
    /// (epsilon, B) grid of trace-derived binary weights
    Surface {
        #[command(flatten)]
        config: GenomeConfigArgs,
        /// Up-weighted fractions, comma separated
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2")]
        epsilon_list: Vec<f64>,
        /// Up/down ratios, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50")]
        b_list: Vec<f64>,
        /// Replicates per cell
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Procedure: bonferroni, holm, or bh
        #[arg(long, default_value = "bonferroni")]
        procedure: String,
        /// RNG seed
        #[arg(long)]
        seed: u64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo familywise error on an all-null battery
    Fwer {
        /// Procedure: bonferroni, holm, or bh
        #[arg(long, default_value = "bonferroni")]
        procedure: String,
        /// How the weights are chosen each replicate
        #[arg(long, value_enum, default_value_t = WeightsSpecArg::Unit)]
        weights_spec: WeightsSpecArg,
        /// Weight TSV for the fixed spec, length m, in file order
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Statistic-weight coupling for the data-dependent spec
        #[arg(long)]
        c: Option<f64>,
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Replicates (>= 1000)
        #[arg(long, default_value_t = 20000)]
        reps: usize,
        /// RNG seed
        #[arg(long)]
        seed: u64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// --- example ------------------------------------------------------------------

#[derive(Subcommand)]
enum ExampleCmd {
    /// Two nearby effect distributions whose optimal weights differ by a
    /// three-orders-of-magnitude factor
    Discontinuity {
        /// Number of hypotheses
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Error level, in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Mass on the main alternative, in (0, 1)
        #[arg(long, default_value_t = 0.1)]
        a: f64,
        /// Contamination mass, in (0, 1)
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        /// Weight concentration factor K
        #[arg(long, default_value_t = 1000.0)]
        k_factor: f64,
        /// Normalizing constant of the weight family
        #[arg(long, default_value_t = 0.1)]
        c: f64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// --- dispatch -----------------------------------------------------------------

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(2);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Test(cmd) => {
            let (name, args) = match &cmd {
                TestCmd::Bonferroni(a) => ("bonferroni", a),
                TestCmd::Holm(a) => ("holm", a),
                TestCmd::Bh(a) => ("bh", a),
            };
            run_test(name, args)
        }
        Command::Weights(cmd) => run_weights(cmd),
        Command::Power(cmd) => run_power(cmd),
        Command::Robustness(cmd) => run_robustness(cmd),
        Command::Design(cmd) => run_design(cmd),
        Command::Estimate(args) => run_estimate(args),
        Command::Simulate(cmd) => run_simulate(cmd),
        Command::Example(cmd) => run_example(cmd),
    }
}

fn run_test(name: &str, args: &TestArgs) -> Result<()> {
    let battery = hypotheses::load_battery(&args.battery)?;
    let weights = match &args.weights {
        Some(path) => aligned_weights(battery.ids(), path)?,
        None => WeightVector::unit(battery.m()),
    };
    let alpha = Probability::new(args.alpha)?;
    let procedure = by_name(name).expect("registered procedure");
    let set = procedure.reject(&battery, &weights, alpha)?;
    emit(
        args.out.as_deref(),
        &hypotheses::write_rejections(&battery, &weights, &set),
    )
}

fn run_weights(cmd: WeightsCmd) -> Result<()> {
    match cmd {
        WeightsCmd::Optimal { means, alpha, out } => {
            let (ids, mu) = hypotheses::load_means(&means)?;
            let config = EffectConfiguration::one_sided(mu)?;
            let solution = optimal::solve_c(&config, Probability::new(alpha)?)?;
            let mut text = render::comments(&[
                ("c", fmt17(solution.c)),
                ("oracle_power", fmt17(solution.oracle_power)),
                ("residual", fmt17(solution.residual)),
            ]);
            text.push_str(&hypotheses::write_weights(&ids, solution.weights.as_slice()));
            emit(out.as_deref(), &text)
        }
        WeightsCmd::Family { c_list, alpha, m, xi_min, xi_max, points, out } => {
            let alpha = Probability::new(alpha)?;
            let xis = grid(xi_min, xi_max, points)?;
            let mut header = vec!["xi".to_string()];
            header.extend(c_list.iter().map(|c| format!("w_c={c}")));
            // Each column normalized so its grid maximum is 1.
            let mut columns = Vec::with_capacity(c_list.len());
            for &c in &c_list {
                let col: Vec<f64> = xis.iter().map(|&xi| optimal::rho(xi, c, alpha, m)).collect();
                let peak = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !(peak > 0.0) {
                    bail!("the weight shape for c = {c} vanishes on this grid");
                }
                columns.push(col.into_iter().map(|v| v / peak).collect::<Vec<f64>>());
            }
            let rows: Vec<Vec<f64>> = xis
                .iter()
                .enumerate()
                .map(|(i, &xi)| {
                    let mut row = vec![xi];
                    row.extend(columns.iter().map(|col| col[i]));
                    row
                })
                .collect();
            emit(out.as_deref(), &render::curve(&header, &rows))
        }
    }
}

fn run_power(cmd: PowerCmd) -> Result<()> {
    match cmd {
        PowerCmd::Curve { weight_list, alpha, m, xi_min, xi_max, points, two_sided, out } => {
            let alpha = Probability::new(alpha)?;
            for &w in &weight_list {
                if !(w.is_finite() && w >= 0.0) {
                    bail!("weights must be finite and >= 0, got {w}");
                }
            }
            let xis = grid(xi_min, xi_max, points)?;
            let mut header = vec!["xi".to_string()];
            header.extend(weight_list.iter().map(|w| format!("power_w={w}")));
            let rows: Vec<Vec<f64>> = xis
                .iter()
                .map(|&xi| {
                    let mut row = vec![xi];
                    row.extend(weight_list.iter().map(|&w| {
                        if two_sided {
                            power::power_two_sided(xi, w, alpha, m)
                        } else {
                            power::power_one_sided(xi, w, alpha, m)
                        }
                    }));
                    row
                })
                .collect();
            emit(out.as_deref(), &render::curve(&header, &rows))
        }
        PowerCmd::Average { means, weights, alpha, out } => {
            let (ids, mu) = hypotheses::load_means(&means)?;
            let config = EffectConfiguration::one_sided(mu)?;
            let wv = match &weights {
                Some(path) => aligned_weights(&ids, path)?,
                None => WeightVector::unit(ids.len()),
            };
            let value = power::average_power(&config, &wv, Probability::new(alpha)?)?;
            emit(out.as_deref(), &render::kv(&[("average_power", value)]))
        }
    }
}

fn run_robustness(cmd: RobustnessCmd) -> Result<()> {
    match cmd {
        RobustnessCmd::TwoPoint { epsilon, xi, alpha, m, b_min, b_max, points, out } => {
            let alpha = Probability::new(alpha)?;
            let xi = resolve_xi(xi, alpha, m)?;
            let bs = grid(b_min, b_max, points)?;
            let rows: Vec<Vec<f64>> = bs
                .iter()
                .map(|&b| Ok(vec![b, robustness::robustness_two_point(b, epsilon, xi, alpha, m)?]))
                .collect::<Result<_>>()?;
            let header = vec!["b".to_string(), "r".to_string()];
            let text = format!("{}{}", render::comments(&[("xi", fmt17(xi))]), render::curve(&header, &rows));
            emit(out.as_deref(), &text)
        }
        RobustnessCmd::WorstCase { a, gamma, alpha, m, xi_min, xi_max, points, restrict_u, out } => {
            let alpha = Probability::new(alpha)?;
            let xis = grid(xi_min, xi_max, points)?;
            let table = robustness::worst_case_power_curves(a, gamma, alpha, m, &xis, restrict_u)?;
            let header = ["xi", "worst_case", "bonferroni", "oracle", "u_least"]
                .map(String::from)
                .to_vec();
            let rows: Vec<Vec<f64>> = table
                .iter()
                .map(|row| vec![row.xi, row.worst, row.bonf, row.oracle, row.u_least])
                .collect();
            emit(out.as_deref(), &render::curve(&header, &rows))
        }
        RobustnessCmd::Turnaround { epsilon, xi, alpha, m, out } => {
            let alpha = Probability::new(alpha)?;
            let xi = resolve_xi(xi, alpha, m)?;
            let turn = robustness::turnaround(epsilon, xi, alpha, m)?;
            emit(
                out.as_deref(),
                &render::kv(&[
                    ("xi", xi),
                    ("b0", turn.b0),
                    ("b_star", turn.b_star),
                    ("r_at_b_star", turn.r_at_b_star),
                ]),
            )
        }
        RobustnessCmd::SafeZone { b, alpha, m, out } => {
            let bound = robustness::safe_zone_bound(b, Probability::new(alpha)?, m)?;
            emit(out.as_deref(), &render::kv(&[("b", b), ("max_power_loss", bound)]))
        }
    }
}

fn run_design(cmd: DesignCmd) -> Result<()> {
    let (design, m, out) = match cmd {
        DesignCmd::MinPower { epsilon, beta, alpha, m, out } => (
            designer::design_min_power(
                Probability::new(epsilon)?,
                Probability::new(beta)?,
                Probability::new(alpha)?,
                m,
            )?,
            m,
            out,
        ),
        DesignCmd::MaxCount { beta, delta, alpha, m, out } => (
            designer::design_max_count(
                Probability::new(beta)?,
                Probability::new(delta)?,
                Probability::new(alpha)?,
                m,
            )?,
            m,
            out,
        ),
    };
    let scheme = design.scheme;
    let wv = scheme.weight_vector(m)?;
    let ids: Vec<String> = (1..=m).map(|j| format!("t{j}")).collect();
    let mut text = render::comments(&[
        ("epsilon", fmt17(scheme.epsilon)),
        ("b", fmt17(scheme.b)),
        ("w1", fmt17(scheme.w1)),
        ("w0", fmt17(scheme.w0)),
        ("k", scheme.k.to_string()),
        ("c_value", fmt17(design.c_value)),
        ("target_power", fmt17(design.target_power.get())),
        ("min_power", fmt17(design.min_power.get())),
    ]);
    text.push_str(&hypotheses::write_weights(&ids, wv.as_slice()));
    emit(out.as_deref(), &text)
}

fn run_estimate(args: EstimateArgs) -> Result<()> {
    let battery = hypotheses::load_battery(&args.battery)?;
    let model = match args.model {
        ModelArg::Normal => Model::Normal,
        ModelArg::Chisq => Model::Chisq,
    };
    let sw = estimator::weights_from_groups(
        &battery,
        model,
        Probability::new(args.smooth)?,
        Probability::new(args.alpha)?,
    )?;
    let mut pairs = vec![
        ("model", if matches!(model, Model::Normal) { "normal".to_string() } else { "chisq".to_string() }),
        ("gamma_smooth", fmt17(sw.gamma_smooth.get())),
        ("used_fallback", sw.used_fallback.to_string()),
    ];
    for warning in &sw.warnings {
        pairs.push(("warning", warning.clone()));
    }
    let mut text = render::comments(&pairs);
    text.push_str(&hypotheses::write_weights(battery.ids(), sw.per_test.as_slice()));
    emit(args.out.as_deref(), &text)?;
    if let Some(report) = &args.report {
        fs::write(report, render::group_report(&sw))
            .with_context(|| format!("writing {}", report.display()))?;
    }
    Ok(())
}

fn run_simulate(cmd: SimulateCmd) -> Result<()> {
    match cmd {
        SimulateCmd::Genome { config, epsilon, b, seed, out } => {
            let study = simulate::synth_genome(&config.to_config(), seed)?;
            let weights = simulate::trace_to_binary_weights(&study, epsilon, b)?;
            let text = format!(
                "{}{}",
                render::comments(&[
                    ("seed", seed.to_string()),
                    ("m", study.m().to_string()),
                    ("signals", study.m1().to_string()),
                    ("epsilon", fmt17(epsilon)),
                    ("b", fmt17(b)),
                ]),
                render::study_dump(&study, &weights),
            );
            emit(out.as_deref(), &text)
        }
        SimulateCmd::Surface {
            config, epsilon_list, b_list, reps, alpha, procedure, seed, out,
        } => {
            let procedure = lookup_procedure(&procedure)?;
            let cells = simulate::power_surface(
                &config.to_config(),
                &epsilon_list,
                &b_list,
                reps,
                Probability::new(alpha)?,
                procedure,
                seed,
            )?;
            emit(out.as_deref(), &render::surface(&cells))
        }
        SimulateCmd::Fwer {
            procedure, weights_spec, weights, c, m, alpha, reps, seed, out,
        } => {
            let procedure = lookup_procedure(&procedure)?;
            let spec = match weights_spec {
                WeightsSpecArg::Unit => WeightsSpec::Unit,
                WeightsSpecArg::Fixed => {
                    let path = weights
                        .as_ref()
                        .context("the fixed weights spec requires --weights")?;
                    let (_, ws) = hypotheses::load_weights(path)?;
                    if ws.len() != m {
                        bail!("--weights has {} entries but m = {m}", ws.len());
                    }
                    WeightsSpec::Fixed(WeightVector::new(ws)?)
                }
                WeightsSpecArg::RandomExponential => WeightsSpec::RandomExponential,
                WeightsSpecArg::ExtremeOneHot => WeightsSpec::ExtremeOneHot,
                WeightsSpecArg::DataDependent => WeightsSpec::DataDependent {
                    c: c.context("the data-dependent weights spec requires --c")?,
                },
            };
            if weights.is_some() && !matches!(weights_spec, WeightsSpecArg::Fixed) {
                bail!("--weights is only meaningful for the fixed weights spec");
            }
            if c.is_some() && !matches!(weights_spec, WeightsSpecArg::DataDependent) {
                bail!("--c is only meaningful for the data-dependent weights spec");
            }
            let est = simulate::fwer_mc(procedure, &spec, m, Probability::new(alpha)?, reps, seed)?;
            emit(
                out.as_deref(),
                &render::kv(&[
                    ("fwer", est.fwer),
                    ("se", est.se),
                    ("reps", est.reps as f64),
                ]),
            )
        }
    }
}

fn run_example(cmd: ExampleCmd) -> Result<()> {
    match cmd {
        ExampleCmd::Discontinuity { m, alpha, a, gamma, k_factor, c, out } => {
            let ex = optimal::discontinuity_example(m, Probability::new(alpha)?, a, gamma, k_factor, c)?;
            emit(
                out.as_deref(),
                &render::kv(&[
                    ("a_upper", ex.a_upper),
                    ("b_upper", ex.b_upper),
                    ("xi", ex.xi),
                    ("u", ex.u),
                    ("w_xi_under_q", ex.w_xi_under_q),
                    ("w_xi_under_q_tilde", ex.w_xi_under_q_tilde),
                    ("ratio", ex.ratio),
                    ("ks_distance", ex.ks_distance),
                    ("c_under_q", ex.c_under_q),
                    ("c_under_q_tilde", ex.c_under_q_tilde),
                ]),
            )
        }
    }
}

// --- shared helpers -----------------------------------------------------------

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        bail!("the grid needs at least 2 points, got {points}");
    }
    if !(min.is_finite() && max.is_finite() && max > min) {
        bail!("the grid needs finite max > min, got [{min}, {max}]");
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points).map(|i| min + step * i as f64).collect())
}

/// An explicit effect size, or the marginal effect z_{alpha/m}.
fn resolve_xi(xi: Option<f64>, alpha: Probability, m: usize) -> Result<f64> {
    match xi {
        Some(v) => Ok(v),
        None => {
            if m == 0 {
                bail!("m must be >= 1");
            }
            Ok(distfn::upper_quantile(alpha.get() / m as f64)?)
        }
    }
}

fn lookup_procedure(name: &str) -> Result<&'static dyn wmtest::procedures::Procedure> {
    by_name(name).with_context(|| {
        format!(
            "unknown procedure {name}; expected one of {}",
            wmtest::procedures::names().join(", ")
        )
    })
}

/// Match weight-file rows to target ids, then enforce the mean-one budget.
fn aligned_weights(ids: &[String], path: &Path) -> Result<WeightVector> {
    let (wids, ws) = hypotheses::load_weights(path)?;
    let mut index = HashMap::with_capacity(wids.len());
    for (k, id) in wids.iter().enumerate() {
        if index.insert(id.as_str(), k).is_some() {
            bail!("duplicate id {id} in {}", path.display());
        }
    }
    let mut aligned = Vec::with_capacity(ids.len());
    for id in ids {
        match index.get(id.as_str()) {
            Some(&k) => aligned.push(ws[k]),
            None => bail!("{} has no weight for id {id}", path.display()),
        }
    }
    Ok(WeightVector::new(aligned)?)
}
