//! `twoslope`: batch front end for the seminorm, minimization, asymptotics
//! and misfit computations. All output goes to stdout (JSON unless the
//! subcommand is CSV-shaped); exit code 2 flags input validation problems,
//! 3 a failed certification.

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use twoslope_core::asymptotics::{
    extremal_limits, mantissa_constant, ratio_sweep, sigma, sweep_csv, DEFAULT_EXTREMAL_DELTAS,
};
use twoslope_core::energy::{best_offset, energy, energy_breakdown, energy_s0, energy_s1};
use twoslope_core::kernel::{
    frac_laplacian_avg, frac_laplacian_point, quadrature_oracle, segment_pair_energy,
    KernelExponent, Segment,
};
use twoslope_core::misfit::{misfit_solve, MisfitInputs};
use twoslope_core::numeric::BRANCH_WINDOW;
use twoslope_core::optimize::{
    brute_force, first_variation, minimize_gaps_traced, verify_s0_minimizer, DescentOptions,
};
use twoslope_core::profile::{ProblemParams, TwoSlopeProfile};
use twoslope_core::Error;

#[derive(Parser)]
#[command(name = "twoslope", version = version_string(), disable_version_flag = true)]
struct Cli {
    /// Print version and numerical branch constants.
    #[arg(long, short = 'V', action = clap::ArgAction::Version)]
    version: Option<bool>,
    /// Cap the worker thread count (default: rayon's choice).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized steps (descent multistarts, selftest draws).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

fn version_string() -> &'static str {
    Box::leak(
        format!("{} (kernel branch window {BRANCH_WINDOW:e})", env!("CARGO_PKG_VERSION"))
            .into_boxed_str(),
    )
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    s: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long = "L", default_value_t = 1)]
    l: u32,
    /// Gap lengths (comma-separated); equal gaps when omitted.
    #[arg(long, value_delimiter = ',')]
    gaps: Option<Vec<f64>>,
}

impl ProfileArgs {
    fn params(&self) -> Result<ProblemParams, Error> {
        ProblemParams::new(self.s, self.lambda, self.delta, self.l)
    }

    fn profile(&self) -> Result<TwoSlopeProfile, Error> {
        let params = self.params()?;
        match &self.gaps {
            None => TwoSlopeProfile::build_canonical(params),
            Some(g) => {
                let gaps =
                    twoslope_core::profile::GapConfiguration::validated(g.clone(), &params)?;
                TwoSlopeProfile::from_gaps(params, &gaps)
            }
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Certified seminorm density of a profile.
    Eval {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Ten-term interaction breakdown of the canonical profile (Lambda delta = 1).
    Breakdown {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Fractional Laplacian of a profile at a point or averaged on an interval.
    Laplacian {
        #[command(flatten)]
        profile: ProfileArgs,
        /// Evaluation point (pointwise value).
        #[arg(long, conflicts_with_all = ["from", "to"], allow_negative_numbers = true)]
        at: Option<f64>,
        /// Interval start (integral over the interval).
        #[arg(long, requires = "to", allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, requires = "from", allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Projected-gradient minimization over gap configurations.
    Minimize {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 200)]
        max_iters: u32,
        #[arg(long, default_value_t = 1e-6)]
        grad_tol: f64,
        #[arg(long, default_value_t = 4)]
        multistarts: u32,
        /// Emit a per-iteration CSV trace instead of the JSON report.
        #[arg(long)]
        trace: bool,
    },
    /// Exhaustive grid search over the gap simplex (L = 2 or 3).
    Brute {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 100)]
        grid_n: u32,
        /// Verify the s = 0 minimizer (equal gaps + offset -Lambda delta / 2).
        #[arg(long)]
        s0: bool,
    },
    /// CSV ratio sweep energy/sigma over a delta grid (canonical, Lambda = 1/delta).
    Sweep {
        #[arg(long)]
        s: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3, 1e-4])]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// The s < 1/2 limit constant of the mantissa profile.
    Mantissa {
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Extremal constants 1/24 and 1/2 with finite-delta evaluations.
    Extremal {
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
    /// Semi-coherent interface energy density report.
    Misfit {
        #[arg(long)]
        g_plus: f64,
        #[arg(long)]
        g_minus: f64,
        #[arg(long)]
        nu_plus: f64,
        #[arg(long)]
        nu_minus: f64,
        #[arg(long)]
        c_plus: f64,
        #[arg(long)]
        c_minus: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Run the built-in invariant checks and print a pass/fail table.
    Selftest,
}

fn main() {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let seed = cli.seed;
    let outcome = pool.install(|| run(cli.cmd, seed));
    match outcome {
        Ok(out) => {
            println!("{out}");
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Certification { .. } | Error::OracleBudget { .. } => 3,
                _ => 2,
            };
            std::process::exit(code);
        }
    }
}

fn run(cmd: Cmd, seed: u64) -> Result<String, Error> {
    match cmd {
        Cmd::Eval { profile, tol } => {
            let u = profile.profile()?;
            let en = energy(&u, profile.s, tol)?;
            to_json(&en)
        }
        Cmd::Breakdown { s, delta } => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::InvalidParams(format!("delta = {delta} outside (0,1)")));
            }
            let params = ProblemParams::new(s, 1.0 / delta, delta, 1)?;
            let bd = energy_breakdown(&params)?;
            to_json(&bd)
        }
        Cmd::Laplacian { profile, at, from, to, tol } => {
            let u = profile.profile()?;
            let k = KernelExponent::new(profile.s)?;
            let v = match (at, from, to) {
                (Some(x), None, None) => frac_laplacian_point(&u, x, &k, tol)?,
                (None, Some(a), Some(b)) => frac_laplacian_avg(&u, (a, b), &k, tol)?,
                _ => {
                    return Err(Error::InvalidParams(
                        "provide either --at or --from/--to".into(),
                    ))
                }
            };
            to_json(&v)
        }
        Cmd::Minimize { profile, max_iters, grad_tol, multistarts, trace } => {
            let params = profile.params()?;
            let opts = DescentOptions {
                max_iters,
                grad_tol,
                multistart_count: multistarts,
                rng_seed: seed,
                ..Default::default()
            };
            let out = minimize_gaps_traced(&params, profile.s, &opts)?;
            if trace {
                let mut csv = String::from("iter,energy,residual\n");
                for row in &out.trace {
                    csv.push_str(&format!(
                        "{},{:.16e},{:.16e}\n",
                        row.iter, row.energy, row.residual
                    ));
                }
                Ok(csv.trim_end().to_string())
            } else {
                to_json(&out.report)
            }
        }
        Cmd::Brute { profile, grid_n, s0 } => {
            let params = profile.params()?;
            if s0 {
                let rep = verify_s0_minimizer(&params, grid_n)?;
                let u = TwoSlopeProfile::from_gaps(params, &rep.best_gaps)?;
                let offset = best_offset(&u);
                let value = energy_s0(&u, offset);
                Ok(serde_json::to_string_pretty(&json!({
                    "report": rep,
                    "best_offset": offset,
                    "s0_value": value,
                }))
                .expect("serialization"))
            } else {
                to_json(&brute_force(&params, profile.s, grid_n)?)
            }
        }
        Cmd::Sweep { s, deltas, tol } => {
            let rows = ratio_sweep(s, &deltas, tol)?;
            Ok(sweep_csv(&rows).trim_end().to_string())
        }
        Cmd::Mantissa { s, tol } => {
            let (value, tail_bound) = mantissa_constant(s, tol)?;
            Ok(serde_json::to_string_pretty(&json!({
                "value": value,
                "tail_bound": tail_bound,
            }))
            .expect("serialization"))
        }
        Cmd::Extremal { deltas } => {
            let ds = deltas.unwrap_or_else(|| DEFAULT_EXTREMAL_DELTAS.to_vec());
            to_json(&extremal_limits(&ds)?)
        }
        Cmd::Misfit { g_plus, g_minus, nu_plus, nu_minus, c_plus, c_minus, tol } => {
            let inputs =
                MisfitInputs { g_plus, g_minus, nu_plus, nu_minus, c_plus, c_minus };
            to_json(&misfit_solve(&inputs, tol)?)
        }
        Cmd::Selftest => selftest(seed),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(v).expect("serialization"))
}

/// A small battery asserting the core identities; prints one line per check.
fn selftest(seed: u64) -> Result<String, Error> {
    use rand::{Rng, SeedableRng};
    let mut out = String::new();
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        all_ok &= ok;
        out.push_str(&format!(
            "{} {name}: {detail}\n",
            if ok { "PASS" } else { "FAIL" }
        ));
    };

    // zero average of the fractional Laplacian over a negative interval of
    // the canonical profile
    {
        let params = ProblemParams::new(0.5, 4.0, 0.25, 1)?;
        let u = TwoSlopeProfile::build_canonical(params)?;
        let k = KernelExponent::new(0.5)?;
        let v = frac_laplacian_avg(&u, (-0.25, 0.0), &k, 1e-8)?;
        let ok = v.value.abs() <= v.tail_bound + 1e-7;
        check("zero-average", ok, format!("|integral| = {:.3e}", v.value.abs()));
    }

    // closed-form pair energies against quadrature on random disjoint pairs
    {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let la = rng.gen_range(0.1..1.5);
            let lb = rng.gen_range(0.1..1.5);
            let gap = rng.gen_range(0.05..5.0);
            let a = Segment::new(0.0, la, rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0))?;
            let b = Segment::new(
                la + gap,
                la + gap + lb,
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-3.0..3.0),
            )?;
            let s = rng.gen_range(0.05..0.95);
            let k = KernelExponent::new(s)?;
            let closed = segment_pair_energy(&a, &b, &k, true)?;
            let scale = closed.abs().max(1.0);
            let oracle = quadrature_oracle(&a, &b, &k, 1e-9 * scale)?;
            worst = worst.max((closed - oracle).abs() / scale);
        }
        check("oracle-equivalence", worst <= 1e-7, format!("worst rel = {worst:.3e}"));
    }

    // the constant-sum identity behind the sigma normalizer
    {
        let mut worst: f64 = 0.0;
        for i in 0..50 {
            let s = 0.51 + 0.48 * (i as f64 + 0.5) / 50.0;
            let lhs = 1.0 / (2.0 * (1.0 - s) * (3.0 - 2.0 * s))
                + 1.0 / (s * (3.0 - 2.0 * s))
                + 1.0 / (2.0 * s * (2.0 * s - 1.0));
            let prod = lhs * 2.0 * s * (1.0 - s) * (2.0 * s - 1.0) * (3.0 - 2.0 * s);
            worst = worst.max((prod - 1.0).abs());
        }
        check("constant-sum", worst <= 1e-12, format!("worst |err| = {worst:.3e}"));
    }

    // stationarity of the canonical profile
    {
        let params = ProblemParams::new(0.6, 2.0, 0.2, 2)?;
        let u = TwoSlopeProfile::build_canonical(params)?;
        let fv = first_variation(&u, 0, 0.6)?;
        check("stationarity", fv.abs() <= 1e-7, format!("|dE| = {:.3e}", fv.abs()));
    }

    // extremal constants
    {
        let rep = extremal_limits(&[0.5, 1e-3])?;
        let s1_ok = rep.rows.iter().all(|r| (r.delta_s1_value - 0.5).abs() <= 1e-12);
        let s0_ok = rep.rows.iter().all(|r| (r.s0_value - 1.0 / 24.0).abs() <= 1e-9);
        check("extremal-constants", s1_ok && s0_ok, "1/2 and 1/24".into());
    }

    // sigma sanity
    {
        let ok = (sigma(0.5, 1e-3)? - 1000f64.ln()).abs() <= 1e-14
            && (sigma(0.75, 1e-4)? - 100.0 / 0.28125).abs() <= 1e-10;
        check("sigma-values", ok, "log(1/delta), power law".into());
    }

    // s = 1 extremal on a non-canonical profile
    {
        let params = ProblemParams::new(0.5, 5.0, 0.2, 2)?;
        let u = TwoSlopeProfile::build_canonical(params)?;
        let ok = (params.delta * energy_s1(&u) * 2.0 - 1.0).abs() <= 1e-12;
        check("s1-constant", ok, "delta * F_1 = 1/2".into());
    }

    if !all_ok {
        out.push_str("selftest: FAILED\n");
        print!("{out}");
        std::process::exit(3);
    }
    out.push_str("selftest: ok");
    Ok(out)
}
