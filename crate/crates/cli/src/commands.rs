//! Subcommand bodies. Each returns a JSON report and whether its checks held.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use poset_mobius::blockdiag::sample_frequencies;
use poset_mobius::numlin::{care_residual, is_hurwitz, spectral_radius};
use poset_mobius::simulate::DEFAULT_TAPS;
use poset_mobius::synthesis::{restricted_care, uo_derivative_gap};
use poset_mobius::{
    assemble_closed_loop, check_block_diagonal, euler_discretize, optimal_gains, optimality_certificate,
    random_disturbances, separation_report, simulate_continuous, simulate_discrete, Algebra, Error, Gains, Poset,
    System, Trace, YoulaFilter,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::schema::input_positions;

pub const IDENTITY_TOL: f64 = 1e-12;
pub const CONSISTENCY_TOL: f64 = 1e-10;
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
pub const CERTIFICATE_TOL: f64 = 1e-6;
pub const RICCATI_TOL: f64 = 1e-8;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag values that do not fit the system.
    Usage(String),
    Numerical(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numerical(e)
    }
}

pub struct Report {
    pub json: Value,
    pub passed: bool,
}

impl Report {
    fn ok(json: Value) -> Self {
        Report { json, passed: true }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `m` with rows and columns moved back to listed order.
fn listed(poset: &Poset, m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let pos = input_positions(poset);
    let s = poset.len();
    (0..s).map(|r| (0..s).map(|c| m[(pos[r], pos[c])]).collect()).collect()
}

fn labels(poset: &Poset, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| poset.label(i).to_string()).collect()
}

fn spectrum(z: &[Complex<f64>]) -> Vec<[f64; 2]> {
    z.iter().map(|c| [c.re, c.im]).collect()
}

fn gains_json(poset: &Poset, gains: &Gains) -> Value {
    (0..poset.len())
        .map(|i| {
            json!({
                "element": poset.label(i),
                "support": labels(poset, gains.support(i)),
                "gain": rows(gains.gain(i)),
                "embedded": listed(poset, &gains.embedded(i)),
            })
        })
        .collect()
}

fn riccati_json(sys: &System) -> Result<(Value, bool), Failure> {
    let mut ok = true;
    let mut out = Vec::new();
    for (j, sol) in restricted_care(sys)?.iter().enumerate() {
        let (a, b, c, d) = sys.restriction(j);
        let residual = care_residual(&a, &b, &c, &d, &sol.p)?;
        let hurwitz = is_hurwitz(&(&a + &b * &sol.k), 0.0)?;
        ok &= residual < RICCATI_TOL && hurwitz;
        out.push(json!({
            "element": sys.poset().label(j),
            "residual": residual,
            "iterations": sol.iterations,
            "closure_hurwitz": hurwitz,
        }));
    }
    Ok((Value::Array(out), ok))
}

fn separation_json(sys: &System, gains: &Gains) -> Result<(Value, bool), Failure> {
    let rep = separation_report(sys, gains)?;
    let poset = sys.poset();
    let json = json!({
        "closed_loop_spectrum": spectrum(&rep.closed_loop),
        "restricted_spectra": poset
            .labels()
            .iter()
            .zip(&rep.restricted)
            .map(|(l, z)| json!({"element": l, "spectrum": spectrum(z)}))
            .collect::<Vec<_>>(),
        "max_distance": rep.max_distance,
        "tolerance": rep.tolerance,
        "matched": rep.matched,
        "stable": rep.stable,
        "unstable_elements": labels(poset, &rep.unstable_elements),
    });
    Ok((json, rep.matched && rep.stable))
}

pub fn synth(sys: &System) -> Result<Report, Failure> {
    let gains = optimal_gains(sys)?;
    let (riccati, _) = riccati_json(sys)?;
    let (separation, _) = separation_json(sys, &gains)?;
    Ok(Report::ok(json!({
        "elements": sys.poset().labels(),
        "gains": gains_json(sys.poset(), &gains),
        "riccati": riccati,
        "separation": separation,
    })))
}

pub fn h2(sys: &System) -> Result<Report, Failure> {
    let gains = optimal_gains(sys)?;
    let cert = optimality_certificate(sys, &gains)?;
    let passed = cert.relative_gap < CERTIFICATE_TOL;
    let columns: Vec<Value> = sys
        .poset()
        .labels()
        .iter()
        .zip(&cert.oracle.columns)
        .map(|(l, v)| json!({"element": l, "cost": v}))
        .collect();
    Ok(Report {
        json: json!({
            "closed_loop": cert.closed_loop,
            "oracle_total": cert.oracle.total,
            "oracle_columns": columns,
            "relative_gap": cert.relative_gap,
            "tolerance": CERTIFICATE_TOL,
            "passed": passed,
        }),
        passed,
    })
}

fn check(name: &str, value: f64, tolerance: f64) -> (Value, bool) {
    let passed = value < tolerance;
    (json!({"name": name, "value": value, "tolerance": tolerance, "passed": passed}), passed)
}

pub fn verify(sys: &System, seed: u64, samples: usize) -> Result<Report, Failure> {
    let poset = sys.poset();
    let alg: Algebra = sys.algebra();
    let s = poset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let member = |rng: &mut ChaCha8Rng| {
        DMatrix::from_fn(s, s, |r, c| if poset.in_incidence_pattern(r, c) { rng.gen_range(-1.0..1.0) } else { 0.0 })
    };

    let (mut inverse, mut projection, mut commute) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = member(&mut rng);
        let a = member(&mut rng);
        let full = DMatrix::from_fn(s, s, |_, _| rng.gen_range(-1.0..1.0));
        inverse = inverse
            .max((alg.zeta_local(&alg.mu_local(&x)) - &x).amax())
            .max((alg.mu_local(&alg.zeta_local(&x)) - &x).amax());
        projection = projection
            .max((alg.mu_local(&full) - alg.mu_local(&alg.project_d(&full))).amax())
            .max((alg.zeta_local(&full) - alg.zeta_local(&alg.project_d(&full))).amax());
        let completed = alg.complete_from_downstream(&x)?;
        let aggregated = &x * alg.mu().transpose();
        commute = commute
            .max((alg.mu_local(&(&a * &completed)) - &a * alg.mu_local(&completed)).amax())
            .max((alg.zeta_local(&(&a * &aggregated)) - &a * alg.zeta_local(&aggregated)).amax());
    }

    let gains = optimal_gains(sys)?;
    let mut gap = 0.0f64;
    for _ in 0..samples {
        let free = DMatrix::from_fn(s, s, |j, i| if poset.in_downstream_pattern(i, j) { rng.gen_range(-1.0..1.0) } else { 0.0 });
        gap = gap.max(uo_derivative_gap(sys, &gains, &free)?);
    }

    let mut checks = Vec::new();
    let mut passed = true;
    for (json, ok) in [
        check("local_operators_invert", inverse, IDENTITY_TOL),
        check("local_operators_ignore_upstream", projection, IDENTITY_TOL),
        check("members_commute_with_completed_variables", commute, IDENTITY_TOL),
        check("upstream_prediction_consistency", gap, CONSISTENCY_TOL),
    ] {
        checks.push(json);
        passed &= ok;
    }
    let (riccati, riccati_ok) = riccati_json(sys)?;
    checks.push(json!({"name": "riccati", "passed": riccati_ok, "solves": riccati}));
    let (separation, separation_ok) = separation_json(sys, &gains)?;
    checks.push(json!({"name": "separation", "passed": separation_ok, "report": separation}));
    passed &= riccati_ok && separation_ok;

    Ok(Report { json: json!({"seed": seed, "samples": samples, "checks": checks, "passed": passed}), passed })
}

pub fn blockdiag(sys: &System, freqs: usize, seed: u64) -> Result<Report, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigmas = sample_frequencies(&sys.a, freqs, &mut rng)?;
    let rep = check_block_diagonal(sys, &sigmas)?;
    let checks: Vec<Value> = rep
        .checks
        .iter()
        .map(|c| {
            json!({
                "sigma": [c.sigma.re, c.sigma.im],
                "max_off_diagonal": c.max_off_diagonal,
                "identity_error": c.identity_error,
                "passed": c.passed,
            })
        })
        .collect();
    Ok(Report {
        json: json!({"seed": seed, "tolerance": rep.tolerance, "checks": checks, "passed": rep.passed}),
        passed: rep.passed,
    })
}

fn write_trace(trace: &Trace<f64>, intervals: &[(usize, usize)], path: &Path) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    trace.write_csv(intervals, BufWriter::new(file))?;
    Ok(())
}

pub struct SimulateArgs<'a> {
    pub x0: Option<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub out: Option<&'a Path>,
}

/// Without an output path the CSV itself goes to `stdout` and no report is produced.
pub fn simulate(sys: &System, args: &SimulateArgs, stdout: &mut dyn Write) -> Result<Option<Report>, Failure> {
    let s = sys.states();
    let x0 = match &args.x0 {
        Some(v) if v.len() != s => return Err(Failure::Usage(format!("--x0 has {} entries, system has {s}", v.len()))),
        Some(v) => {
            let pos = input_positions(sys.poset());
            let mut x = vec![0.0; s];
            for (k, &val) in v.iter().enumerate() {
                x[pos[k]] = val;
            }
            x
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    };
    if !args.dt.is_finite() || args.dt <= 0.0 || args.horizon < args.dt {
        return Err(Failure::Usage("need --dt > 0 and --horizon ≥ --dt".into()));
    }
    let gains = optimal_gains(sys)?;
    let cl = assemble_closed_loop(sys, &gains)?;
    let trace = simulate_continuous(&cl, &cl.initial_state(&x0), |_| DVector::zeros(s), args.horizon, args.dt)?;
    let Some(path) = args.out else {
        trace.write_csv(&cl.intervals, stdout)?;
        return Ok(None);
    };
    write_trace(&trace, &cl.intervals, path)?;
    let last = trace.xd.last().expect("at least one sample");
    let mut prediction_error = 0.0f64;
    for (k, &(i, j)) in cl.intervals.iter().enumerate() {
        if i != j {
            let truth = cl.intervals.iter().position(|&iv| iv == (j, j)).expect("diagonal interval");
            prediction_error = prediction_error.max((last[k] - last[truth]).abs());
        }
    }
    Ok(Some(Report::ok(json!({
        "trace": path.display().to_string(),
        "rows": trace.len(),
        "horizon": args.horizon,
        "dt": args.dt,
        "x0_listed_order": input_positions(sys.poset()).iter().map(|&p| x0[p]).collect::<Vec<_>>(),
        "final_prediction_error": prediction_error,
    }))))
}

pub struct YoulaArgs<'a> {
    pub steps: usize,
    pub taps: usize,
    pub seed: u64,
    pub scale: f64,
    pub discrete: bool,
    pub out: Option<&'a Path>,
}

impl Default for YoulaArgs<'_> {
    fn default() -> Self {
        YoulaArgs { steps: 100, taps: DEFAULT_TAPS, seed: 0, scale: 0.3, discrete: false, out: None }
    }
}

pub fn youla(sys: &System, args: &YoulaArgs) -> Result<Report, Failure> {
    let (plant, h) = if args.discrete {
        if spectral_radius(&sys.a)? >= 1.0 {
            return Err(Failure::Numerical(Error::Contract("discrete A must have spectral radius below 1".into())));
        }
        (sys.clone(), None)
    } else {
        let (d, h) = euler_discretize(sys)?;
        (d, Some(h))
    };
    let s = plant.states();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let filter = YoulaFilter::random(plant.poset(), args.taps, args.scale, &mut rng);
    let x0 = DVector::from_fn(s, |_, _| rng.gen_range(-1.0..1.0));
    let w = random_disturbances::<f64>(s, args.steps, args.seed.wrapping_add(1));
    let run = simulate_discrete(&plant, &filter, &x0, &w)?;
    if let Some(path) = args.out {
        write_trace(&run.trace, &plant.poset().intervals(), path)?;
    }
    let passed = run.max_reconstruction_error < RECONSTRUCTION_TOL;
    Ok(Report {
        json: json!({
            "steps": args.steps,
            "taps": args.taps,
            "seed": args.seed,
            "euler_mapped": h.is_some(),
            "euler_step": h,
            "spectral_radius": spectral_radius(&plant.a)?,
            "max_reconstruction_error": run.max_reconstruction_error,
            "tolerance": RECONSTRUCTION_TOL,
            "trace": args.out.map(|p| p.display().to_string()),
            "passed": passed,
        }),
        passed,
    })
}
