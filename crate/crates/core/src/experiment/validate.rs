use std::fmt;

use num_complex::Complex64;

use super::config::ExperimentConfig;
use crate::allocator::{gradient, objective, optimize, project_simplex, OptimizerConfig};
use crate::capacity::{exact_det_expectation, mc_det_expectation, PowerAllocation, SnrSpec};
use crate::channel::{fit_marginals, CouplingModel};
use crate::numerics::{CMatrix, RngStream};
use crate::permanent::{extended_permanent, permanent_exact, permanent_ryser, RealMatrix};

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Trials per determinant-expectation check.
    pub n_trials: usize,
    /// Negative control: skews Ryser results so the permanent suite fails.
    pub perturb_ryser: bool,
}

impl From<&ExperimentConfig> for ValidateOptions {
    fn from(cfg: &ExperimentConfig) -> Self {
        Self {
            seed: cfg.seed,
            n_trials: cfg.n_trials,
            perturb_ryser: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub suites: Vec<SuiteResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            let tag = if s.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", s.name, s.detail)?;
        }
        let failed = self.suites.iter().filter(|s| !s.passed).count();
        write!(f, "{} suites, {failed} failed", self.suites.len())
    }
}

fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.uniform()).collect())
        .expect("uniform draws are valid entries")
}

/// Random coupling model whose `Ω` is fitted to random marginal profiles
/// with total `Nt·Nr`. With `specular`, half of the `(1,1)` power becomes a
/// mean component with a random phase.
pub fn random_coupling(rng: &mut RngStream, nr: usize, nt: usize, specular: bool) -> CouplingModel {
    let total = (nr * nt) as f64;
    let profile = |rng: &mut RngStream, n: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| 0.2 + rng.uniform()).collect();
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s * total).collect()
    };
    let rows = profile(rng, nr);
    let cols = profile(rng, nt);
    let mut omega: Vec<f64> = (0..nr * nt).map(|_| 0.1 + rng.uniform()).collect();
    fit_marginals(&mut omega, &rows, &cols).expect("positive start converges");
    let mut d = CMatrix::zeros(nr, nt);
    if specular {
        let phase = 2.0 * std::f64::consts::PI * rng.uniform();
        d[(0, 0)] = Complex64::from_polar((0.5 * omega[0]).sqrt(), phase);
        omega[0] *= 0.5;
    }
    let m = RealMatrix::new(nr, nt, omega.iter().map(|v| v.sqrt()).collect())
        .expect("fitted entries are nonnegative");
    CouplingModel::from_parts(d, m).expect("shapes agree")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn suite_permanent(opts: &ValidateOptions) -> SuiteResult {
    let mut rng = RngStream::new(opts.seed, 101);
    let mut worst = 0.0_f64;
    for k in 0..200 {
        let n = 1 + k % 7;
        let a = random_matrix(&mut rng, n, n);
        let mut fast = permanent_ryser(&a).expect("order within limit");
        if opts.perturb_ryser {
            fast *= 1.0 + 1e-9;
        }
        worst = worst.max(rel(fast, permanent_exact(&a).expect("order within limit")));
    }
    SuiteResult {
        name: "permanent-equivalence",
        passed: worst <= 1e-12,
        detail: format!("200 matrices, worst relative error {worst:.2e} (limit 1e-12)"),
    }
}

fn suite_transpose(opts: &ValidateOptions) -> SuiteResult {
    let mut rng = RngStream::new(opts.seed, 102);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let rows = 1 + (rng.uniform() * 6.0) as usize;
        let cols = 1 + (rng.uniform() * 8.0) as usize;
        let a = random_matrix(&mut rng, rows, cols);
        worst = worst.max(rel(extended_permanent(&a), extended_permanent(&a.transpose())));
    }
    SuiteResult {
        name: "transpose-identity",
        passed: worst <= 1e-10,
        detail: format!("100 matrices, worst relative error {worst:.2e} (limit 1e-10)"),
    }
}

fn suite_det_expectation(opts: &ValidateOptions) -> SuiteResult {
    let mut rng = RngStream::new(opts.seed, 103);
    let cases = [(2, 3, false), (3, 3, false), (3, 2, true)];
    let mut worst = 0.0_f64;
    for (k, &(nr, nt, specular)) in cases.iter().enumerate() {
        let model = random_coupling(&mut rng, nr, nt, specular);
        let snr = SnrSpec::from_linear(0.5 * nt as f64, nt).expect("positive SNR");
        let alloc = PowerAllocation::equal(nt);
        let root = RngStream::new(opts.seed, 1030 + k as u64);
        let mc = mc_det_expectation(&model, &alloc, snr, opts.n_trials, &root)
            .expect("valid model");
        let exact = exact_det_expectation(&model, &alloc, snr).expect("valid model");
        worst = worst.max((mc.mean_bits - exact).abs() / mc.std_error);
    }
    SuiteResult {
        name: "determinant-expectation",
        passed: worst <= 3.0,
        detail: format!(
            "{} models, {} trials each, worst deviation {worst:.2} standard errors (limit 3)",
            cases.len(),
            opts.n_trials
        ),
    }
}

fn suite_gradient(opts: &ValidateOptions) -> SuiteResult {
    let mut rng = RngStream::new(opts.seed, 104);
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let omega = random_matrix(&mut rng, 3, 4).scaled(4.0);
        let raw: Vec<f64> = (0..4).map(|_| 0.3 + rng.uniform()).collect();
        let s: f64 = raw.iter().sum();
        let lambda: Vec<f64> = raw.iter().map(|v| v / s * 4.0).collect();
        let gamma = 0.1 + 2.0 * rng.uniform();
        let g = gradient(&omega, &lambda, gamma).expect("shapes agree");
        for i in 0..4 {
            let mut up = lambda.clone();
            let mut down = lambda.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (objective(&omega, &up, gamma).unwrap()
                - objective(&omega, &down, gamma).unwrap())
                / (2.0 * h);
            worst = worst.max(rel(g[i], fd));
        }
    }
    SuiteResult {
        name: "gradient-finite-difference",
        passed: worst <= 1e-6,
        detail: format!("20 points, worst relative error {worst:.2e} (limit 1e-6)"),
    }
}

fn suite_projection(opts: &ValidateOptions) -> SuiteResult {
    let mut rng = RngStream::new(opts.seed, 105);
    let mut failures = 0;
    let mut worst_sum = 0.0_f64;
    for _ in 0..50 {
        let n = 2 + (rng.uniform() * 7.0) as usize;
        let budget = n as f64;
        let z: Vec<f64> = (0..n).map(|_| 3.0 * rng.standard_normal()).collect();
        let p = project_simplex(&z, budget);
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - budget).abs());
        if p.iter().any(|&v| v < 0.0) {
            failures += 1;
        }
        let dist = |y: &[f64]| -> f64 {
            z.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let dp = dist(&p);
        for _ in 0..1000 {
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.uniform()).ln()).collect();
            let s: f64 = e.iter().sum();
            let y: Vec<f64> = e.iter().map(|v| v / s * budget).collect();
            if dp > dist(&y) + 1e-12 {
                failures += 1;
            }
        }
    }
    SuiteResult {
        name: "projection-optimality",
        passed: failures == 0 && worst_sum <= 1e-12,
        detail: format!(
            "50 points x 1000 feasible competitors, {failures} violations, worst budget error {worst_sum:.1e}"
        ),
    }
}

fn suite_kkt(opts: &ValidateOptions) -> SuiteResult {
    let mut rng = RngStream::new(opts.seed, 106);
    let mut worst = 0.0_f64;
    let mut unconverged = 0;
    for _ in 0..5 {
        let model = random_coupling(&mut rng, 4, 4, false);
        let snr = SnrSpec::from_linear(10.0, 4).expect("positive SNR");
        let res = optimize(&model.omega, snr, &OptimizerConfig::default()).expect("valid input");
        worst = worst.max(res.kkt.max_violation);
        if !res.converged {
            unconverged += 1;
        }
    }
    SuiteResult {
        name: "kkt-residual",
        passed: worst <= 1e-5 && unconverged == 0,
        detail: format!(
            "5 optimizer runs, worst violation {worst:.2e} (limit 1e-5), {unconverged} not converged"
        ),
    }
}

/// Runs every oracle suite.
pub fn run_validate(opts: &ValidateOptions) -> ValidationReport {
    ValidationReport {
        suites: vec![
            suite_permanent(opts),
            suite_transpose(opts),
            suite_det_expectation(opts),
            suite_gradient(opts),
            suite_projection(opts),
            suite_kkt(opts),
        ],
    }
}
