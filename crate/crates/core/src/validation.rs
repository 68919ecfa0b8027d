//! Finite-difference checks of the potential theory: impulses are negative
//! gradients of the costs, impulse Jacobians are symmetric (curl-free), and
//! Hessians are positive semi-definite.
//!
//! Sampling is deterministic given a seed, so any failure reported here can
//! be reproduced from the report alone.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::normal::{DiscreteNormal, NormalLaw};
use crate::potentials::{naive_impulse, ContactData, FrictionParams, ModelId, PotentialEval, SapParams};

/// Relative-error guard for vanishing impulses.
pub const ERROR_FLOOR: f64 = 1e-12;
/// Boundary margin around kinks, in units of the FD step.
pub const KINK_MARGIN_STEPS: f64 = 10.0;
/// Relative PSD tolerance, `λ_min ≥ −tol·‖H‖`.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Uniform central-difference step for a point `x`, `1e−6·max(1, ‖x‖)`.
pub fn fd_step(x: &DVector<f64>) -> f64 {
    1e-6 * x.norm().max(1.0)
}

/// Per-coordinate FD steps for a contact velocity.
///
/// A single step sized by `‖v_c‖` cannot resolve the soft-norm curvature
/// when `‖v_t‖ ~ ε_s ≪ |v_n|`, so tangential steps scale with
/// `sqrt(‖v_t‖² + ε_s²)` and the normal step with `max(|v_n|, |v̂|)`. Along
/// the normal the fields are piecewise polynomial, so the five-point stencil
/// is exact there and only roundoff matters.
/// SAP's sliding branch has no regularization, so its tangential scale is
/// the slip itself.
pub fn contact_fd_steps(field: FieldId, data: &ContactData, v_c: &DVector<f64>) -> DVector<f64> {
    let m = data.tangent_dim();
    let slip = v_c.rows(0, m).norm();
    let eps = match field {
        FieldId::Model(ModelId::Sap) => 1e-12,
        _ => data.stiction_tolerance(),
    };
    let h_t = 1e-2 * (slip * slip + eps * eps).sqrt();
    let h_n = 1e-4 * v_c[m].abs().max(data.hunt_crossley().v_hat().abs()).max(1e-8);
    let mut h = DVector::from_element(data.dim, h_t);
    h[m] = h_n;
    h
}

/// Impulse fields that can be checked: the three models and the naive
/// coupled field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldId {
    Model(ModelId),
    Naive,
}

impl FieldId {
    pub const ALL: [FieldId; 5] = [
        FieldId::Model(ModelId::Sap),
        FieldId::Model(ModelId::Lagged),
        FieldId::Model(ModelId::LaggedRegularized),
        FieldId::Model(ModelId::Similar),
        FieldId::Naive,
    ];

    fn impulse(&self, data: &ContactData, v_c: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            FieldId::Model(m) => Ok(m.contact_model().eval(data, v_c)?.gamma),
            FieldId::Naive => Ok(naive_impulse(data, v_c)),
        }
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldId::Model(m) => write!(f, "{m}"),
            FieldId::Naive => f.write_str("naive"),
        }
    }
}

impl FromStr for FieldId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "naive" {
            Ok(FieldId::Naive)
        } else {
            Ok(FieldId::Model(s.parse()?))
        }
    }
}

/// Contact-velocity regime a sample was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Stiction,
    Sliding,
    Approach,
    Separation,
}

impl Regime {
    const CYCLE: [Regime; 4] = [Regime::Stiction, Regime::Sliding, Regime::Approach, Regime::Separation];
}

/// Deterministic description of the sampled contact states.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec {
    pub samples: usize,
    pub seed: u64,
    /// World dimensions to cycle through (2, 3 or both).
    pub dims: Vec<usize>,
    /// Log-uniform speed range, m/s.
    pub speed_range: (f64, f64),
    /// Uniform range of the start-of-step penetration, m.
    pub x0_range: (f64, f64),
    /// Regimes to cycle through.
    pub regimes: Vec<Regime>,
    /// Overrides the sampled Hunt & Crossley dissipation (may be invalid,
    /// e.g. negative, to probe the checks themselves).
    pub dissipation: Option<f64>,
}

impl SamplingSpec {
    /// 10⁴ states, speeds log-uniform in [1e−6, 10] m/s, x0 ∈ [0, 1e−3] m.
    pub fn canonical(seed: u64) -> Self {
        Self {
            samples: 10_000,
            seed,
            dims: vec![2, 3],
            speed_range: (1e-6, 10.0),
            x0_range: (0.0, 1e-3),
            regimes: Regime::CYCLE.to_vec(),
            dissipation: None,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_regimes(mut self, regimes: &[Regime]) -> Self {
        self.regimes = regimes.to_vec();
        self
    }

    pub fn with_dissipation(mut self, d: f64) -> Self {
        self.dissipation = Some(d);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("samples", "at least one sample is required"));
        }
        if self.dims.is_empty() || self.dims.iter().any(|d| *d != 2 && *d != 3) {
            return Err(invalid("dims", "dimensions must be 2 or 3"));
        }
        if self.regimes.is_empty() {
            return Err(invalid("regimes", "at least one regime is required"));
        }
        let (lo, hi) = self.speed_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid("speed_range", "expected 0 < lo <= hi"));
        }
        Ok(())
    }
}

/// One sampled contact state.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub data: ContactData,
    pub v_c: DVector<f64>,
    pub regime: Regime,
}

/// Worst sample of a check.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub check: &'static str,
    pub value: f64,
    pub v_c: DVector<f64>,
    pub data: ContactData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub field: String,
    pub seed: u64,
    pub samples: usize,
    pub max_gradient_error: f64,
    pub max_hessian_error: f64,
    pub max_curl_asymmetry: f64,
    /// Smallest asymmetry over the samples; the naive field is expected to
    /// keep this bounded away from zero on sliding states.
    pub min_curl_asymmetry: f64,
    pub min_hessian_eigenvalue: f64,
    /// `min λ_min/‖H‖` over samples with a non-zero Hessian.
    pub min_relative_eigenvalue: f64,
    pub worst_cases: Vec<WorstCase>,
}

impl ValidationReport {
    fn empty(field: String, seed: u64) -> Self {
        Self {
            field,
            seed,
            samples: 0,
            max_gradient_error: 0.0,
            max_hessian_error: 0.0,
            max_curl_asymmetry: 0.0,
            min_curl_asymmetry: f64::INFINITY,
            min_hessian_eigenvalue: f64::INFINITY,
            min_relative_eigenvalue: f64::INFINITY,
            worst_cases: Vec::new(),
        }
    }

    pub fn psd_pass(&self) -> bool {
        self.min_relative_eigenvalue >= -PSD_TOLERANCE
    }

    /// Flat `key=value` lines, one per field.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        line("field", self.field.clone());
        line("seed", self.seed.to_string());
        line("samples", self.samples.to_string());
        line("max_gradient_error", format!("{:e}", self.max_gradient_error));
        line("max_hessian_error", format!("{:e}", self.max_hessian_error));
        line("max_curl_asymmetry", format!("{:e}", self.max_curl_asymmetry));
        line("min_curl_asymmetry", format!("{:e}", finite_or_zero(self.min_curl_asymmetry)));
        line("min_hessian_eigenvalue", format!("{:e}", finite_or_zero(self.min_hessian_eigenvalue)));
        line("min_relative_eigenvalue", format!("{:e}", finite_or_zero(self.min_relative_eigenvalue)));
        line("psd_pass", self.psd_pass().to_string());
        for w in &self.worst_cases {
            let v: Vec<String> = w.v_c.iter().map(|x| format!("{x:e}")).collect();
            line(&format!("worst_{}_value", w.check), format!("{:e}", w.value));
            line(&format!("worst_{}_v_c", w.check), v.join(","));
            line(&format!("worst_{}_contact", w.check), describe(&w.data));
        }
        out
    }
}

fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

fn describe(data: &ContactData) -> String {
    let hc = data.hunt_crossley();
    format!(
        "dim:{} k:{:e} d:{:e} x0:{:e} dt:{:e} mu:{} v_s:{:e} sigma:{:e} tau_d:{:e} gamma_n0:{:e} w:{:e} regularize:{}",
        data.dim,
        hc.k(),
        hc.d(),
        hc.x0(),
        hc.dt(),
        data.fp.mu,
        data.fp.v_s,
        data.fp.sigma,
        data.fp.tau_d,
        data.gamma_n0,
        data.w,
        data.fp.regularize_impacts
    )
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn random_direction(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    if m == 1 {
        DVector::from_element(1, if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
    } else {
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        DVector::from_column_slice(&[angle.cos(), angle.sin()])
    }
}

fn random_data(rng: &mut ChaCha8Rng, spec: &SamplingSpec, dim: usize, field: FieldId) -> Result<ContactData> {
    let k = log_uniform(rng, 1e3, 1e8);
    let d = match spec.dissipation {
        Some(d) => d,
        None if rng.gen_bool(0.25) => 0.0,
        None => log_uniform(rng, 1e-2, 1e3),
    };
    let dt = log_uniform(rng, 1e-4, 1e-2);
    let x0 = rng.gen_range(spec.x0_range.0..=spec.x0_range.1);
    let tau_d = if rng.gen_bool(0.25) { 0.0 } else { log_uniform(rng, 1e-5, 1e-2) };
    let fp = FrictionParams {
        mu: rng.gen_range(0.1..1.5),
        v_s: log_uniform(rng, 1e-5, 1e-2),
        sigma: 1e-3,
        tau_d,
        regularize_impacts: matches!(field, FieldId::Model(ModelId::LaggedRegularized)),
    };
    let w = log_uniform(rng, 0.1, 10.0);
    let gamma_n0 = dt * k * x0 * rng.gen_range(0.5..1.5);
    let normal = DiscreteNormal::new(NormalLaw::HuntCrossley { k, d }, x0, dt)?;
    if spec.dissipation.is_some() {
        ContactData::new_unchecked(normal, fp, gamma_n0, w, dim)
    } else {
        ContactData::new(normal, fp, gamma_n0, w, dim)
    }
}

/// Active-region velocity threshold of the normal impulse for this field.
fn normal_threshold(field: FieldId, data: &ContactData) -> Result<f64> {
    Ok(match field {
        FieldId::Model(ModelId::Sap) => SapParams::new(data)?.v_hat,
        _ => data.hunt_crossley().v_hat(),
    })
}

fn random_velocity(rng: &mut ChaCha8Rng, spec: &SamplingSpec, data: &ContactData, field: FieldId, regime: Regime) -> Result<DVector<f64>> {
    let m = data.tangent_dim();
    let (lo, hi) = spec.speed_range;
    let eps = data.stiction_tolerance();
    let v_hat = normal_threshold(field, data)?;
    let slip = match regime {
        Regime::Stiction => log_uniform(rng, lo.min(eps), eps),
        Regime::Sliding => log_uniform(rng, eps.min(hi), hi),
        _ => log_uniform(rng, lo, hi),
    };
    let v_n = match regime {
        Regime::Stiction | Regime::Sliding => v_hat - log_uniform(rng, lo, hi),
        Regime::Approach => -log_uniform(rng, lo, hi),
        Regime::Separation => v_hat.max(0.0) + log_uniform(rng, lo, hi),
    };
    let mut v_c = DVector::zeros(data.dim);
    v_c.rows_mut(0, m).copy_from(&(slip * random_direction(rng, m)));
    v_c[m] = v_n;
    Ok(v_c)
}

/// Distance, in velocity space, from `v_c` to the nearest non-smooth point of
/// the field.
pub fn distance_to_kink(field: FieldId, data: &ContactData, v_c: &DVector<f64>) -> Result<f64> {
    let m = data.tangent_dim();
    let slip = v_c.rows(0, m).norm();
    let v_n = v_c[m];
    let mu = data.fp.mu;
    let grad = (1.0 + mu * mu).sqrt();
    Ok(match field {
        FieldId::Model(ModelId::Sap) => {
            let p = SapParams::new(data)?;
            // ‖y_t‖ = μ·y_n and y_n = −μ̂‖y_t‖, both written in velocity space.
            let stick = (slip / p.r_t - mu * (p.v_hat - v_n) / p.r_n).abs() / (1.0 / (p.r_t * p.r_t) + mu * mu / (p.r_n * p.r_n)).sqrt();
            let separate = (p.v_hat - v_n + mu * slip).abs() / grad;
            stick.min(separate)
        }
        FieldId::Model(ModelId::Similar) => {
            let z = v_n - mu * crate::soft::SoftNorm::new(data.stiction_tolerance())?.norm(&v_c.rows(0, m).into_owned());
            (z - data.hunt_crossley().v_hat()).abs() / grad
        }
        _ => (v_n - data.hunt_crossley().v_hat()).abs(),
    })
}

/// Draws `spec.samples` states, rejecting any closer than the kink margin to a
/// non-smooth point of `field`.
pub fn sample_states(field: FieldId, spec: &SamplingSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.samples);
    let mut attempts = 0usize;
    while out.len() < spec.samples {
        attempts += 1;
        if attempts > 100 * spec.samples + 1000 {
            return Err(invalid("sampling", "could not draw states away from kinks"));
        }
        let i = out.len();
        let dim = spec.dims[i % spec.dims.len()];
        let regime = spec.regimes[i % spec.regimes.len()];
        let data = random_data(&mut rng, spec, dim, field)?;
        let v_c = random_velocity(&mut rng, spec, &data, field, regime)?;
        let h = contact_fd_steps(field, &data, &v_c).max();
        if distance_to_kink(field, &data, &v_c)? <= KINK_MARGIN_STEPS * h {
            continue;
        }
        out.push(Sample { data, v_c, regime });
    }
    Ok(out)
}

/// Five-point central-difference derivative of `f` along coordinate `i`.
fn directional<T>(f: &impl Fn(&DVector<f64>) -> T, x: &DVector<f64>, i: usize, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let at = |offset: f64| {
        let mut y = x.clone();
        y[i] += offset * h;
        f(&y)
    };
    // (−f(2h) + 8f(h) − 8f(−h) + f(−2h)) / 12h
    let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
    ((p1 - m1) * 8.0 + (m2 - p2)) * (1.0 / (12.0 * h))
}

/// Fourth-order central-difference gradient with per-coordinate steps `h`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| directional(&f, x, i, h[i]))
}

/// Fourth-order central-difference Jacobian `∂g_i/∂x_j` with per-coordinate
/// steps `h`.
pub fn fd_jacobian(g: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        jac.set_column(j, &directional(&g, x, j, h[j]));
    }
    jac
}

/// `‖J − Jᵀ‖_F / ‖J‖_F`, zero for a vanishing Jacobian.
pub fn relative_asymmetry(jac: &DMatrix<f64>) -> f64 {
    let norm = jac.norm();
    if norm == 0.0 {
        0.0
    } else {
        (jac - jac.transpose()).norm() / norm
    }
}

fn eval(model: ModelId, s: &Sample) -> Result<PotentialEval> {
    model.contact_model().eval(&s.data, &s.v_c)
}

#[derive(Debug, Clone, Copy, Default)]
struct SampleMetrics {
    gradient_error: f64,
    hessian_error: f64,
    asymmetry: f64,
    min_eigenvalue: f64,
    relative_eigenvalue: f64,
}

fn gradient_error(model: ModelId, s: &Sample) -> Result<f64> {
    let e = eval(model, s)?;
    let fd = fd_gradient(
        |v| model.contact_model().eval(&s.data, v).map(|e| e.cost).unwrap_or(f64::NAN),
        &s.v_c,
        &contact_fd_steps(FieldId::Model(model), &s.data, &s.v_c),
    );
    Ok((fd + &e.gamma).norm() / e.gamma.norm().max(ERROR_FLOOR))
}

fn hessian_error(model: ModelId, s: &Sample) -> Result<f64> {
    let e = eval(model, s)?;
    let jac = impulse_jacobian(FieldId::Model(model), s);
    Ok((jac + &e.hessian).norm() / e.hessian.norm().max(ERROR_FLOOR))
}

fn impulse_jacobian(field: FieldId, s: &Sample) -> DMatrix<f64> {
    fd_jacobian(
        |v| field.impulse(&s.data, v).unwrap_or_else(|_| DVector::from_element(v.len(), f64::NAN)),
        &s.v_c,
        &contact_fd_steps(field, &s.data, &s.v_c),
    )
}

fn eigen_metrics(model: ModelId, s: &Sample) -> Result<(f64, f64)> {
    let h = eval(model, s)?.hessian;
    let norm = h.norm();
    let min = SymmetricEigen::new(h).eigenvalues.min();
    let rel = if norm > 0.0 { min / norm } else { 0.0 };
    Ok((min, rel))
}

fn reduce(field: FieldId, seed: u64, samples: &[Sample], metrics: Vec<SampleMetrics>, checks: Checks) -> ValidationReport {
    let mut report = ValidationReport::empty(field.to_string(), seed);
    report.samples = samples.len();
    let mut worst: [(f64, usize); 4] = [(f64::NEG_INFINITY, 0); 4];
    for (i, m) in metrics.iter().enumerate() {
        report.max_gradient_error = report.max_gradient_error.max(m.gradient_error);
        report.max_hessian_error = report.max_hessian_error.max(m.hessian_error);
        report.max_curl_asymmetry = report.max_curl_asymmetry.max(m.asymmetry);
        report.min_curl_asymmetry = report.min_curl_asymmetry.min(m.asymmetry);
        report.min_hessian_eigenvalue = report.min_hessian_eigenvalue.min(m.min_eigenvalue);
        report.min_relative_eigenvalue = report.min_relative_eigenvalue.min(m.relative_eigenvalue);
        let scores = [m.gradient_error, m.hessian_error, m.asymmetry, -m.relative_eigenvalue];
        for (w, score) in worst.iter_mut().zip(scores) {
            if score > w.0 {
                *w = (score, i);
            }
        }
    }
    let names = ["gradient", "hessian", "curl", "psd"];
    let enabled = [checks.gradient, checks.hessian, checks.curl, checks.psd];
    for ((name, on), (value, i)) in names.iter().zip(enabled).zip(worst) {
        if on && !samples.is_empty() {
            report.worst_cases.push(WorstCase {
                check: name,
                value: if *name == "psd" { -value } else { value },
                v_c: samples[i].v_c.clone(),
                data: samples[i].data.clone(),
            });
        }
    }
    if !checks.curl {
        report.min_curl_asymmetry = 0.0;
    }
    if !checks.psd {
        report.min_hessian_eigenvalue = 0.0;
        report.min_relative_eigenvalue = 0.0;
    }
    report
}

#[derive(Debug, Clone, Copy)]
struct Checks {
    gradient: bool,
    hessian: bool,
    curl: bool,
    psd: bool,
}

fn run_checks(field: FieldId, samples: &[Sample], seed: u64, checks: Checks, exec: Execution) -> Result<ValidationReport> {
    let model = match field {
        FieldId::Model(m) => Some(m),
        FieldId::Naive => None,
    };
    if model.is_none() && (checks.gradient || checks.hessian || checks.psd) {
        return Err(Error::UnsupportedLaw { op: "potential checks", law: "naive coupled field (no potential)" });
    }
    let results = exec::map(exec, samples, |s| -> Result<SampleMetrics> {
        let mut m = SampleMetrics::default();
        if let Some(model) = model {
            if checks.gradient {
                m.gradient_error = gradient_error(model, s)?;
            }
            if checks.hessian {
                m.hessian_error = hessian_error(model, s)?;
            }
            if checks.psd {
                (m.min_eigenvalue, m.relative_eigenvalue) = eigen_metrics(model, s)?;
            }
        }
        if checks.curl {
            m.asymmetry = relative_asymmetry(&impulse_jacobian(field, s));
        }
        Ok(m)
    });
    let metrics = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(reduce(field, seed, samples, metrics, checks))
}

/// `max ‖FD∇ℓ + γ‖ / max(‖γ‖, floor)` over the samples.
pub fn check_gradient(model: ModelId, samples: &[Sample], seed: u64, exec: Execution) -> Result<ValidationReport> {
    run_checks(FieldId::Model(model), samples, seed, Checks { gradient: true, hessian: false, curl: false, psd: false }, exec)
}

/// `max ‖FD∂γ/∂v + G‖_F / max(‖G‖_F, floor)` over the samples.
pub fn check_hessian(model: ModelId, samples: &[Sample], seed: u64, exec: Execution) -> Result<ValidationReport> {
    run_checks(FieldId::Model(model), samples, seed, Checks { gradient: false, hessian: true, curl: false, psd: false }, exec)
}

/// `max ‖J − Jᵀ‖_F/‖J‖_F` of the FD impulse Jacobian over the samples.
pub fn check_curl(field: FieldId, samples: &[Sample], seed: u64, exec: Execution) -> Result<ValidationReport> {
    run_checks(field, samples, seed, Checks { gradient: false, hessian: false, curl: true, psd: false }, exec)
}

/// Smallest Hessian eigenvalue over the samples.
pub fn check_psd(model: ModelId, samples: &[Sample], seed: u64, exec: Execution) -> Result<ValidationReport> {
    run_checks(FieldId::Model(model), samples, seed, Checks { gradient: false, hessian: false, curl: false, psd: true }, exec)
}

/// Samples `spec` and runs every check that applies to `field`.
pub fn validate(field: FieldId, spec: &SamplingSpec, exec: Execution) -> Result<ValidationReport> {
    let samples = sample_states(field, spec)?;
    let is_model = matches!(field, FieldId::Model(_));
    run_checks(field, &samples, spec.seed, Checks { gradient: is_model, hessian: is_model, curl: true, psd: is_model }, exec)
}

/// Frictionless barrier potential checked by quadrature: `N` is integrated
/// from `n`, then its slope and curvature are compared against the impulse.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub law: &'static str,
    /// `max |N'(v) − n(v)| / max(|n(v)|, floor)` with `N` from quadrature.
    pub max_derivative_error: f64,
    /// Smallest second difference of the cost `−N` (convexity certificate).
    pub min_second_difference: f64,
    pub samples: usize,
}

/// Composite Gauss–Legendre quadrature of `f` on `[a, b]`.
fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const WEIGHTS: [f64; 5] =
        [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * width;
            let mid = lo + 0.5 * width;
            NODES.iter().zip(WEIGHTS).map(|(x, w)| w * f(mid + 0.5 * width * x)).sum::<f64>() * 0.5 * width
        })
        .sum()
}

/// Checks a barrier law over `[v_lo, v_hi]`, a velocity interval inside the
/// barrier's domain (`x0 − δt·v < 0`).
pub fn check_barrier(law: NormalLaw, x0: f64, dt: f64, v_lo: f64, v_hi: f64, samples: usize) -> Result<BarrierReport> {
    law.validate()?;
    if matches!(law, NormalLaw::HuntCrossley { .. }) {
        return Err(Error::UnsupportedLaw { op: "check_barrier", law: law.name() });
    }
    let dn = DiscreteNormal::new(law, x0, dt)?;
    let n = |v: f64| dn.impulse(v).unwrap_or(f64::NAN);
    // N(v) = ∫_{v_lo}^{v} n
    let big_n = |v: f64| integrate(&n, v_lo, v, 64);
    let mut report = BarrierReport { law: law.name(), max_derivative_error: 0.0, min_second_difference: f64::INFINITY, samples: 0 };
    let span = v_hi - v_lo;
    for i in 1..samples {
        let v = v_lo + span * i as f64 / samples as f64;
        let h = 1e-4 * span;
        if v - h <= v_lo || v + h >= v_hi {
            continue;
        }
        let slope = (big_n(v + h) - big_n(v - h)) / (2.0 * h);
        let exact = n(v);
        let err = (slope - exact).abs() / exact.abs().max(ERROR_FLOOR);
        report.max_derivative_error = report.max_derivative_error.max(err);
        let cost = |u: f64| -big_n(u);
        let second = (cost(v + h) - 2.0 * cost(v) + cost(v - h)) / (h * h);
        report.min_second_difference = report.min_second_difference.min(second);
        report.samples += 1;
    }
    if report.samples == 0 || report.max_derivative_error.is_nan() {
        return Err(invalid("barrier interval", "no samples inside the barrier domain"));
    }
    Ok(report)
}
