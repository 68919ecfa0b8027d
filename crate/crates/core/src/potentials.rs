//! Per-contact convex potentials: cost, impulse and Hessian for the SAP,
//! Lagged and Similar models, plus the coupled field that has no potential.
//!
//! Contact velocities are ordered tangential components first and the normal
//! component last, `v_c = [v_t, v_n]`, with `v_n > 0` for separating motion.
//! Every model satisfies `γ = −∂ℓ/∂v_c` and `G = ∂²ℓ/∂v_c² ⪰ 0`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::normal::{DiscreteNormal, HuntCrossleyImpulse};
use crate::soft::{projection, projection_perp, SoftNorm};

/// Friction and regularization parameters shared by all models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParams {
    pub mu: f64,
    /// Stiction tolerance for the Lagged and Similar models, m/s.
    pub v_s: f64,
    /// Dimensionless tangential regularization (SAP and impact regularization).
    pub sigma: f64,
    /// SAP linear dissipation time scale, s.
    pub tau_d: f64,
    /// Widen the stiction tolerance during impacts, `max(v_s, σ·w·μ·γ_n0)`.
    pub regularize_impacts: bool,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self { mu: 0.5, v_s: 1e-4, sigma: 1e-3, tau_d: 0.0, regularize_impacts: false }
    }
}

impl FrictionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", format!("must be non-negative, got {}", self.mu)));
        }
        if !(self.v_s > 0.0 && self.v_s.is_finite()) {
            return Err(invalid("v_s", format!("must be positive, got {}", self.v_s)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.tau_d >= 0.0 && self.tau_d.is_finite()) {
            return Err(invalid("tau_d", format!("must be non-negative, got {}", self.tau_d)));
        }
        Ok(())
    }
}

/// Frozen per-contact state for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactData {
    pub normal: DiscreteNormal,
    pub fp: FrictionParams,
    /// Normal impulse of the matching contact at the previous step.
    pub gamma_n0: f64,
    /// Diagonal Delassus weight (effective inverse mass).
    pub w: f64,
    /// World dimension, 2 or 3.
    pub dim: usize,
    hc: HuntCrossleyImpulse,
}

impl ContactData {
    pub fn new(normal: DiscreteNormal, fp: FrictionParams, gamma_n0: f64, w: f64, dim: usize) -> Result<Self> {
        normal.law.validate()?;
        fp.validate()?;
        if !(gamma_n0 >= 0.0 && gamma_n0.is_finite()) {
            return Err(invalid("gamma_n0", format!("must be non-negative, got {gamma_n0}")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(invalid("w", format!("Delassus weight must be positive, got {w}")));
        }
        Self::new_unchecked(normal, fp, gamma_n0, w, dim)
    }

    /// Skips the parameter range checks; used to probe invalid laws in
    /// diagnostics. The law must still be Hunt & Crossley.
    pub fn new_unchecked(normal: DiscreteNormal, fp: FrictionParams, gamma_n0: f64, w: f64, dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(invalid("dim", format!("world dimension must be 2 or 3, got {dim}")));
        }
        let hc = normal.hunt_crossley()?;
        Ok(Self { normal, fp, gamma_n0, w, dim, hc })
    }

    pub fn hunt_crossley(&self) -> &HuntCrossleyImpulse {
        &self.hc
    }

    pub fn tangent_dim(&self) -> usize {
        self.dim - 1
    }

    /// Stiction tolerance used by the Lagged and Similar models.
    pub fn stiction_tolerance(&self) -> f64 {
        let fp = &self.fp;
        if fp.regularize_impacts {
            fp.v_s.max(fp.sigma * self.w * fp.mu * self.gamma_n0)
        } else {
            fp.v_s
        }
    }

    /// Slip at which SAP transitions from stick to slip, `σ·w·μ·γ_n`.
    pub fn sap_stiction_tolerance(&self, gamma_n: f64) -> f64 {
        self.fp.sigma * self.w * self.fp.mu * gamma_n
    }

    fn soft(&self) -> SoftNorm {
        SoftNorm::new(self.stiction_tolerance()).expect("validated stiction tolerance")
    }

    fn split(&self, v_c: &DVector<f64>) -> (DVector<f64>, f64) {
        assert_eq!(v_c.len(), self.dim, "contact velocity dimension mismatch");
        let m = self.tangent_dim();
        (v_c.rows(0, m).into_owned(), v_c[m])
    }
}

/// Cost, impulse and Hessian of one contact potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialEval {
    pub cost: f64,
    pub gamma: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// The three convex contact models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContactModel {
    Sap,
    Lagged,
    Similar,
}

impl ContactModel {
    pub fn eval(&self, data: &ContactData, v_c: &DVector<f64>) -> Result<PotentialEval> {
        match self {
            ContactModel::Sap => sap_eval(data, v_c),
            ContactModel::Lagged => Ok(lagged_eval(data, v_c)),
            ContactModel::Similar => Ok(similar_eval(data, v_c)),
        }
    }
}

/// Model identifiers exposed to scenarios and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    Sap,
    Lagged,
    LaggedRegularized,
    Similar,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::Sap, ModelId::Lagged, ModelId::LaggedRegularized, ModelId::Similar];

    pub fn contact_model(&self) -> ContactModel {
        match self {
            ModelId::Sap => ContactModel::Sap,
            ModelId::Lagged | ModelId::LaggedRegularized => ContactModel::Lagged,
            ModelId::Similar => ContactModel::Similar,
        }
    }

    pub fn regularizes_impacts(&self) -> bool {
        matches!(self, ModelId::LaggedRegularized)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::Sap => "sap",
            ModelId::Lagged => "lagged",
            ModelId::LaggedRegularized => "lagged_regularized",
            ModelId::Similar => "similar",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sap" => Ok(ModelId::Sap),
            "lagged" => Ok(ModelId::Lagged),
            "lagged_regularized" => Ok(ModelId::LaggedRegularized),
            "similar" => Ok(ModelId::Similar),
            other => Err(invalid("model", format!("unknown model `{other}`"))),
        }
    }
}

/// Normal impulse implicit, friction driven by the previous-step normal impulse.
pub fn lagged_eval(data: &ContactData, v_c: &DVector<f64>) -> PotentialEval {
    let (v_t, v_n) = data.split(v_c);
    let m = data.tangent_dim();
    let hc = data.hunt_crossley();
    let soft = data.soft();
    let scale = data.fp.mu * data.gamma_n0;

    // −N(v_n) up to a constant
    let cost = hc.separation_work(v_n) + scale * soft.norm(&v_t);
    let mut gamma = DVector::zeros(data.dim);
    gamma.rows_mut(0, m).copy_from(&(-scale * soft.unit(&v_t)));
    gamma[m] = hc.impulse(v_n);

    let mut hessian = DMatrix::zeros(data.dim, data.dim);
    hessian.view_mut((0, 0), (m, m)).copy_from(&(scale * soft.hessian(&v_t)));
    hessian[(m, m)] = -hc.derivative(v_n);
    PotentialEval { cost, gamma, hessian }
}

/// Normal and friction coupled through `z = v_n − μ‖v_t‖_s`, potential `−N(z)`.
pub fn similar_eval(data: &ContactData, v_c: &DVector<f64>) -> PotentialEval {
    let (v_t, v_n) = data.split(v_c);
    let m = data.tangent_dim();
    let mu = data.fp.mu;
    let hc = data.hunt_crossley();
    let soft = data.soft();

    let t_s = soft.unit(&v_t);
    let z = v_n - mu * soft.norm(&v_t);
    let n = hc.impulse(z);
    let dn = hc.derivative(z);

    let mut gamma = DVector::zeros(data.dim);
    gamma.rows_mut(0, m).copy_from(&(-mu * n * &t_s));
    gamma[m] = n;

    // ∇z = (−μ t̂_s, 1)
    let mut grad_z = DVector::zeros(data.dim);
    grad_z.rows_mut(0, m).copy_from(&(-mu * &t_s));
    grad_z[m] = 1.0;
    let mut hessian = -dn * &grad_z * grad_z.transpose();
    let tangential = mu * n * soft.hessian(&v_t);
    let mut block = hessian.view_mut((0, 0), (m, m));
    block += tangential;

    PotentialEval { cost: hc.separation_work(z), gamma, hessian }
}

/// SAP regularization parameters for one contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SapParams {
    pub r_t: f64,
    pub r_n: f64,
    pub v_hat: f64,
}

impl SapParams {
    pub fn new(data: &ContactData) -> Result<Self> {
        let hc = data.hunt_crossley();
        let (k, dt, tau_d) = (hc.k(), hc.dt(), data.fp.tau_d);
        if !(k > 0.0) {
            return Err(Error::DegenerateContact(format!("SAP requires a positive stiffness, got k = {k}")));
        }
        Ok(Self { r_t: data.fp.sigma * data.w, r_n: 1.0 / (dt * (dt + tau_d) * k), v_hat: hc.x0() / (dt + tau_d) })
    }

    /// `μ̂ = μ·R_t/R_n`.
    pub fn mu_hat(&self, mu: f64) -> f64 {
        mu * self.r_t / self.r_n
    }
}

/// Region of the friction cone projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SapRegion {
    Stiction,
    Sliding,
    Separation,
}

/// Classifies the unprojected impulse `y` of SAP.
pub fn sap_region(data: &ContactData, v_c: &DVector<f64>) -> Result<SapRegion> {
    let params = SapParams::new(data)?;
    let (v_t, v_n) = data.split(v_c);
    let y_t_norm = v_t.norm() / params.r_t;
    let y_n = (params.v_hat - v_n) / params.r_n;
    Ok(classify(data.fp.mu, params.mu_hat(data.fp.mu), y_t_norm, y_n))
}

fn classify(mu: f64, mu_hat: f64, y_t_norm: f64, y_n: f64) -> SapRegion {
    if y_t_norm <= mu * y_n {
        SapRegion::Stiction
    } else if y_n <= -mu_hat * y_t_norm {
        SapRegion::Separation
    } else {
        SapRegion::Sliding
    }
}

/// Linear spring-damper with the friction cone projection in the `R` metric.
pub fn sap_eval(data: &ContactData, v_c: &DVector<f64>) -> Result<PotentialEval> {
    let params = SapParams::new(data)?;
    let (v_t, v_n) = data.split(v_c);
    let m = data.tangent_dim();
    let dim = data.dim;
    let mu = data.fp.mu;
    let mu_hat = params.mu_hat(mu);
    let (r_t, r_n) = (params.r_t, params.r_n);

    let y_t = -&v_t / r_t;
    let y_n = (params.v_hat - v_n) / r_n;
    let y_t_norm = y_t.norm();

    let mut gamma = DVector::zeros(dim);
    let mut hessian = DMatrix::zeros(dim, dim);
    match classify(mu, mu_hat, y_t_norm, y_n) {
        SapRegion::Stiction => {
            gamma.rows_mut(0, m).copy_from(&y_t);
            gamma[m] = y_n;
            for i in 0..m {
                hessian[(i, i)] = 1.0 / r_t;
            }
            hessian[(m, m)] = 1.0 / r_n;
        }
        SapRegion::Separation => {}
        SapRegion::Sliding => {
            let t_hat = &y_t / y_t_norm;
            let denom = 1.0 + mu * mu_hat;
            let gamma_n = (y_n + mu_hat * y_t_norm) / denom;
            gamma.rows_mut(0, m).copy_from(&(mu * gamma_n * &t_hat));
            gamma[m] = gamma_n;

            // G = (∂γ/∂y)·R⁻¹
            let dgt_dyt = mu * mu_hat / denom * projection(&t_hat) + mu * gamma_n / y_t_norm * projection_perp(&t_hat);
            let dgt_dyn = mu / denom * &t_hat;
            let dgn_dyt = mu_hat / denom * &t_hat;
            hessian.view_mut((0, 0), (m, m)).copy_from(&(dgt_dyt / r_t));
            hessian.view_mut((0, m), (m, 1)).copy_from(&(dgt_dyn / r_n));
            hessian.view_mut((m, 0), (1, m)).copy_from(&(dgn_dyt.transpose() / r_t));
            hessian[(m, m)] = 1.0 / (denom * r_n);
        }
    }
    let gamma_t_sq = gamma.rows(0, m).norm_squared();
    let cost = 0.5 * (r_t * gamma_t_sq + r_n * gamma[m] * gamma[m]);
    Ok(PotentialEval { cost, gamma, hessian })
}

/// Compliant normal impulse combined with regularized friction at the
/// current normal impulse. Not the gradient of any potential.
pub fn naive_impulse(data: &ContactData, v_c: &DVector<f64>) -> DVector<f64> {
    let (v_t, v_n) = data.split(v_c);
    let m = data.tangent_dim();
    let n = data.hunt_crossley().impulse(v_n);
    let mut gamma = DVector::zeros(data.dim);
    gamma.rows_mut(0, m).copy_from(&(-data.fp.mu * n * data.soft().unit(&v_t)));
    gamma[m] = n;
    gamma
}

/// Effective stiction tolerance reported for a model. SAP's depends on the
/// current-step normal impulse `gamma_n`; the other models ignore it.
pub fn effective_stiction_tolerance(model: ContactModel, data: &ContactData, gamma_n: f64) -> f64 {
    match model {
        ContactModel::Sap => data.sap_stiction_tolerance(gamma_n),
        ContactModel::Lagged | ContactModel::Similar => data.stiction_tolerance(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::NormalLaw;
    use approx::assert_relative_eq;

    fn data(dim: usize, d: f64, tau_d: f64, mu: f64, gamma_n0: f64) -> ContactData {
        let normal = DiscreteNormal::new(NormalLaw::HuntCrossley { k: 1e4, d }, 1e-3, 0.01).unwrap();
        let fp = FrictionParams { mu, v_s: 1e-4, sigma: 1e-3, tau_d, regularize_impacts: false };
        ContactData::new(normal, fp, gamma_n0, 2.0, dim).unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn lagged_stiction_center() {
        let c = data(3, 50.0, 0.0, 0.5, 1.0);
        let e = lagged_eval(&c, &v(&[0.0, 0.0, 0.005]));
        assert_eq!(e.gamma[0], 0.0);
        assert_eq!(e.gamma[1], 0.0);
        assert_relative_eq!(e.gamma[2], c.hunt_crossley().impulse(0.005));
    }

    #[test]
    fn lagged_friction_at_tolerance() {
        let c = data(3, 0.0, 0.0, 0.5, 1.0);
        let e = lagged_eval(&c, &v(&[1e-4, 0.0, 0.0]));
        assert_relative_eq!(e.gamma[0], -0.5 / 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(e.gamma[0], -0.35355339059327373, max_relative = 1e-12);
        assert_eq!(e.gamma[1], 0.0);
    }

    #[test]
    fn lagged_coulomb_asymptote() {
        let c = data(3, 0.0, 0.0, 0.5, 1.0);
        let e = lagged_eval(&c, &v(&[0.0, -1e-2, 0.0]));
        let gt = e.gamma.rows(0, 2).norm();
        assert!((gt - 0.5).abs() <= 0.5 * 5e-5, "{gt}");
        assert!(e.gamma[1] > 0.0);
    }

    #[test]
    fn similar_reduces_to_frictionless_at_zero_slip() {
        let c = data(3, 50.0, 0.0, 0.5, 0.0);
        let e = similar_eval(&c, &v(&[0.0, 0.0, 0.004]));
        assert_eq!(e.gamma[2], c.hunt_crossley().impulse(0.004));
        assert_eq!(e.cost, c.hunt_crossley().separation_work(0.004));
    }

    #[test]
    fn similar_friction_inflates_normal_impulse() {
        let c = data(2, 50.0, 0.0, 0.5, 0.0);
        let v_n = 0.005;
        let e = similar_eval(&c, &v(&[0.01, v_n]));
        assert!(e.gamma[1] > c.hunt_crossley().impulse(v_n));
        assert!(e.gamma[0] < 0.0);
    }

    #[test]
    fn sap_stiction_identity() {
        let c = data(3, 0.0, 1e-3, 0.5, 0.0);
        let p = SapParams::new(&c).unwrap();
        let vc = v(&[1e-9, -2e-9, 0.0]);
        let e = sap_eval(&c, &vc).unwrap();
        assert_eq!(sap_region(&c, &vc).unwrap(), SapRegion::Stiction);
        assert_relative_eq!(e.gamma[0], -1e-9 / p.r_t);
        assert_relative_eq!(e.gamma[1], 2e-9 / p.r_t);
        assert_relative_eq!(e.gamma[2], p.v_hat / p.r_n);
        // Unprojected linear spring-damper: δt·k·(x0 − (δt+τ_d)·v_n) at v_n = 0.
        assert_relative_eq!(e.gamma[2], 0.01 * 1e4 * 1e-3, max_relative = 1e-12);
    }

    #[test]
    fn sap_separation() {
        let c = data(3, 0.0, 1e-3, 0.5, 0.0);
        let vc = v(&[0.3, 0.0, 5.0]);
        let e = sap_eval(&c, &vc).unwrap();
        assert_eq!(sap_region(&c, &vc).unwrap(), SapRegion::Separation);
        assert_eq!(e.gamma, DVector::zeros(3));
        assert_eq!(e.cost, 0.0);
        assert_eq!(e.hessian, DMatrix::zeros(3, 3));
    }

    #[test]
    fn sap_rejects_zero_stiffness() {
        let normal = DiscreteNormal::new(NormalLaw::HuntCrossley { k: 0.0, d: 0.0 }, 0.0, 0.01).unwrap();
        let c = ContactData::new(normal, FrictionParams::default(), 0.0, 1.0, 2).unwrap();
        assert!(matches!(sap_eval(&c, &v(&[0.0, 0.0])), Err(Error::DegenerateContact(_))));
    }

    #[test]
    fn models_agree_for_elastic_stiction() {
        let c = data(3, 0.0, 0.0, 0.5, 0.7);
        let vc = v(&[0.0, 0.0, 0.02]);
        let sap = sap_eval(&c, &vc).unwrap().gamma;
        let lagged = lagged_eval(&c, &vc).gamma;
        let similar = similar_eval(&c, &vc).gamma;
        let naive = naive_impulse(&c, &vc);
        for g in [&lagged, &similar, &naive] {
            for i in 0..3 {
                assert_relative_eq!(sap[i], g[i], max_relative = 1e-12, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn effective_tolerance() {
        let mut c = data(2, 0.0, 0.0, 0.5, 0.0);
        c.fp.regularize_impacts = true;
        assert_eq!(c.stiction_tolerance(), 1e-4);
        // σ·w·μ·γ_n0 = 1e-3·2·0.5·γ_n0 = 10·v_s  ⇒  γ_n0 = 1.0
        c.gamma_n0 = 1.0;
        assert_relative_eq!(c.stiction_tolerance(), 1e-3, max_relative = 1e-12);
        c.fp.regularize_impacts = false;
        assert_eq!(effective_stiction_tolerance(ContactModel::Lagged, &c, 5.0), 1e-4);
        assert_relative_eq!(effective_stiction_tolerance(ContactModel::Sap, &c, 5.0), 5e-3, max_relative = 1e-12);
        assert_eq!(FrictionParams::default().sigma, 1e-3);
    }

    #[test]
    fn model_ids_round_trip() {
        for id in ModelId::ALL {
            assert_eq!(id.as_str().parse::<ModelId>().unwrap(), id);
        }
        assert!("naive".parse::<ModelId>().is_err());
    }

    #[test]
    fn invalid_inputs_rejected() {
        let normal = DiscreteNormal::new(NormalLaw::HuntCrossley { k: 1.0, d: 0.0 }, 0.0, 0.01).unwrap();
        let fp = FrictionParams::default();
        assert!(ContactData::new(normal, fp, -1.0, 1.0, 3).is_err());
        assert!(ContactData::new(normal, fp, 0.0, 0.0, 3).is_err());
        assert!(ContactData::new(normal, fp, 0.0, 1.0, 4).is_err());
        let barrier = DiscreteNormal::new(NormalLaw::LogBarrier { kappa: 1.0 }, -1.0, 0.01).unwrap();
        assert!(matches!(ContactData::new(barrier, fp, 0.0, 1.0, 3), Err(Error::UnsupportedLaw { .. })));
    }
}
