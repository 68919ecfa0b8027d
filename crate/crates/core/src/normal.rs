//! Compliant normal force laws and their discrete (per-step) impulses.
//!
//! A force law `f_n(x, ẋ)` is written in terms of the penetration `x`
//! (positive when overlapping) and its rate. Over one step the penetration is
//! approximated implicitly as `x = x0 − δt·v_n`, `ẋ = −v_n`, which turns the
//! law into an impulse `n(v_n) = δt·f_n(x0 − δt·v_n, −v_n)`. The contact
//! potential is `−N(v_n)` with `N' = n`, convex whenever
//! `∂f_n/∂x ≥ 0` and `∂f_n/∂ẋ ≥ 0`.

use crate::error::{invalid, Error, Result};

/// Continuous normal force law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalLaw {
    /// Linear elastic law with Hunt & Crossley dissipation:
    /// `k·x₊·(1 + d·ẋ)₊`.
    HuntCrossley { k: f64, d: f64 },
    /// Logarithmic barrier `−κ ln(−x)`, force `−κ/x` for `x < 0`.
    LogBarrier { kappa: f64 },
    /// Smoothly clamped barrier `−κ (x + d̂)₊² ln(−x/d̂)`, active on `−d̂ < x < 0`.
    IpcBarrier { kappa: f64, d_hat: f64 },
}

impl NormalLaw {
    pub fn name(&self) -> &'static str {
        match self {
            NormalLaw::HuntCrossley { .. } => "hunt_crossley",
            NormalLaw::LogBarrier { .. } => "log_barrier",
            NormalLaw::IpcBarrier { .. } => "ipc_barrier",
        }
    }

    /// Checks the parameter ranges under which the law yields a convex potential.
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormalLaw::HuntCrossley { k, d } => {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(invalid("k", format!("stiffness must be non-negative, got {k}")));
                }
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(invalid("d", format!("dissipation must be non-negative, got {d}")));
                }
            }
            NormalLaw::LogBarrier { kappa } => {
                if !(kappa > 0.0 && kappa.is_finite()) {
                    return Err(invalid("kappa", format!("must be positive, got {kappa}")));
                }
            }
            NormalLaw::IpcBarrier { kappa, d_hat } => {
                if !(kappa > 0.0 && kappa.is_finite()) {
                    return Err(invalid("kappa", format!("must be positive, got {kappa}")));
                }
                if !(d_hat > 0.0 && d_hat.is_finite()) {
                    return Err(invalid("d_hat", format!("must be positive, got {d_hat}")));
                }
            }
        }
        Ok(())
    }

    /// Force `f_n(x, ẋ)`.
    ///
    /// Barrier laws are only defined for `x < 0`; a non-negative penetration
    /// is reported as [`Error::BarrierBreached`].
    pub fn force(&self, x: f64, xdot: f64) -> Result<f64> {
        match *self {
            NormalLaw::HuntCrossley { k, d } => Ok(k * x.max(0.0) * (1.0 + d * xdot).max(0.0)),
            NormalLaw::LogBarrier { kappa } => {
                if x >= 0.0 {
                    Err(Error::BarrierBreached { x })
                } else {
                    Ok(-kappa / x)
                }
            }
            NormalLaw::IpcBarrier { kappa, d_hat } => {
                if x >= 0.0 {
                    Err(Error::BarrierBreached { x })
                } else if x <= -d_hat {
                    Ok(0.0)
                } else {
                    // f = dℓ/dx of ℓ = −κ u² ln(−x/d̂), u = x + d̂.
                    let u = x + d_hat;
                    let log = (-x / d_hat).ln();
                    Ok(kappa * u * (-2.0 * log - u / x))
                }
            }
        }
    }

    /// Analytic partials `(∂f_n/∂x, ∂f_n/∂ẋ)`.
    ///
    /// Both non-negative certifies convexity of the discrete potential at that
    /// point, since `d²ℓ_n/dv_n² = δt²·∂f/∂x + δt·∂f/∂ẋ`.
    pub fn convexity_margin(&self, x: f64, xdot: f64) -> Result<(f64, f64)> {
        match *self {
            NormalLaw::HuntCrossley { k, d } => {
                let damping = 1.0 + d * xdot;
                if x > 0.0 && damping > 0.0 {
                    Ok((k * damping, k * x * d))
                } else {
                    Ok((0.0, 0.0))
                }
            }
            NormalLaw::LogBarrier { kappa } => {
                if x >= 0.0 {
                    Err(Error::BarrierBreached { x })
                } else {
                    Ok((kappa / (x * x), 0.0))
                }
            }
            NormalLaw::IpcBarrier { kappa, d_hat } => {
                if x >= 0.0 {
                    Err(Error::BarrierBreached { x })
                } else if x <= -d_hat {
                    Ok((0.0, 0.0))
                } else {
                    let u = x + d_hat;
                    let log = (-x / d_hat).ln();
                    let r = u / x;
                    Ok((kappa * (-2.0 * log - 4.0 * r + r * r), 0.0))
                }
            }
        }
    }
}

pub fn normal_force(law: &NormalLaw, x: f64, xdot: f64) -> Result<f64> {
    law.force(x, xdot)
}

/// A force law frozen at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteNormal {
    pub law: NormalLaw,
    /// Penetration at the start of the step (positive = overlap).
    pub x0: f64,
    /// Elastic force at the start of the step, `k·x0` for Hunt & Crossley.
    pub f0: f64,
    pub dt: f64,
}

impl DiscreteNormal {
    pub fn new(law: NormalLaw, x0: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("time step must be positive, got {dt}")));
        }
        if !x0.is_finite() {
            return Err(invalid("x0", "penetration must be finite"));
        }
        let f0 = match law {
            NormalLaw::HuntCrossley { k, .. } => k * x0,
            _ => law.force(x0, 0.0).unwrap_or(0.0),
        };
        Ok(Self { law, x0, f0, dt })
    }

    /// Specialized view for the Hunt & Crossley law.
    pub fn hunt_crossley(&self) -> Result<HuntCrossleyImpulse> {
        match self.law {
            NormalLaw::HuntCrossley { k, d } => Ok(HuntCrossleyImpulse::new(k, d, self.x0, self.f0, self.dt)),
            other => Err(Error::UnsupportedLaw { op: "hunt_crossley", law: other.name() }),
        }
    }

    /// `v̂ = min(x0/δt, 1/d)`: the impulse vanishes for `v_n ≥ v̂`.
    pub fn transition_velocity(&self) -> Result<f64> {
        match self.law {
            NormalLaw::HuntCrossley { .. } => Ok(self.hunt_crossley()?.v_hat()),
            other => Err(Error::UnsupportedLaw { op: "transition_velocity", law: other.name() }),
        }
    }

    /// `n(v_n) = δt·f_n(x0 − δt·v_n, −v_n)`.
    pub fn impulse(&self, v_n: f64) -> Result<f64> {
        match self.law {
            NormalLaw::HuntCrossley { .. } => Ok(self.hunt_crossley()?.impulse(v_n)),
            law => Ok(self.dt * law.force(self.x0 - self.dt * v_n, -v_n)?),
        }
    }

    /// `n'(v_n) = −δt²·∂f/∂x − δt·∂f/∂ẋ`; the left derivative at kinks.
    pub fn impulse_derivative(&self, v_n: f64) -> Result<f64> {
        match self.law {
            NormalLaw::HuntCrossley { .. } => Ok(self.hunt_crossley()?.derivative(v_n)),
            law => {
                let (fx, fxdot) = law.convexity_margin(self.x0 - self.dt * v_n, -v_n)?;
                Ok(-self.dt * self.dt * fx - self.dt * fxdot)
            }
        }
    }

    /// `N(v_n)`, the antiderivative of the impulse, in closed form.
    ///
    /// Only the Hunt & Crossley law has one; barrier antiderivatives are
    /// obtained by quadrature in [`crate::validation`].
    pub fn antiderivative(&self, v_n: f64) -> Result<f64> {
        match self.law {
            NormalLaw::HuntCrossley { .. } => Ok(self.hunt_crossley()?.antiderivative(v_n)),
            other => Err(Error::UnsupportedLaw { op: "antiderivative", law: other.name() }),
        }
    }
}

pub fn transition_velocity(dn: &DiscreteNormal) -> Result<f64> {
    dn.transition_velocity()
}

pub fn discrete_impulse(dn: &DiscreteNormal, v_n: f64) -> Result<f64> {
    dn.impulse(v_n)
}

pub fn impulse_antiderivative(dn: &DiscreteNormal, v_n: f64) -> Result<f64> {
    dn.antiderivative(v_n)
}

pub fn convexity_margin(law: &NormalLaw, x: f64, xdot: f64) -> Result<(f64, f64)> {
    law.convexity_margin(x, xdot)
}

/// Infallible Hunt & Crossley impulse used on the hot paths of the friction
/// models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuntCrossleyImpulse {
    k: f64,
    d: f64,
    x0: f64,
    f0: f64,
    dt: f64,
    v_hat: f64,
}

impl HuntCrossleyImpulse {
    fn new(k: f64, d: f64, x0: f64, f0: f64, dt: f64) -> Self {
        let elastic = x0 / dt;
        let v_hat = if d > 0.0 { elastic.min(1.0 / d) } else { elastic };
        Self { k, d, x0, f0, dt, v_hat }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn v_hat(&self) -> f64 {
        self.v_hat
    }

    pub fn impulse(&self, v: f64) -> f64 {
        if v < self.v_hat {
            self.dt * (self.f0 - self.dt * self.k * v) * (1.0 - self.d * v)
        } else {
            0.0
        }
    }

    /// Left derivative at `v̂`, zero beyond it.
    pub fn derivative(&self, v: f64) -> f64 {
        if v <= self.v_hat {
            let elastic = self.f0 - self.dt * self.k * v;
            -self.dt * (self.dt * self.k * (1.0 - self.d * v) + self.d * elastic)
        } else {
            0.0
        }
    }

    /// `N⁺(v; f0) = δt[v(f0 + Δf/2) − d·v²/2·(f0 + 2Δf/3)]`, `Δf = −δt·k·v`.
    pub fn antiderivative_active(&self, v: f64) -> f64 {
        let df = -self.dt * self.k * v;
        self.dt * (v * (self.f0 + 0.5 * df) - self.d * 0.5 * v * v * (self.f0 + 2.0 / 3.0 * df))
    }

    /// Same polynomial written in terms of `x0` instead of `f0`.
    pub fn antiderivative_active_x0(&self, v: f64) -> f64 {
        let (k, d, dt, x0) = (self.k, self.d, self.dt, self.x0);
        dt * k * (v * (x0 - 0.5 * dt * v) - d * 0.5 * v * v * (x0 - 2.0 / 3.0 * dt * v))
    }

    /// `N(v) = N⁺(min(v, v̂))`.
    pub fn antiderivative(&self, v: f64) -> f64 {
        self.antiderivative_active(v.min(self.v_hat))
    }

    /// `N(v̂) − N(v)`: the same antiderivative shifted to vanish on the
    /// plateau. Expanded about `v̂` every term is non-negative, so it keeps
    /// full relative accuracy where the impulse is small, unlike `−N(v)`.
    pub fn separation_work(&self, v: f64) -> f64 {
        let w = (self.v_hat - v).max(0.0);
        // n(v̂ − s) = δt·(a + b·s)·(c + d·s)
        let a = self.k * (self.x0 - self.dt * self.v_hat);
        let b = self.dt * self.k;
        let c = 1.0 - self.d * self.v_hat;
        let d = self.d;
        self.dt * w * (a * c + w * ((a * d + b * c) / 2.0 + w * b * d / 3.0))
    }
}
