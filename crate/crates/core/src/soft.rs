//! Soft norms, soft unit vectors and projection matrices.
//!
//! The soft norm `‖x‖_s = sqrt(‖x‖² + ε²) − ε` is a smooth, convex stand-in
//! for the Euclidean norm. Its gradient (the soft unit vector) and Hessian are
//! well defined at `x = 0`, which is what makes the regularized friction
//! models twice differentiable at the stiction center.
//!
//! Vectors here are tangent-plane quantities: dimension 1 in planar worlds and
//! dimension 2 in spatial worlds.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Soft norm with a fixed regularization `eps > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftNorm {
    eps: f64,
}

impl SoftNorm {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self { eps })
        } else {
            Err(invalid("eps", format!("soft norm regularization must be positive, got {eps}")))
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `sqrt(‖x‖² + ε²) − ε`, evaluated without cancellation.
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        debug_assert!(matches!(x.len(), 1 | 2));
        let sq = x.norm_squared();
        sq / ((sq + self.eps * self.eps).sqrt() + self.eps)
    }

    /// `x / sqrt(‖x‖² + ε²)`; strictly shorter than one.
    pub fn unit(&self, x: &DVector<f64>) -> DVector<f64> {
        x / self.denominator(x)
    }

    /// `P⊥(x̂_s) / (‖x‖_s + ε)`.
    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let denom = self.denominator(x);
        let u = x / denom;
        projection_perp(&u) / denom
    }

    /// `‖x‖_s + ε = sqrt(‖x‖² + ε²)`.
    fn denominator(&self, x: &DVector<f64>) -> f64 {
        (x.norm_squared() + self.eps * self.eps).sqrt()
    }
}

pub fn soft_norm(x: &DVector<f64>, eps: f64) -> Result<f64> {
    Ok(SoftNorm::new(eps)?.norm(x))
}

pub fn soft_unit(x: &DVector<f64>, eps: f64) -> Result<DVector<f64>> {
    Ok(SoftNorm::new(eps)?.unit(x))
}

pub fn soft_norm_hessian(x: &DVector<f64>, eps: f64) -> Result<DMatrix<f64>> {
    Ok(SoftNorm::new(eps)?.hessian(x))
}

/// `P(u) = u ⊗ u`.
pub fn projection(u: &DVector<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

/// `P⊥(u) = I − u ⊗ u`.
pub fn projection_perp(u: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::identity(u.len(), u.len()) - projection(u)
}
