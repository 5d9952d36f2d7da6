//! Smooth convex losses `L(w)` and their strong convexity / smoothness
//! constants `mu_L <= nu_L`.

use crate::error::{check_dim, Error};
use crate::{Matrix, Vector};

/// What the solvers need from a smooth loss.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, w: &Vector) -> f64;
    fn grad(&self, w: &Vector) -> Vector;
    /// `(mu_L, nu_L)`.
    fn constants(&self) -> (f64, f64);

    /// Unique minimizer of `L(w) + <lambda, w - g> + rho/2 |w - g|^2` over `w`,
    /// where `g = G(z)`. Losses without a closed form return
    /// [`Error::UnsupportedLoss`].
    fn exact_w_min(&self, _g: &Vector, _lambda: &Vector, _rho: f64) -> Result<Vector, Error> {
        Err(Error::UnsupportedLoss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// `1/2 |w - target|^2`.
    QuadraticDenoise { target: Vector },
    /// `1/2 |A w - b|^2`.
    LeastSquares { a: Matrix, b: Vector },
    /// Smooth part `gamma |w - target|^2` of the l_inf denoising objective;
    /// the `|w - target|_inf` part is a [`Regularizer`](crate::Regularizer).
    QuadPlusLInf { target: Vector, gamma: f64 },
}

/// Thin SVD of the measurement matrix, `A = U diag(sigma) V^T`.
#[derive(Debug, Clone, PartialEq)]
struct SvdCache {
    v: Matrix,
    sigma_sq: Vector,
    atb: Vector,
}

/// A smooth convex loss with cached constants.
///
/// For least squares the SVD of `A` is computed once at construction, so the
/// value is immutable and can be shared freely afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothLoss {
    kind: LossKind,
    mu: f64,
    nu: f64,
    svd: Option<SvdCache>,
}

impl SmoothLoss {
    pub fn quadratic_denoise(target: Vector) -> Self {
        Self {
            kind: LossKind::QuadraticDenoise { target },
            mu: 1.0,
            nu: 1.0,
            svd: None,
        }
    }

    pub fn least_squares(a: Matrix, b: Vector) -> Result<Self, Error> {
        check_dim("measurement vector", a.nrows(), b.len())?;
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidConfig("measurement matrix is empty".into()));
        }
        let svd = a.clone().svd(false, true);
        let v = svd.v_t.expect("requested V^T").transpose();
        let sigma_sq = svd.singular_values.map(|s| s * s);
        let nu = sigma_sq.max();
        // A^T A is singular whenever there are fewer measurements than unknowns.
        let mu = if a.nrows() < a.ncols() { 0.0 } else { sigma_sq.min() };
        let atb = a.tr_mul(&b);
        Ok(Self {
            kind: LossKind::LeastSquares { a, b },
            mu,
            nu,
            svd: Some(SvdCache { v, sigma_sq, atb }),
        })
    }

    pub fn quad_plus_linf(target: Vector, gamma: f64) -> Result<Self, Error> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            kind: LossKind::QuadPlusLInf { target, gamma },
            mu: 2.0 * gamma,
            nu: 2.0 * gamma,
            svd: None,
        })
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    /// True when `mu_L` vanishes (relative to `nu_L`), i.e. strong convexity
    /// only holds in the restricted sense and rate diagnostics do not apply.
    pub fn is_restricted(&self) -> bool {
        !(self.mu > 1e-12 * self.nu)
    }

    pub fn loss_value(&self, w: &Vector) -> Result<f64, Error> {
        check_dim("loss argument", self.dim(), w.len())?;
        Ok(self.value(w))
    }

    pub fn loss_grad(&self, w: &Vector) -> Result<Vector, Error> {
        check_dim("loss argument", self.dim(), w.len())?;
        Ok(self.grad(w))
    }
}

impl SmoothObjective for SmoothLoss {
    fn dim(&self) -> usize {
        match &self.kind {
            LossKind::QuadraticDenoise { target } | LossKind::QuadPlusLInf { target, .. } => {
                target.len()
            }
            LossKind::LeastSquares { a, .. } => a.ncols(),
        }
    }

    fn value(&self, w: &Vector) -> f64 {
        match &self.kind {
            LossKind::QuadraticDenoise { target } => 0.5 * (w - target).norm_squared(),
            LossKind::LeastSquares { a, b } => 0.5 * (a * w - b).norm_squared(),
            LossKind::QuadPlusLInf { target, gamma } => gamma * (w - target).norm_squared(),
        }
    }

    fn grad(&self, w: &Vector) -> Vector {
        match &self.kind {
            LossKind::QuadraticDenoise { target } => w - target,
            LossKind::LeastSquares { a, b } => a.tr_mul(&(a * w - b)),
            LossKind::QuadPlusLInf { target, gamma } => (w - target) * (2.0 * gamma),
        }
    }

    fn constants(&self) -> (f64, f64) {
        (self.mu, self.nu)
    }

    fn exact_w_min(&self, g: &Vector, lambda: &Vector, rho: f64) -> Result<Vector, Error> {
        if !(rho > 0.0) {
            return Err(Error::InvalidConfig("rho must be positive".into()));
        }
        check_dim("generator output", self.dim(), g.len())?;
        check_dim("dual variable", self.dim(), lambda.len())?;
        match &self.kind {
            LossKind::QuadraticDenoise { target } => Ok((target - lambda + g * rho) / (1.0 + rho)),
            LossKind::QuadPlusLInf { target, gamma } => {
                let c = 2.0 * gamma;
                Ok((target * c - lambda + g * rho) / (c + rho))
            }
            LossKind::LeastSquares { .. } => {
                let svd = self.svd.as_ref().expect("least squares carries its SVD");
                // (A^T A + rho I) w = A^T b - lambda + rho G(z), with A^T A = V diag(sigma^2) V^T
                // on range(V) and rho I on its orthogonal complement.
                let rhs = &svd.atb - lambda + g * rho;
                let coeffs = svd.v.tr_mul(&rhs);
                let in_range = &svd.v * &coeffs;
                let scaled = coeffs.zip_map(&svd.sigma_sq, |c, s2| c / (s2 + rho));
                Ok(&svd.v * scaled + (rhs - in_range) / rho)
            }
        }
    }
}
