//! Blaschke-Potapov factorization of characteristic functions.
//!
//! Triangularizing the fundamental operator splits a finite-dimensional
//! colligation into a chain of one-dimensional ones, so its characteristic
//! function becomes a right-ordered product of elementary factors
//! `I + (i/(z - lambda_k)) eta_k eta_k* J` with `eta_k* J eta_k = 2 Im lambda_k`.
//! The factor data also satisfies `sum eta_k eta_k* = Phi Phi*` and the trace
//! inequality `2 sum |Im lambda_k| <= tr Phi Phi*`.

use crate::colligation::{Colligation, Signature};
use crate::numerics::{self, cplx, identity, CMatrix, CVector, C64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FactorizeError {
    #[error("z = {0} is a pole of an elementary factor")]
    PoleAt(C64),
    #[error("fundamental operator is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, FactorizeError>;

/// One Blaschke-Potapov factor `I + (i/(z - lambda)) eta eta* J`.
#[derive(Debug, Clone)]
pub struct ElementaryFactor {
    pub lambda: C64,
    pub eta: CVector,
}

impl ElementaryFactor {
    /// `eta* J eta - 2 Im lambda`, which must vanish for a genuine factor.
    pub fn constraint_residual(&self, j: &Signature) -> f64 {
        let quad: f64 = self
            .eta
            .iter()
            .zip(j.signs())
            .map(|(x, &s)| s as f64 * x.norm_sqr())
            .sum();
        (quad - 2.0 * self.lambda.im).abs()
    }
}

/// Ordered elementary factors sharing one signature; evaluates as the
/// right-ordered product (first factor leftmost).
#[derive(Debug, Clone)]
pub struct BlaschkeProduct {
    pub j: Signature,
    pub factors: Vec<ElementaryFactor>,
}

impl BlaschkeProduct {
    /// `sum_k eta_k eta_k*`.
    pub fn eta_gram(&self) -> CMatrix {
        let r = self.j.r();
        let mut sum = CMatrix::zeros(r, r);
        for f in &self.factors {
            sum += &f.eta * f.eta.adjoint();
        }
        sum
    }

    /// Slack of the trace inequality `tr(sum eta eta*) - 2 sum |Im lambda|`.
    pub fn trace_slack(&self) -> f64 {
        let tr: f64 = self.eta_gram().diagonal().iter().map(|x| x.re).sum();
        let im_sum: f64 = self.factors.iter().map(|f| f.lambda.im.abs()).sum();
        tr - 2.0 * im_sum
    }
}

/// Extracts the Blaschke-Potapov factorization along the Schur chain of the
/// fundamental operator. Eigenvalues are stably ordered `(Re, Im)`-ascending
/// so repeated eigenvalues come out in a reproducible order; `eta_k` is the
/// channel map applied to the k-th Schur basis vector.
pub fn potapov_factorize(c: &Colligation) -> Result<BlaschkeProduct> {
    let (q, t) = numerics::schur_ordered(c.a(), numerics::SchurOrder::RealAscending)?;
    let images = c.phi() * &q;
    let factors = (0..c.n())
        .map(|k| ElementaryFactor { lambda: t[(k, k)], eta: images.column(k).into_owned() })
        .collect();
    Ok(BlaschkeProduct { j: c.j().clone(), factors })
}

/// Evaluates one elementary factor at `z`.
pub fn eval_factor(f: &ElementaryFactor, j: &Signature, z: C64) -> Result<CMatrix> {
    let denom = z - f.lambda;
    if denom.norm() <= 1e-14 * (1.0 + f.lambda.norm()) {
        return Err(FactorizeError::PoleAt(f.lambda));
    }
    let r = j.r();
    let outer = j.scale_cols(&(&f.eta * f.eta.adjoint()));
    Ok(identity(r) + outer * (cplx(0.0, 1.0) / denom))
}

/// Right-ordered product of the elementary factors at `z`.
pub fn eval_product(bp: &BlaschkeProduct, z: C64) -> Result<CMatrix> {
    let mut out = identity(bp.j.r());
    for f in &bp.factors {
        out *= eval_factor(f, &bp.j, z)?;
    }
    Ok(out)
}

/// Additive pole expansion `S(z) = I + i sum_k eta_k eta_k* / (z - lambda_k) J`
/// available when the fundamental operator is Hermitian (the factors then
/// commute and the multiplicative decomposition collapses to a sum).
#[derive(Debug, Clone)]
pub struct AdditiveCharFn {
    pub j: Signature,
    pub poles: Vec<(f64, CVector)>,
}

impl AdditiveCharFn {
    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        let r = self.j.r();
        let mut sum = CMatrix::zeros(r, r);
        for (t, eta) in &self.poles {
            let denom = z - cplx(*t, 0.0);
            if denom.norm() <= 1e-14 * (1.0 + t.abs()) {
                return Err(FactorizeError::PoleAt(cplx(*t, 0.0)));
            }
            sum += self.j.scale_cols(&(eta * eta.adjoint())) * (cplx(0.0, 1.0) / denom);
        }
        Ok(identity(r) + sum)
    }
}

/// Builds the additive evaluator for a colligation with Hermitian fundamental
/// operator from the eigendecomposition of `A`.
pub fn selfadjoint_charfn(c: &Colligation) -> Result<AdditiveCharFn> {
    let defect = (c.a() - c.a().adjoint()).norm();
    if defect > 1e-10 * (1.0 + c.a().norm()) {
        return Err(FactorizeError::NotHermitian(defect));
    }
    let (d, u) = numerics::hermitian_eig(c.a())?;
    let images = c.phi() * &u;
    let poles = (0..c.n())
        .map(|k| (d[k], images.column(k).into_owned()))
        .collect();
    Ok(AdditiveCharFn { j: c.j().clone(), poles })
}
