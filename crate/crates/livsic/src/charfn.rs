//! Characteristic functions and open-system dynamics.
//!
//! For a colligation `(A, Phi, J)` the characteristic function
//! `S(z) = I - i Phi (A - zI)^{-1} Phi* J` is J-expansive in the upper half
//! plane, J-unitary on the real axis and J-contractive below, with the exact
//! defect identity `S*JS - J = 2 Im z * Q*Q` where `Q(z) = (A - zI)^{-1} Phi* J`
//! is the state transfer map. The Herglotz-type function
//! `V(z) = Phi (Re A - zI)^{-1} Phi* / 2` is linked to `S` by a Cayley
//! transform. This module evaluates all of these, classifies J-forms,
//! applies the Potapov-Ginzburg transform, and integrates the open system
//! `i h' + A h = Phi* J phi^-`, `phi^+ = phi^- - i Phi h` in time with an
//! energy ledger checking `d<h,h>/dt = <J phi^-, phi^-> - <J phi^+, phi^+>`.

use crate::colligation::{Colligation, Signature};
use crate::numerics::{self, cplx, identity, CMatrix, CVector, C64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CharFnError {
    #[error("z = {0} is a pole")]
    PoleAt(C64),
    #[error("input is not J-contractive (min eigenvalue of J - S*JS is {0:.3e})")]
    NotJContractive(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, CharFnError>;

/// One evaluation of the characteristic function.
#[derive(Debug, Clone)]
pub struct CharFnSample {
    pub z: C64,
    /// `S(z)`; the identity matrix when `regular` is false.
    pub s: CMatrix,
    /// False when `z` is numerically in the spectrum of `A`.
    pub regular: bool,
}

/// `S(z) = I - i Phi (A - zI)^{-1} Phi* J`. Irregular points are reported
/// through the `regular` flag rather than an error so grid sweeps can skip
/// spectral hits gracefully.
pub fn eval_s(c: &Colligation, z: C64) -> CharFnSample {
    let r = c.r();
    match resolvent_applied(c, z) {
        Ok(x) => {
            let s = identity(r) - (c.phi() * x) * cplx(0.0, 1.0);
            CharFnSample { z, s, regular: true }
        }
        Err(_) => CharFnSample { z, s: identity(r), regular: false },
    }
}

// (A - zI)^{-1} Phi* J, shared by eval_s / eval_q.
fn resolvent_applied(c: &Colligation, z: C64) -> Result<CMatrix> {
    let n = c.n();
    let shifted = c.a() - identity(n) * z;
    let rhs = c.j().scale_rows(c.phi()).adjoint();
    Ok(numerics::solve(&shifted, &rhs)?)
}

/// Transfer map `Q(z) = (A - zI)^{-1} Phi* J` sending the input amplitude to
/// the steady internal state.
pub fn eval_q(c: &Colligation, z: C64) -> Result<CMatrix> {
    resolvent_applied(c, z)
}

/// Herglotz-type function `V(z) = Phi (Re A - zI)^{-1} Phi* / 2`.
pub fn eval_v(c: &Colligation, z: C64) -> Result<CMatrix> {
    let n = c.n();
    let re_a = (c.a() + c.a().adjoint()).scale(0.5);
    let shifted = re_a - identity(n) * z;
    let x = numerics::solve(&shifted, &c.phi().adjoint())?;
    Ok((c.phi() * x).scale(0.5))
}

/// Direction of the Cayley transform between `S` and `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CayleyDirection {
    SToV,
    VToS,
}

/// Cayley transform `V = i (S - I)(S + I)^{-1} J` and its inverse
/// `S = (I - i V J)(I + i V J)^{-1}`. The left and right factored forms agree
/// identically because the factors commute.
pub fn cayley(x: &CMatrix, j: &Signature, direction: CayleyDirection) -> Result<CMatrix> {
    if x.nrows() != j.r() || x.ncols() != j.r() {
        return Err(CharFnError::ShapeMismatch(format!(
            "expected {r}x{r} matrix for the given signature, got {}x{}",
            x.nrows(),
            x.ncols(),
            r = j.r()
        )));
    }
    let r = j.r();
    match direction {
        CayleyDirection::SToV => {
            let num = (x - identity(r)) * cplx(0.0, 1.0);
            let y = numerics::solve_right(&num, &(x + identity(r)))?;
            Ok(j.scale_cols(&y))
        }
        CayleyDirection::VToS => {
            let ivj = j.scale_cols(x) * cplx(0.0, 1.0);
            let num = identity(r) - &ivj;
            Ok(numerics::solve_right(&num, &(identity(r) + &ivj))?)
        }
    }
}

/// The Hermitian J-form `S* J S - J`.
pub fn j_form(s: &CMatrix, j: &Signature) -> CMatrix {
    s.adjoint() * j.scale_rows(s) - j.to_matrix()
}

/// Classification of a J-form by the signs of its eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JClass {
    /// `S*JS - J >= 0` (up to `tol`)
    Expansive,
    /// `S*JS - J = 0` (up to `tol`)
    Unitary,
    /// `S*JS - J <= 0` (up to `tol`)
    Contractive,
    Indefinite,
}

impl std::fmt::Display for JClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            JClass::Expansive => "J-expansive",
            JClass::Unitary => "J-unitary",
            JClass::Contractive => "J-contractive",
            JClass::Indefinite => "indefinite",
        };
        write!(f, "{name}")
    }
}

pub fn classify_j_form(s: &CMatrix, j: &Signature, tol: f64) -> JClass {
    let form = j_form(s, j);
    let (d, _) = numerics::hermitian_eig(&form).expect("J-form is Hermitian");
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if d.is_empty() || (min >= -tol && max <= tol) {
        JClass::Unitary
    } else if min >= -tol {
        JClass::Expansive
    } else if max <= tol {
        JClass::Contractive
    } else {
        JClass::Indefinite
    }
}

/// Residual of the defect identity `S*JS - J = ((z - conj z)/i) Q*Q`.
pub fn j_identity_residual(c: &Colligation, z: C64) -> Result<f64> {
    let s = eval_s(c, z);
    if !s.regular {
        return Err(CharFnError::PoleAt(z));
    }
    let q = eval_q(c, z)?;
    let lhs = j_form(&s.s, c.j());
    let rhs = (q.adjoint() * q).scale(2.0 * z.im);
    Ok((lhs - rhs).norm())
}

/// Potapov-Ginzburg transform `W = (P - S0 Q)^{-1} (S0 P - Q)` with `P`, `Q`
/// the projections onto the +-1 channels of `J`. Maps J-contractive matrices
/// to ordinary contractions by reversing the inverse channels.
pub fn potapov_ginzburg(s0: &CMatrix, j: &Signature) -> Result<CMatrix> {
    let r = j.r();
    if s0.nrows() != r || s0.ncols() != r {
        return Err(CharFnError::ShapeMismatch(format!(
            "expected {r}x{r} matrix, got {}x{}",
            s0.nrows(),
            s0.ncols()
        )));
    }
    // J-contractive means S0* J S0 - J <= 0, i.e. J - S0* J S0 >= 0.
    let defect = j.to_matrix() - s0.adjoint() * j.scale_rows(s0);
    let (d, _) = numerics::hermitian_eig(&defect)?;
    let min_eig = d.iter().copied().fold(f64::INFINITY, f64::min);
    if r > 0 && min_eig < -1e-10 {
        return Err(CharFnError::NotJContractive(min_eig));
    }
    let mut p = CMatrix::zeros(r, r);
    let mut q = CMatrix::zeros(r, r);
    for (i, &s) in j.signs().iter().enumerate() {
        if s > 0 {
            p[(i, i)] = C64::ONE;
        } else {
            q[(i, i)] = C64::ONE;
        }
    }
    let lhs = &p - s0 * &q;
    let rhs = s0 * &p - &q;
    Ok(numerics::solve(&lhs, &rhs)?)
}

/// The scalar Moebius characteristic function `theta_a(z) = (z - conj a)/(z - a)`
/// of the one-dimensional colligation `alpha_a`.
#[derive(Debug, Clone, Copy)]
pub struct MobiusCharFn {
    pub a: C64,
}

impl MobiusCharFn {
    pub fn new(a: C64) -> Result<Self> {
        if a.im == 0.0 {
            return Err(CharFnError::ShapeMismatch("Im a must be nonzero".into()));
        }
        Ok(Self { a })
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let denom = z - self.a;
        if denom.norm() <= 1e-14 * (1.0 + self.a.norm()) {
            return Err(CharFnError::PoleAt(self.a));
        }
        Ok((z - self.a.conj()) / denom)
    }
}

/// Sampled trajectory of the open system with its energy ledger.
#[derive(Debug, Clone)]
pub struct OpenSystemTrace {
    pub times: Vec<f64>,
    pub input: Vec<CVector>,
    pub state: Vec<CVector>,
    pub output: Vec<CVector>,
    /// `<h,h> - <h0,h0> - integral of flux` at each sample.
    pub energy_residual: Vec<f64>,
    pub max_energy_drift: f64,
}

fn j_quadratic(j: &Signature, v: &CVector) -> f64 {
    v.iter()
        .zip(j.signs())
        .map(|(x, &s)| s as f64 * x.norm_sqr())
        .sum()
}

/// Integrates `i h' + A h = Phi* J phi^-` with the classical 4-stage
/// Runge-Kutta method at fixed step, producing the output
/// `phi^+ = phi^- - i Phi h` and an energy ledger.
///
/// The flux `<J phi^-, phi^-> - <J phi^+, phi^+>` is accumulated alongside
/// the state by the same RK4 stages, so the ledger residual is dominated by
/// the O(step^4) integrator error rather than by quadrature.
pub fn simulate_open_system<F>(
    c: &Colligation,
    input: F,
    h0: &CVector,
    step: f64,
    t_final: f64,
) -> OpenSystemTrace
where
    F: Fn(f64) -> CVector,
{
    assert!(step > 0.0, "step must be positive");
    let n = c.n();
    assert_eq!(h0.len(), n, "initial state has wrong dimension");
    let phi = c.phi();
    let phi_star_j = c.j().scale_rows(phi).adjoint();
    let a = c.a();
    let j = c.j();

    // h' = i A h - i Phi* J phi^-(t); flux' = <J in, in> - <J out, out>.
    let deriv = |t: f64, h: &CVector| -> (CVector, f64) {
        let inp = input(t);
        let dh = (a * h - &phi_star_j * &inp) * cplx(0.0, 1.0);
        let out = &inp - (phi * h) * cplx(0.0, 1.0);
        let flux = j_quadratic(j, &inp) - j_quadratic(j, &out);
        (dh, flux)
    };

    let steps = (t_final / step).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut residuals = Vec::with_capacity(steps + 1);

    let mut h = h0.clone();
    let mut flux_integral = 0.0f64;
    let e0 = h.norm_squared();
    let mut max_drift = 0.0f64;

    for k in 0..=steps {
        let t = k as f64 * step;
        let inp = input(t);
        let out = &inp - (phi * &h) * cplx(0.0, 1.0);
        let drift = (h.norm_squared() - e0 - flux_integral).abs();
        max_drift = max_drift.max(drift);
        times.push(t);
        inputs.push(inp);
        outputs.push(out);
        states.push(h.clone());
        residuals.push(drift);
        if k == steps {
            break;
        }

        let (k1, f1) = deriv(t, &h);
        let (k2, f2) = deriv(t + step / 2.0, &(&h + &k1 * cplx(step / 2.0, 0.0)));
        let (k3, f3) = deriv(t + step / 2.0, &(&h + &k2 * cplx(step / 2.0, 0.0)));
        let (k4, f4) = deriv(t + step, &(&h + &k3 * cplx(step, 0.0)));
        h += (k1 + k2 * cplx(2.0, 0.0) + k3 * cplx(2.0, 0.0) + k4) * cplx(step / 6.0, 0.0);
        flux_integral += step / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
    }

    OpenSystemTrace {
        times,
        input: inputs,
        state: states,
        output: outputs,
        energy_residual: residuals,
        max_energy_drift: max_drift,
    }
}
