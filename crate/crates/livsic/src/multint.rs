//! Multiplicative (product) integrals.
//!
//! The multiplicative Stieltjes integral is the limit of right-ordered
//! products `prod_j exp(f(xi_j) (H(t_j) - H(t_{j-1})))` over refining
//! partitions, independent of the partitions and intermediate points. It
//! exists for Riemann-integrable `f` and Lipschitz `H`, but can fail for
//! weights with interior jumps: partitions that do or do not contain the jump
//! point produce different limits. The convergence test here therefore
//! compares nested dyadic partitions, their half-shifted companions, and the
//! inverse products (the symmetric criterion), so genuine jump weights are
//! reported as `NoConvergence` instead of silently converging to a
//! partition-dependent value.
//!
//! The Lebesgue form with density `M` solves the Cauchy problem
//! `W'(t) = W(t) M(t)`, `W(a) = I`; both the product route and an adaptive
//! Dormand-Prince integrator are provided and cross-validated.

use crate::numerics::{cplx, expm, identity, norm, op_norm, CMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MultIntError {
    #[error("product integral did not converge within {max_levels} refinement levels (residual {residual:.3e})")]
    NoConvergence { max_levels: usize, residual: f64 },
    #[error("hypothesis violated for sequence member {index}: {kind} = {value:.3e} exceeds {bound:.3e}")]
    HypothesisViolated { index: usize, kind: &'static str, value: f64, bound: f64 },
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
}

pub type Result<T> = std::result::Result<T, MultIntError>;

/// Where `f` is evaluated inside each partition interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntermediatePointRule {
    #[default]
    Midpoint,
    Left,
    Right,
}

impl IntermediatePointRule {
    fn pick(self, lo: f64, hi: f64) -> f64 {
        match self {
            IntermediatePointRule::Midpoint => 0.5 * (lo + hi),
            IntermediatePointRule::Left => lo,
            IntermediatePointRule::Right => hi,
        }
    }
}

/// A matrix-valued weight sampled on a strictly increasing grid, evaluated
/// between samples by linear interpolation.
#[derive(Debug, Clone)]
pub struct StieltjesWeight {
    grid: Vec<f64>,
    samples: Vec<CMatrix>,
}

impl StieltjesWeight {
    pub fn new(grid: Vec<f64>, samples: Vec<CMatrix>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(MultIntError::InvalidWeight("need at least two grid points".into()));
        }
        if grid.len() != samples.len() {
            return Err(MultIntError::InvalidWeight(format!(
                "{} grid points but {} samples",
                grid.len(),
                samples.len()
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MultIntError::InvalidWeight("grid must be strictly increasing".into()));
        }
        let dim = samples[0].nrows();
        for s in &samples {
            if s.nrows() != dim || s.ncols() != dim {
                return Err(MultIntError::InvalidWeight("samples must share one square shape".into()));
            }
            if s.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(MultIntError::InvalidWeight("samples must be finite".into()));
            }
        }
        Ok(Self { grid, samples })
    }

    /// Builds the cumulative weight `H(t) = int_a^t M` of a density on a
    /// uniform grid (composite Simpson per cell).
    pub fn from_density<M>(density: M, a: f64, b: f64, cells: usize) -> Self
    where
        M: Fn(f64) -> CMatrix,
    {
        assert!(cells >= 1 && b > a);
        let dim = density(a).nrows();
        let dt = (b - a) / cells as f64;
        let mut grid = Vec::with_capacity(cells + 1);
        let mut samples = Vec::with_capacity(cells + 1);
        let mut acc = CMatrix::zeros(dim, dim);
        grid.push(a);
        samples.push(acc.clone());
        for k in 0..cells {
            let lo = a + k as f64 * dt;
            let hi = lo + dt;
            let mid = 0.5 * (lo + hi);
            acc += (density(lo) + density(mid) * cplx(4.0, 0.0) + density(hi)) * cplx(dt / 6.0, 0.0);
            grid.push(hi);
            samples.push(acc.clone());
        }
        Self { grid, samples }
    }

    pub fn a(&self) -> f64 {
        self.grid[0]
    }

    pub fn b(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].nrows()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sample(&self, idx: usize) -> &CMatrix {
        &self.samples[idx]
    }

    /// Piecewise-linear evaluation, clamped to `[a, b]`.
    pub fn eval(&self, t: f64) -> CMatrix {
        if t <= self.a() {
            return self.samples[0].clone();
        }
        if t >= self.b() {
            return self.samples.last().unwrap().clone();
        }
        let idx = match self.grid.binary_search_by(|g| g.total_cmp(&t)) {
            Ok(i) => return self.samples[i].clone(),
            Err(i) => i,
        };
        let (t0, t1) = (self.grid[idx - 1], self.grid[idx]);
        let w = (t - t0) / (t1 - t0);
        &self.samples[idx - 1] * cplx(1.0 - w, 0.0) + &self.samples[idx] * cplx(w, 0.0)
    }

    /// Largest finite-difference quotient `||dH|| / dt` on the grid.
    pub fn lipschitz_bound(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 1..self.grid.len() {
            let dh = (&self.samples[j] - &self.samples[j - 1]).norm();
            best = best.max(dh / (self.grid[j] - self.grid[j - 1]));
        }
        best
    }

    /// Total variation of the piecewise-linear interpolant (exact: the
    /// variation over each segment of a linear path is `||dH||`).
    pub fn total_variation(&self) -> f64 {
        (1..self.grid.len())
            .map(|j| (&self.samples[j] - &self.samples[j - 1]).norm())
            .sum()
    }
}

/// Outcome of an adaptive product integration.
#[derive(Debug, Clone)]
pub struct ProductIntegralResult {
    pub value: CMatrix,
    pub levels_used: usize,
    /// Last symmetric Cauchy residual at termination.
    pub cauchy_residual: f64,
}

/// Right-ordered integral product over a subset of the weight's grid indices.
pub fn partial_product<F>(
    f: F,
    w: &StieltjesWeight,
    partition: &[usize],
    rule: IntermediatePointRule,
) -> CMatrix
where
    F: Fn(f64) -> f64,
{
    let mut out = identity(w.dim());
    for pair in partition.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        assert!(j > i, "partition indices must increase");
        let xi = rule.pick(w.grid[i], w.grid[j]);
        let delta = (&w.samples[j] - &w.samples[i]) * cplx(f(xi), 0.0);
        out *= expm(&delta);
    }
    out
}

fn product_over_points<Ff, Hf>(f: &Ff, h: &Hf, points: &[f64], sign: f64, reversed: bool) -> CMatrix
where
    Ff: Fn(f64) -> f64,
    Hf: Fn(f64) -> CMatrix,
{
    let mut factors = Vec::with_capacity(points.len().saturating_sub(1));
    let mut prev = h(points[0]);
    for pair in points.windows(2) {
        let next = h(pair[1]);
        let xi = 0.5 * (pair[0] + pair[1]);
        let delta = (&next - &prev) * cplx(sign * f(xi), 0.0);
        factors.push(expm(&delta));
        prev = next;
    }
    let dim = factors.first().map_or(0, |m| m.nrows());
    let mut out = identity(dim);
    if reversed {
        for fm in factors.iter().rev() {
            out *= fm;
        }
    } else {
        for fm in factors.iter() {
            out *= fm;
        }
    }
    out
}

fn dyadic_points(a: f64, b: f64, level: usize) -> Vec<f64> {
    let n = 1usize << level;
    let dt = (b - a) / n as f64;
    let mut pts: Vec<f64> = (0..=n).map(|j| a + j as f64 * dt).collect();
    *pts.last_mut().unwrap() = b;
    pts
}

fn shifted_points(a: f64, b: f64, level: usize) -> Vec<f64> {
    let n = 1usize << level;
    let dt = (b - a) / n as f64;
    let mut pts = Vec::with_capacity(n + 2);
    pts.push(a);
    for j in 0..n {
        pts.push(a + (j as f64 + 0.5) * dt);
    }
    pts.push(b);
    pts
}

/// Adaptive multiplicative Stieltjes integral of `exp(f dH)` over `[a, b]`.
///
/// Dyadic midpoint refinement; a level is accepted once the product, the
/// inverse product, and the half-shifted-partition product all agree with the
/// previous level within `tol`. Weights violating the existence theorem (for
/// example an interior jump) keep the shifted comparison bounded away from
/// zero and yield [`MultIntError::NoConvergence`].
pub fn multint_stieltjes<Ff, Hf>(
    f: Ff,
    h: Hf,
    a: f64,
    b: f64,
    tol: f64,
    max_levels: usize,
) -> Result<ProductIntegralResult>
where
    Ff: Fn(f64) -> f64,
    Hf: Fn(f64) -> CMatrix,
{
    assert!(b > a, "empty or reversed interval");
    let mut prev: Option<(CMatrix, CMatrix)> = None;
    let mut residual = f64::INFINITY;
    for level in 0..=max_levels {
        let pts = dyadic_points(a, b, level);
        let value = product_over_points(&f, &h, &pts, 1.0, false);
        let inverse = product_over_points(&f, &h, &pts, -1.0, true);
        let shifted = product_over_points(&f, &h, &shifted_points(a, b, level), 1.0, false);
        let scale = norm(&value).max(1.0);
        let shift_res = (&value - &shifted).norm();
        if let Some((pv, pi)) = &prev {
            let cauchy = (&value - pv).norm().max((&inverse - pi).norm());
            residual = cauchy.max(shift_res);
            if residual <= tol * scale {
                return Ok(ProductIntegralResult { value, levels_used: level, cauchy_residual: residual });
            }
        }
        prev = Some((value, inverse));
    }
    Err(MultIntError::NoConvergence { max_levels, residual })
}

/// Convenience wrapper integrating a sampled weight over its full grid span.
pub fn multint_stieltjes_weight<Ff>(
    f: Ff,
    w: &StieltjesWeight,
    tol: f64,
    max_levels: usize,
) -> Result<ProductIntegralResult>
where
    Ff: Fn(f64) -> f64,
{
    multint_stieltjes(f, |t| w.eval(t), w.a(), w.b(), tol, max_levels)
}

/// Route used by [`multint_lebesgue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LebesgueMethod {
    /// Dyadic products of `exp(dH_j)` with per-interval Gauss quadrature of
    /// the density.
    Product,
    /// Adaptive Dormand-Prince integration of `W' = W M(t)`.
    Ode,
}

// 4-point Gauss-Legendre nodes/weights on [-1, 1].
const GL4_X: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GL4_W: [f64; 4] = [
    0.3478548451374538,
    0.6521451548625461,
    0.6521451548625461,
    0.3478548451374538,
];

fn gauss_increment<M>(density: &M, lo: f64, hi: f64) -> CMatrix
where
    M: Fn(f64) -> CMatrix,
{
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = density(mid + half * GL4_X[0]) * cplx(GL4_W[0], 0.0);
    for k in 1..4 {
        acc += density(mid + half * GL4_X[k]) * cplx(GL4_W[k], 0.0);
    }
    acc * cplx(half, 0.0)
}

fn lebesgue_product_over_points<M>(density: &M, points: &[f64], sign: f64, reversed: bool) -> CMatrix
where
    M: Fn(f64) -> CMatrix,
{
    let mut factors = Vec::with_capacity(points.len().saturating_sub(1));
    for pair in points.windows(2) {
        let delta = gauss_increment(density, pair[0], pair[1]) * cplx(sign, 0.0);
        factors.push(expm(&delta));
    }
    let dim = factors.first().map_or(0, |m| m.nrows());
    let mut out = identity(dim);
    if reversed {
        for fm in factors.iter().rev() {
            out *= fm;
        }
    } else {
        for fm in factors.iter() {
            out *= fm;
        }
    }
    out
}

/// Multiplicative Lebesgue integral of a density over `[a, b]`.
pub fn multint_lebesgue<M>(
    density: M,
    a: f64,
    b: f64,
    method: LebesgueMethod,
    tol: f64,
) -> Result<ProductIntegralResult>
where
    M: Fn(f64) -> CMatrix,
{
    match method {
        LebesgueMethod::Product => {
            let max_levels = 24;
            let mut prev: Option<(CMatrix, CMatrix)> = None;
            let mut residual = f64::INFINITY;
            for level in 0..=max_levels {
                let pts = dyadic_points(a, b, level);
                let value = lebesgue_product_over_points(&density, &pts, 1.0, false);
                let inverse = lebesgue_product_over_points(&density, &pts, -1.0, true);
                let scale = norm(&value).max(1.0);
                if let Some((pv, pi)) = &prev {
                    residual = (&value - pv).norm().max((&inverse - pi).norm());
                    if residual <= tol * scale {
                        return Ok(ProductIntegralResult {
                            value,
                            levels_used: level,
                            cauchy_residual: residual,
                        });
                    }
                }
                prev = Some((value, inverse));
            }
            Err(MultIntError::NoConvergence { max_levels, residual })
        }
        LebesgueMethod::Ode => {
            let (value, steps) = dormand_prince(&density, a, b, tol)?;
            Ok(ProductIntegralResult { value, levels_used: steps, cauchy_residual: tol })
        }
    }
}

/// Adaptive Dormand-Prince 5(4) for `W' = W M(t)`, `W(a) = I`, with an
/// invertibility check on every accepted step.
fn dormand_prince<M>(density: &M, a: f64, b: f64, tol: f64) -> Result<(CMatrix, usize)>
where
    M: Fn(f64) -> CMatrix,
{
    let (mut trace, steps) = dormand_prince_checkpointed(density, a, b, tol, &[b])?;
    Ok((trace.pop().expect("one checkpoint"), steps))
}

/// Same integration, landing exactly on each checkpoint (sorted ascending,
/// within `[a, b]`) and recording the solution there.
fn dormand_prince_checkpointed<M>(
    density: &M,
    a: f64,
    b: f64,
    tol: f64,
    checkpoints: &[f64],
) -> Result<(Vec<CMatrix>, usize)>
where
    M: Fn(f64) -> CMatrix,
{
    let dim = density(a).nrows();
    let mut w = identity(dim);
    let mut t = a;
    let mut dt = (b - a) / 16.0;
    let mut accepted = 0usize;
    let mut recorded = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0usize;

    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let rhs = |t: f64, w: &CMatrix| -> CMatrix { w * density(t) };

    loop {
        while next_checkpoint < checkpoints.len() && t >= checkpoints[next_checkpoint] - 1e-15 * (b - a).max(1.0) {
            recorded.push(w.clone());
            next_checkpoint += 1;
        }
        if next_checkpoint >= checkpoints.len() {
            break;
        }
        let stop = checkpoints[next_checkpoint];
        let dt_eff = dt.min(stop - t);
        let mut k: Vec<CMatrix> = Vec::with_capacity(7);
        k.push(rhs(t, &w));
        for stage in 0..6 {
            let mut y = w.clone();
            for (j, kj) in k.iter().enumerate() {
                let coeff = A[stage][j];
                if coeff != 0.0 {
                    y += kj * cplx(dt_eff * coeff, 0.0);
                }
            }
            k.push(rhs(t + C[stage] * dt_eff, &y));
        }
        // 5th-order solution uses the last A row; k[6] was evaluated there.
        let mut w5 = w.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            let coeff = A[5][j];
            if coeff != 0.0 {
                w5 += kj * cplx(dt_eff * coeff, 0.0);
            }
        }
        let mut w4 = w.clone();
        for (j, kj) in k.iter().enumerate() {
            if B4[j] != 0.0 {
                w4 += kj * cplx(dt_eff * B4[j], 0.0);
            }
        }
        let err = (&w5 - &w4).norm();
        let scale = tol * norm(&w).max(1.0);
        let clipped = dt_eff < dt;
        if err <= scale {
            t += dt_eff;
            w = w5;
            accepted += 1;
            if w.clone().lu().determinant().norm() < 1e-280 {
                return Err(MultIntError::StepUnderflow(t));
            }
        }
        // Steps clipped to land on a checkpoint do not feed back into the
        // persistent step size unless they were rejected.
        if !clipped || err > scale {
            let factor = if err == 0.0 { 5.0 } else { 0.9 * (scale / err).powf(0.2) };
            dt = dt_eff * factor.clamp(0.2, 5.0);
        }
        if dt < 1e-14 * (b - a) {
            return Err(MultIntError::StepUnderflow(t));
        }
    }
    Ok((recorded, accepted))
}

/// Slack report for the three bounds
/// `||W|| <= e^rho`, `||W - I|| <= rho e^rho`,
/// `||W - (I + int f dH)|| <= rho^2 e^rho / 2` with `rho = int |f| dv`.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub rho: f64,
    pub value_norm: f64,
    /// `e^rho - ||W||`
    pub norm_slack: f64,
    /// `rho e^rho - ||W - I||`
    pub deviation_slack: f64,
    /// `rho^2 e^rho / 2 - ||W - (I + int f dH)||`
    pub linearization_slack: f64,
}

/// Evaluates the bound suite for a sampled weight.
pub fn bound_suite<Ff>(f: Ff, w: &StieltjesWeight, tol: f64, max_levels: usize) -> Result<BoundsReport>
where
    Ff: Fn(f64) -> f64,
{
    let value = multint_stieltjes_weight(&f, w, tol, max_levels)?.value;
    // rho = int |f| dv and the additive integral int f dH, both per grid
    // segment with Simpson in f (the interpolant is linear in H, so dv and dH
    // are proportional to dt inside a segment).
    let mut rho = 0.0f64;
    let dim = w.dim();
    let mut additive = CMatrix::zeros(dim, dim);
    for jdx in 1..w.grid.len() {
        let (lo, hi) = (w.grid[jdx - 1], w.grid[jdx]);
        let seg = &w.samples[jdx] - &w.samples[jdx - 1];
        let seg_var = seg.norm();
        let mid = 0.5 * (lo + hi);
        let mean_abs_f = (f(lo).abs() + 4.0 * f(mid).abs() + f(hi).abs()) / 6.0;
        let mean_f = (f(lo) + 4.0 * f(mid) + f(hi)) / 6.0;
        rho += mean_abs_f * seg_var;
        additive += seg * cplx(mean_f, 0.0);
    }
    let value_norm = op_norm(&value);
    let deviation = op_norm(&(&value - identity(dim)));
    let linearization = op_norm(&(&value - identity(dim) - additive));
    Ok(BoundsReport {
        rho,
        value_norm,
        norm_slack: rho.exp() - value_norm,
        deviation_slack: rho * rho.exp() - deviation,
        linearization_slack: 0.5 * rho * rho * rho.exp() - linearization,
    })
}

/// Residuals of the interval-splitting identity and the inverse identity
/// (left-ordered product of `exp(-f dH)`).
pub fn split_and_inverse_identities<Ff, Hf>(
    f: Ff,
    h: Hf,
    a: f64,
    c: f64,
    b: f64,
    tol: f64,
    max_levels: usize,
) -> Result<(f64, f64)>
where
    Ff: Fn(f64) -> f64,
    Hf: Fn(f64) -> CMatrix,
{
    assert!(a < c && c < b, "split point must be interior");
    let whole = multint_stieltjes(&f, &h, a, b, tol, max_levels)?.value;
    let left = multint_stieltjes(&f, &h, a, c, tol, max_levels)?.value;
    let right = multint_stieltjes(&f, &h, c, b, tol, max_levels)?.value;
    let split_residual = (&whole - left * right).norm();

    // Left-ordered product of exp(-f dH) at a fine dyadic level.
    let levels = 14usize.min(max_levels);
    let pts = dyadic_points(a, b, levels);
    let reversed = product_over_points(&f, &h, &pts, -1.0, true);
    let inv = crate::numerics::inverse(&whole).map_err(|_| MultIntError::NoConvergence {
        max_levels,
        residual: f64::INFINITY,
    })?;
    let inverse_residual = (&inv - reversed).norm();
    Ok((split_residual, inverse_residual))
}

/// Helly-type convergence report: residuals of `int exp(f_n dH_n)` against
/// the limit integral.
#[derive(Debug, Clone)]
pub struct HellyReport {
    pub residuals: Vec<f64>,
    pub final_below_tol: bool,
}

/// Checks the uniform-bound and uniform-Lipschitz hypotheses on the sequence,
/// then measures convergence of the product integrals.
#[allow(clippy::too_many_arguments)]
pub fn helly_harness<Ff>(
    fs: &[&dyn Fn(f64) -> f64],
    ws: &[StieltjesWeight],
    f_limit: Ff,
    w_limit: &StieltjesWeight,
    k_bound: f64,
    l_bound: f64,
    tol: f64,
    max_levels: usize,
) -> Result<HellyReport>
where
    Ff: Fn(f64) -> f64,
{
    assert_eq!(fs.len(), ws.len());
    for (index, (fv, wv)) in fs.iter().zip(ws.iter()).enumerate() {
        let mut sup = 0.0f64;
        let samples = 256;
        for s in 0..=samples {
            let t = wv.a() + (wv.b() - wv.a()) * s as f64 / samples as f64;
            sup = sup.max(fv(t).abs());
        }
        if sup > k_bound {
            return Err(MultIntError::HypothesisViolated {
                index,
                kind: "sup |f_n|",
                value: sup,
                bound: k_bound,
            });
        }
        let lip = wv.lipschitz_bound();
        if lip > l_bound {
            return Err(MultIntError::HypothesisViolated {
                index,
                kind: "Lipschitz quotient of H_n",
                value: lip,
                bound: l_bound,
            });
        }
    }
    let limit = multint_stieltjes_weight(&f_limit, w_limit, tol, max_levels)?.value;
    let mut residuals = Vec::with_capacity(fs.len());
    for (fv, wv) in fs.iter().zip(ws.iter()) {
        let val = multint_stieltjes_weight(fv, wv, tol, max_levels)?.value;
        residuals.push((&val - &limit).norm());
    }
    let final_below_tol = residuals.last().is_some_and(|&r| r <= 10.0 * tol);
    Ok(HellyReport { residuals, final_below_tol })
}
