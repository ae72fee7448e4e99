//! Triangular model operators at matrix scale.
//!
//! The discrete model acts on sequences: `(A h)_k = lambda_k h_k +
//! i sum_{l>k} eta_k* J eta_l h_l` with channel columns `eta_k`, one per
//! non-real eigenvalue. The continuous model acts on vector functions over
//! `[0, ell]`: `(A h)(x) = a(x) h(x) + i int_x^ell xi*(x) J xi(t) h(t) dt`,
//! discretized here by midpoint collocation on `N` uniform cells with the
//! cell measure folded into the inner product. The diagonal of the
//! discretized operator carries the half-cell term `i (dx/2) xi* J xi`, which
//! is exactly the compression to piecewise-constant functions and keeps the
//! colligation identity exact at the discrete level. The combined model
//! couples both parts through `i Phi~* J Phi^` and coincides with the product
//! of its parts.
//!
//! Also here: the spectral model built from the eigendata of `Re A`, the
//! redundant-part locator, the integration-operator ladder of nested cut-off
//! subspaces, the eigenvalue-trace completeness criterion for dissipative
//! matrices, and dissipative embedding.

use crate::charfn::eval_s;
use crate::colligation::{self, Colligation, Signature, SubspaceBasis};
use crate::numerics::{self, cplx, identity, norm, CMatrix, CVector, C64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model entry {index} violates eta* J eta = 2 Im lambda (residual {residual:.3e})")]
    ConstraintViolation { index: usize, residual: f64 },
    #[error("a(t) fails to be non-decreasing at sample {0}")]
    NotNondecreasing(usize),
    #[error("matrix is not dissipative (min eigenvalue of Im A is {0:.3e})")]
    NotDissipative(f64),
    #[error("z = {0} is a pole of the model characteristic function")]
    PoleAt(C64),
    #[error("invalid model data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Colligation(#[from] colligation::ColligationError),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Eigenvalue/channel-vector pairs of the discrete (l^2) model.
#[derive(Debug, Clone, Default)]
pub struct DiscreteModelData {
    pub lambdas: Vec<C64>,
    pub etas: Vec<CVector>,
}

impl DiscreteModelData {
    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    /// Checks `eta_k* J eta_k = 2 Im lambda_k` for every entry.
    pub fn validate(&self, j: &Signature, tol: f64) -> Result<()> {
        if self.lambdas.len() != self.etas.len() {
            return Err(ModelError::InvalidData(format!(
                "{} eigenvalues but {} channel vectors",
                self.lambdas.len(),
                self.etas.len()
            )));
        }
        for (index, (lambda, eta)) in self.lambdas.iter().zip(self.etas.iter()).enumerate() {
            if eta.len() != j.r() {
                return Err(ModelError::InvalidData(format!(
                    "channel vector {index} has length {}, expected {}",
                    eta.len(),
                    j.r()
                )));
            }
            let quad: f64 = eta.iter().zip(j.signs()).map(|(x, &s)| s as f64 * x.norm_sqr()).sum();
            let residual = (quad - 2.0 * lambda.im).abs();
            if residual > tol {
                return Err(ModelError::ConstraintViolation { index, residual });
            }
        }
        Ok(())
    }

    /// Truncation bookkeeping: `sum ||eta_k||^2` over the stored entries.
    pub fn channel_mass(&self) -> f64 {
        self.etas.iter().map(|e| e.norm_squared()).sum()
    }
}

/// Builds the discrete triangular model colligation out of its data.
pub fn build_discrete_model(d: &DiscreteModelData, j: &Signature) -> Result<Colligation> {
    d.validate(j, 1e-9)?;
    let k = d.len();
    let mut a = CMatrix::zeros(k, k);
    for row in 0..k {
        a[(row, row)] = d.lambdas[row];
        for col in row + 1..k {
            let coupling: C64 = d.etas[row]
                .iter()
                .zip(j.signs())
                .zip(d.etas[col].iter())
                .map(|((x, &s), y)| x.conj() * cplx(s as f64, 0.0) * y)
                .sum();
            a[(row, col)] = cplx(0.0, 1.0) * coupling;
        }
    }
    let mut phi = CMatrix::zeros(j.r(), k);
    for (col, eta) in d.etas.iter().enumerate() {
        phi.set_column(col, eta);
    }
    Ok(Colligation::new(a, phi, j.clone())?)
}

/// Sampled data of the continuous (L^2) model: a non-decreasing `a(t)` and an
/// `r x p` matrix function `xi(t)` on `[0, ell]` with `tr xi xi* = 1`
/// wherever `xi` does not vanish. Values between samples are interpolated
/// linearly.
#[derive(Debug, Clone)]
pub struct ContinuousModelData {
    ell: f64,
    grid: Vec<f64>,
    a: Vec<f64>,
    xi: Vec<CMatrix>,
    p: usize,
}

impl ContinuousModelData {
    pub fn new(ell: f64, grid: Vec<f64>, a: Vec<f64>, xi: Vec<CMatrix>) -> Result<Self> {
        if ell.is_nan() || ell <= 0.0 {
            return Err(ModelError::InvalidData("ell must be positive".into()));
        }
        if grid.len() < 2 || grid.len() != a.len() || grid.len() != xi.len() {
            return Err(ModelError::InvalidData("grid, a, xi must share length >= 2".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] != 0.0 || (grid[grid.len() - 1] - ell).abs() > 1e-12 {
            return Err(ModelError::InvalidData("grid must increase from 0 to ell".into()));
        }
        for (idx, w) in a.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 {
                return Err(ModelError::NotNondecreasing(idx + 1));
            }
        }
        let p = xi[0].ncols();
        let r = xi[0].nrows();
        if p > r {
            return Err(ModelError::InvalidData(format!("rank parameter p = {p} exceeds r = {r}")));
        }
        for (idx, x) in xi.iter().enumerate() {
            if x.nrows() != r || x.ncols() != p {
                return Err(ModelError::InvalidData(format!("xi sample {idx} has inconsistent shape")));
            }
            let trace: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            // tr(xi xi*) = 1 except where xi vanishes outright.
            if trace > 1e-12 && (trace - 1.0).abs() > 1e-8 {
                return Err(ModelError::InvalidData(format!(
                    "tr(xi xi*) = {trace:.6} at sample {idx}, expected 1 (or 0)"
                )));
            }
        }
        Ok(Self { ell, grid, a, xi, p })
    }

    /// Samples closures on a uniform grid.
    pub fn from_fns<Af, Xf>(ell: f64, a_fn: Af, xi_fn: Xf, samples: usize) -> Result<Self>
    where
        Af: Fn(f64) -> f64,
        Xf: Fn(f64) -> CMatrix,
    {
        assert!(samples >= 2);
        let grid: Vec<f64> = (0..samples)
            .map(|k| ell * k as f64 / (samples - 1) as f64)
            .collect();
        let a = grid.iter().map(|&t| a_fn(t)).collect();
        let xi = grid.iter().map(|&t| xi_fn(t)).collect();
        Self::new(ell, grid, a, xi)
    }

    /// Constant-data integration-operator profile `a = 0`, `xi = 1` (r = p = 1).
    pub fn integration_operator(ell: f64) -> Self {
        Self::from_fns(ell, |_| 0.0, |_| CMatrix::from_element(1, 1, C64::ONE), 2)
            .expect("constant data is valid")
    }

    /// Recovers `xi(t)` from a sampled density `M(t) = xi xi*` (the gauge
    /// freedom `xi -> xi U(t)` does not affect the model). The rank parameter
    /// `p` is the largest numerical rank of `M` over the samples, with
    /// eigenvalues below `1e-10 * tr M` discarded.
    pub fn from_density<Af, Mf>(ell: f64, a_fn: Af, density: Mf, samples: usize) -> Result<Self>
    where
        Af: Fn(f64) -> f64,
        Mf: Fn(f64) -> CMatrix,
    {
        assert!(samples >= 2);
        let grid: Vec<f64> = (0..samples)
            .map(|k| ell * k as f64 / (samples - 1) as f64)
            .collect();
        let a: Vec<f64> = grid.iter().map(|&t| a_fn(t)).collect();
        // Eigen-factor each sample and track the largest rank.
        let mut roots: Vec<(Vec<f64>, CMatrix)> = Vec::with_capacity(samples);
        let mut p = 0usize;
        for &t in &grid {
            let m = density(t);
            let (d, u) = numerics::hermitian_eig(&m)?;
            let trace: f64 = d.iter().sum();
            let cutoff = 1e-10 * trace.abs().max(1e-300);
            let rank = d.iter().filter(|&&x| x > cutoff).count();
            p = p.max(rank);
            roots.push((d.iter().copied().collect(), u));
        }
        let r = density(0.0).nrows();
        let p = p.max(1).min(r);
        let mut xi: Vec<CMatrix> = roots
            .into_iter()
            .map(|(d, u)| {
                // columns: eigenvectors scaled by sqrt(eigenvalue), largest first
                let mut order: Vec<usize> = (0..d.len()).collect();
                order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
                CMatrix::from_fn(r, p, |i, c| {
                    let idx = order[c];
                    u[(i, idx)] * cplx(d[idx].max(0.0).sqrt(), 0.0)
                })
            })
            .collect();
        // Align the eigenvector phases between consecutive samples so linear
        // interpolation of xi stays close to a root of the density.
        for k in 1..xi.len() {
            let (head, tail) = xi.split_at_mut(k);
            let prev = &head[k - 1];
            let cur = &mut tail[0];
            for c in 0..p {
                let overlap: C64 = (0..r).map(|i| prev[(i, c)].conj() * cur[(i, c)]).sum();
                if overlap.norm() > 1e-14 {
                    let phase = overlap.conj() / overlap.norm();
                    for i in 0..r {
                        cur[(i, c)] *= phase;
                    }
                }
            }
        }
        Self::new(ell, grid, a, xi)
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn rank(&self) -> usize {
        self.p
    }

    pub fn external_dim(&self) -> usize {
        self.xi[0].nrows()
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, self.ell);
        match self.grid.binary_search_by(|g| g.total_cmp(&t)) {
            Ok(i) => (i.max(1), if i == 0 { 0.0 } else { 1.0 }),
            Err(i) => {
                let i = i.clamp(1, self.grid.len() - 1);
                let w = (t - self.grid[i - 1]) / (self.grid[i] - self.grid[i - 1]);
                (i, w)
            }
        }
    }

    pub fn a_at(&self, t: f64) -> f64 {
        let (i, w) = self.locate(t);
        self.a[i - 1] * (1.0 - w) + self.a[i] * w
    }

    pub fn xi_at(&self, t: f64) -> CMatrix {
        let (i, w) = self.locate(t);
        &self.xi[i - 1] * cplx(1.0 - w, 0.0) + &self.xi[i] * cplx(w, 0.0)
    }
}

/// Midpoint data of one collocation cell.
struct Cell {
    a: f64,
    xi: CMatrix,
    width: f64,
}

fn cells(cmd: &ContinuousModelData, n: usize) -> Vec<Cell> {
    let dx = cmd.ell / n as f64;
    (0..n)
        .map(|k| {
            let x = (k as f64 + 0.5) * dx;
            Cell { a: cmd.a_at(x), xi: cmd.xi_at(x), width: dx }
        })
        .collect()
}

/// Discretizes the continuous model on `n` uniform cells by midpoint
/// collocation. With the half-cell diagonal term the result satisfies the
/// colligation identity exactly, not just in the `n -> infinity` limit.
pub fn build_continuous_model(cmd: &ContinuousModelData, j: &Signature, n: usize) -> Result<Colligation> {
    if cmd.external_dim() != j.r() {
        return Err(ModelError::InvalidData(format!(
            "xi has {} rows but the signature has r = {}",
            cmd.external_dim(),
            j.r()
        )));
    }
    assert!(n >= 1, "need at least one cell");
    let p = cmd.rank();
    let cs = cells(cmd, n);
    let dim = n * p;
    let mut a = CMatrix::zeros(dim, dim);
    let mut phi = CMatrix::zeros(j.r(), dim);
    for (kk, ck) in cs.iter().enumerate() {
        for (ll, cl) in cs.iter().enumerate().skip(kk) {
            let factor = if ll == kk { 0.5 * ck.width } else { cl.width };
            let block = (ck.xi.adjoint() * j.scale_rows(&cl.xi)) * cplx(0.0, factor);
            a.view_mut((kk * p, ll * p), (p, p)).copy_from(&block);
        }
        for q in 0..p {
            a[(kk * p + q, kk * p + q)] += cplx(ck.a, 0.0);
        }
        let col = &ck.xi * cplx(ck.width.sqrt(), 0.0);
        phi.view_mut((0, kk * p), (j.r(), p)).copy_from(&col);
    }
    Ok(Colligation::new(a, phi, j.clone())?)
}

/// Discrete + continuous data assembled into one triangular model.
#[derive(Debug, Clone)]
pub struct CombinedModel {
    pub discrete: DiscreteModelData,
    pub continuous: Option<ContinuousModelData>,
    /// Collocation cells for the continuous part.
    pub cells: usize,
}

impl CombinedModel {
    pub fn discrete_only(discrete: DiscreteModelData) -> Self {
        Self { discrete, continuous: None, cells: 0 }
    }

    pub fn continuous_only(continuous: ContinuousModelData, cells: usize) -> Self {
        Self { discrete: DiscreteModelData::default(), continuous: Some(continuous), cells }
    }
}

/// Assembles the block upper-triangular combined model
/// `A = [[A~, i Phi~* J Phi^], [0, A^]]`, `Phi = [Phi~, Phi^]`.
pub fn build_combined_model(cm: &CombinedModel, j: &Signature) -> Result<Colligation> {
    let discrete = build_discrete_model(&cm.discrete, j)?;
    let continuous = match &cm.continuous {
        Some(cmd) => build_continuous_model(cmd, j, cm.cells)?,
        None => Colligation::new(CMatrix::zeros(0, 0), CMatrix::zeros(j.r(), 0), j.clone())?,
    };
    let (nd, nc) = (discrete.n(), continuous.n());
    let coupling = discrete.phi().adjoint() * j.scale_rows(continuous.phi()) * cplx(0.0, 1.0);
    let mut a = CMatrix::zeros(nd + nc, nd + nc);
    a.view_mut((0, 0), (nd, nd)).copy_from(discrete.a());
    a.view_mut((0, nd), (nd, nc)).copy_from(&coupling);
    a.view_mut((nd, nd), (nc, nc)).copy_from(continuous.a());
    let mut phi = CMatrix::zeros(j.r(), nd + nc);
    phi.view_mut((0, 0), (j.r(), nd)).copy_from(discrete.phi());
    phi.view_mut((0, nd), (j.r(), nc)).copy_from(continuous.phi());
    Ok(Colligation::new(a, phi, j.clone())?)
}

/// Characteristic function of the model evaluated without the global
/// resolvent: the discrete part through its elementary-factor recursion, the
/// continuous part as the exact chain product over collocation cells.
pub fn model_charfn(cm: &CombinedModel, j: &Signature, z: C64) -> Result<CMatrix> {
    let r = j.r();
    let mut s = identity(r);
    for (lambda, eta) in cm.discrete.lambdas.iter().zip(cm.discrete.etas.iter()) {
        let denom = z - lambda;
        if denom.norm() <= 1e-14 * (1.0 + lambda.norm()) {
            return Err(ModelError::PoleAt(*lambda));
        }
        let outer = j.scale_cols(&(eta * eta.adjoint()));
        s *= identity(r) + outer * (cplx(0.0, 1.0) / denom);
    }
    if let Some(cmd) = &cm.continuous {
        let p = cmd.rank();
        for cell in cells(cmd, cm.cells) {
            // Exact cell colligation: fundamental operator
            // a I_p + i (dx/2) xi* J xi, channel sqrt(dx) xi.
            let gram = cell.xi.adjoint() * j.scale_rows(&cell.xi);
            let a_cell = identity(p) * cplx(cell.a, 0.0) + &gram * cplx(0.0, 0.5 * cell.width);
            let shifted = a_cell - identity(p) * z;
            let solved = numerics::solve(&shifted, &j.scale_rows(&cell.xi).adjoint())?;
            s *= identity(r) - (&cell.xi * solved) * cplx(0.0, cell.width);
        }
    }
    Ok(s)
}

/// First-order finite-product approximation of the continuous part's
/// multiplicative-integral representation: the right-ordered product of
/// `I + (i dx / (z - a(x_k))) xi_k xi_k* J` over `n` cells. Converges to the
/// characteristic function at rate `O(1/n)`, which makes it the natural
/// harness for observing the approximation-by-finite-products statement.
pub fn charfn_product_approximation(
    cmd: &ContinuousModelData,
    j: &Signature,
    z: C64,
    n: usize,
) -> Result<CMatrix> {
    let r = j.r();
    let mut s = identity(r);
    for cell in cells(cmd, n) {
        let denom = z - cplx(cell.a, 0.0);
        if denom.norm() <= 1e-14 * (1.0 + cell.a.abs()) {
            return Err(ModelError::PoleAt(cplx(cell.a, 0.0)));
        }
        let outer = &cell.xi * j.scale_cols(&cell.xi.adjoint().into_owned());
        s *= identity(r) + outer * (cplx(0.0, cell.width) / denom);
    }
    Ok(s)
}

/// Builds the spectral model colligation from the eigendata of `Re A`: with
/// `w_i = Phi u_i` the model is `A_m = diag(t_i) + (i/2) W* J W`, `Phi_m = W`,
/// which reproduces `V(z) = sum (w_i w_i*/2) / (t_i - z)` and hence the
/// characteristic function of the original colligation.
pub fn spectral_model(c: &Colligation) -> Result<Colligation> {
    let re = (c.a() + c.a().adjoint()).scale(0.5);
    let (d, u) = numerics::hermitian_eig(&re)?;
    let images = c.phi() * &u;
    let cutoff = numerics::RANK_TOL * (norm(c.phi()) + 1.0);
    let mut ts: Vec<f64> = Vec::new();
    let mut ws: Vec<CVector> = Vec::new();
    for i in 0..c.n() {
        let w = images.column(i).into_owned();
        if w.norm() > cutoff {
            ts.push(d[i]);
            ws.push(w);
        }
    }
    let m = ts.len();
    let mut w_mat = CMatrix::zeros(c.r(), m);
    for (i, w) in ws.iter().enumerate() {
        w_mat.set_column(i, w);
    }
    let gram = w_mat.adjoint() * c.j().scale_rows(&w_mat);
    let mut a = gram * cplx(0.0, 0.5);
    for (i, &t) in ts.iter().enumerate() {
        a[(i, i)] += cplx(t, 0.0);
    }
    Ok(Colligation::new(a, w_mat, c.j().clone())?)
}

/// Locates the redundant part of an assembled combined model. The returned
/// basis is orthogonal to the discrete block (the redundant subspace of the
/// combined model lives entirely in the continuous part).
pub fn model_redundant_part(cm: &CombinedModel, j: &Signature) -> Result<SubspaceBasis> {
    let model = build_combined_model(cm, j)?;
    let (_, _, principal) = model.principal_split(1e-10);
    Ok(principal.complement())
}

/// One rung of the integration-operator invariant-subspace ladder.
#[derive(Debug, Clone)]
pub struct UnicellularStep {
    /// Cut-off point: the subspace of functions vanishing on `[sigma, ell]`.
    pub sigma: f64,
    pub dim: usize,
    pub invariance_residual: f64,
    /// `|S_sigma(i)|`, the modulus of the projected characteristic function.
    pub s_abs: f64,
}

/// Enumerates nested cut-off subspaces `L_sigma` of the discretized
/// integration operator, verifying invariance and evaluating the divisor
/// moduli `|S_sigma(i)|` (strictly increasing in `sigma`: the divisors are
/// totally ordered).
pub fn unicellular_demo(ell: f64, n: usize, steps: usize) -> Result<Vec<UnicellularStep>> {
    assert!(n >= 2 && steps >= 1);
    let data = ContinuousModelData::integration_operator(ell);
    let j = Signature::plus(1);
    let model = build_continuous_model(&data, &j, n)?;
    let z = cplx(0.0, 1.0);
    let mut out = Vec::new();
    let mut dims: Vec<usize> = (1..=steps)
        .map(|k| ((k as f64 / steps as f64) * n as f64).round() as usize)
        .filter(|&m| m >= 1 && m <= n)
        .collect();
    dims.dedup();
    out.push(UnicellularStep { sigma: 0.0, dim: 0, invariance_residual: 0.0, s_abs: 1.0 });
    for m in dims {
        let axes: Vec<usize> = (0..m).collect();
        let sub = SubspaceBasis::coordinates(n, &axes);
        let invariance_residual = colligation::invariance_residual(model.a(), &sub);
        let projected = model.project(&sub)?;
        let sample = eval_s(&projected, z);
        let s_abs = sample.s[(0, 0)].norm();
        out.push(UnicellularStep {
            sigma: ell * m as f64 / n as f64,
            dim: m,
            invariance_residual,
            s_abs,
        });
    }
    Ok(out)
}

/// Eigenvalue-trace report for a dissipative matrix: `sum Im lambda_k` never
/// exceeds `tr Im A`, with equality exactly when the triangular model has no
/// continuous part.
#[derive(Debug, Clone)]
pub struct CompletenessReport {
    pub sum_im_eigs: f64,
    pub trace_im: f64,
    /// `tr Im A - sum Im lambda_k`, the mass of the continuous model part.
    pub slack: f64,
    pub complete: bool,
    /// Norm of the strictly upper triangle of the Schur factor; zero for
    /// normal matrices. Reported, not asserted.
    pub normality_defect: f64,
}

pub fn completeness_criterion(a: &CMatrix) -> Result<CompletenessReport> {
    let im = (a - a.adjoint()) * cplx(0.0, -0.5);
    let (d, _) = numerics::hermitian_eig(&im)?;
    let min_eig = d.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 * norm(a).max(1.0) {
        return Err(ModelError::NotDissipative(min_eig));
    }
    let (_, t) = numerics::schur(a)?;
    let n = a.nrows();
    let sum_im_eigs: f64 = (0..n).map(|i| t[(i, i)].im).sum();
    let trace_im: f64 = (0..n).map(|i| a[(i, i)].im).sum();
    let slack = trace_im - sum_im_eigs;
    let mut defect = 0.0f64;
    for i in 0..n {
        for jdx in i + 1..n {
            defect += t[(i, jdx)].norm_sqr();
        }
    }
    Ok(CompletenessReport {
        sum_im_eigs,
        trace_im,
        slack,
        complete: slack <= 1e-8,
        normality_defect: defect.sqrt(),
    })
}

/// Embeds a dissipative matrix (`Im A >= 0`) in a dissipative colligation:
/// channel `ran(Im A)`, identity signature.
pub fn dissipative_embed(a: &CMatrix) -> Result<Colligation> {
    let im = (a - a.adjoint()) * cplx(0.0, -0.5);
    let (d, _) = numerics::hermitian_eig(&im)?;
    let min_eig = d.iter().copied().fold(f64::INFINITY, f64::min);
    if a.nrows() > 0 && min_eig < -1e-10 * norm(a).max(1.0) {
        return Err(ModelError::NotDissipative(min_eig));
    }
    let c = colligation::embed(a, None)?;
    debug_assert!(c.j().q() == 0, "dissipative embedding must have J = I");
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn;
    use crate::factorize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CMatrix {
        CMatrix::from_fn(n, m, |_, _| cplx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn scalar_pair_data() -> (DiscreteModelData, Signature) {
        let data = DiscreteModelData {
            lambdas: vec![cplx(0.0, 1.0), cplx(0.0, 2.0)],
            etas: vec![
                CVector::from_element(1, cplx(2f64.sqrt(), 0.0)),
                CVector::from_element(1, cplx(2.0, 0.0)),
            ],
        };
        (data, Signature::plus(1))
    }

    #[test]
    fn discrete_model_single_entry_is_scalar_colligation() {
        let data = DiscreteModelData {
            lambdas: vec![cplx(0.0, 1.0)],
            etas: vec![CVector::from_element(1, cplx(2f64.sqrt(), 0.0))],
        };
        let c = build_discrete_model(&data, &Signature::plus(1)).unwrap();
        assert_eq!(c.n(), 1);
        assert!((c.a()[(0, 0)] - cplx(0.0, 1.0)).norm() < 1e-14);
        assert!(c.validate(1e-10).pass);
    }

    #[test]
    fn discrete_model_pair_charfn_value() {
        let (data, j) = scalar_pair_data();
        let c = build_discrete_model(&data, &j).unwrap();
        assert!(c.validate(1e-10).pass);
        let s = eval_s(&c, cplx(0.0, 3.0));
        assert!(s.regular);
        assert!((s.s[(0, 0)] - cplx(10.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn discrete_model_empty() {
        let c = build_discrete_model(&DiscreteModelData::default(), &Signature::plus(2)).unwrap();
        assert_eq!(c.n(), 0);
        let s = eval_s(&c, cplx(0.0, 1.0));
        assert!((s.s - identity(2)).norm() < 1e-14);
    }

    #[test]
    fn discrete_model_rejects_bad_constraint() {
        let data = DiscreteModelData {
            lambdas: vec![cplx(0.0, 1.0)],
            etas: vec![CVector::from_element(1, C64::ONE)], // eta* J eta = 1 != 2
        };
        let err = build_discrete_model(&data, &Signature::plus(1)).unwrap_err();
        assert!(matches!(err, ModelError::ConstraintViolation { index: 0, .. }));
    }

    #[test]
    fn continuous_model_is_exact_colligation() {
        let data = ContinuousModelData::integration_operator(1.0);
        let c = build_continuous_model(&data, &Signature::plus(1), 64).unwrap();
        let report = c.validate(1e-9);
        assert!(report.pass, "residual {}", report.identity_residual);
        assert!(report.identity_residual < 1e-12);
    }

    #[test]
    fn integration_operator_charfn_near_closed_form() {
        // S(i) for the length-1 integration operator is e^{i/i} = e.
        let data = ContinuousModelData::integration_operator(1.0);
        let c = build_continuous_model(&data, &Signature::plus(1), 200).unwrap();
        let s = eval_s(&c, cplx(0.0, 1.0));
        assert!(s.regular);
        assert!((s.s[(0, 0)].re - 1f64.exp()).abs() < 2e-2);
        assert!(s.s[(0, 0)].im.abs() < 1e-8);
    }

    #[test]
    fn continuous_model_zero_xi_is_closed() {
        let data = ContinuousModelData::from_fns(1.0, |t| t, |_| CMatrix::zeros(1, 1), 5).unwrap();
        let c = build_continuous_model(&data, &Signature::plus(1), 16).unwrap();
        let s = eval_s(&c, cplx(0.3, 1.0));
        assert!((s.s - identity(1)).norm() < 1e-14);
    }

    #[test]
    fn continuous_model_rejects_decreasing_a() {
        let err = ContinuousModelData::from_fns(1.0, |t| -t, |_| CMatrix::from_element(1, 1, C64::ONE), 4)
            .unwrap_err();
        assert!(matches!(err, ModelError::NotNondecreasing(_)));
    }

    #[test]
    fn continuous_model_matches_multiplicative_integral() {
        // a(t) = t, xi = 1: S(z) equals the multiplicative Lebesgue integral
        // of (i/(z - a(t))) xi xi* J up to the collocation error.
        let data = ContinuousModelData::from_fns(1.0, |t| t, |_| CMatrix::from_element(1, 1, C64::ONE), 32).unwrap();
        let j = Signature::plus(1);
        let z = cplx(2.0, 2.0);
        let c = build_continuous_model(&data, &j, 100).unwrap();
        let s = eval_s(&c, z);
        let w = crate::multint::multint_lebesgue(
            |t| CMatrix::from_element(1, 1, cplx(0.0, 1.0) / (z - cplx(t, 0.0))),
            0.0,
            1.0,
            crate::multint::LebesgueMethod::Ode,
            1e-10,
        )
        .unwrap();
        assert!((s.s[(0, 0)] - w.value[(0, 0)]).norm() < 5e-3);
    }

    #[test]
    fn combined_model_equals_product_of_parts() {
        let (data, j) = scalar_pair_data();
        let cmd = ContinuousModelData::integration_operator(1.0);
        let cm = CombinedModel { discrete: data.clone(), continuous: Some(cmd.clone()), cells: 50 };
        let combined = build_combined_model(&cm, &j).unwrap();
        assert!(combined.validate(1e-9).pass);
        let discrete = build_discrete_model(&data, &j).unwrap();
        let continuous = build_continuous_model(&cmd, &j, 50).unwrap();
        let product = discrete.product(&continuous).unwrap();
        assert!((combined.a() - product.a()).norm() < 1e-10);
        assert!((combined.phi() - product.phi()).norm() < 1e-10);
        // multiplicativity of the characteristic function across the blocks
        let z = cplx(0.0, 5.0);
        let s_comb = eval_s(&combined, z).s;
        let s_d = eval_s(&discrete, z).s;
        let s_c = eval_s(&continuous, z).s;
        assert!((s_comb - s_d * s_c).norm() < 1e-8);
    }

    #[test]
    fn combined_model_empty_parts() {
        let (data, j) = scalar_pair_data();
        let only_discrete = build_combined_model(&CombinedModel::discrete_only(data.clone()), &j).unwrap();
        assert_eq!(only_discrete.n(), 2);
        let cmd = ContinuousModelData::integration_operator(1.0);
        let only_continuous =
            build_combined_model(&CombinedModel::continuous_only(cmd, 10), &Signature::plus(1)).unwrap();
        assert_eq!(only_continuous.n(), 10);
    }

    #[test]
    fn model_charfn_matches_resolvent_route() {
        let (data, j) = scalar_pair_data();
        let cmd = ContinuousModelData::integration_operator(1.0);
        let cm = CombinedModel { discrete: data, continuous: Some(cmd), cells: 40 };
        let model = build_combined_model(&cm, &j).unwrap();
        for z in [cplx(0.0, 3.0), cplx(1.0, 1.5), cplx(-2.0, 2.0)] {
            let direct = model_charfn(&cm, &j, z).unwrap();
            let via_resolvent = eval_s(&model, z);
            assert!(via_resolvent.regular);
            assert!((direct - via_resolvent.s).norm() <= 1e-8);
        }
    }

    #[test]
    fn model_charfn_empty_and_pair() {
        let j = Signature::plus(1);
        let empty = CombinedModel::discrete_only(DiscreteModelData::default());
        assert!((model_charfn(&empty, &j, cplx(0.0, 1.0)).unwrap() - identity(1)).norm() < 1e-14);
        let (data, j) = scalar_pair_data();
        let cm = CombinedModel::discrete_only(data);
        let s = model_charfn(&cm, &j, cplx(0.0, 3.0)).unwrap();
        assert!((s[(0, 0)] - cplx(10.0, 0.0)).norm() < 1e-12);
        assert!(matches!(model_charfn(&cm, &j, cplx(0.0, 1.0)), Err(ModelError::PoleAt(_))));
    }

    #[test]
    fn model_charfn_integration_operator_near_e() {
        let cmd = ContinuousModelData::integration_operator(1.0);
        let cm = CombinedModel::continuous_only(cmd, 400);
        let s = model_charfn(&cm, &Signature::plus(1), cplx(0.0, 1.0)).unwrap();
        assert!((s[(0, 0)].re - 1f64.exp()).abs() < 1e-2);
    }

    #[test]
    fn continuous_model_convergence_constant() {
        // |S_N(i) - e| <= C/N on both evaluation routes with a small C.
        let cmd = ContinuousModelData::integration_operator(1.0);
        let j = Signature::plus(1);
        let e = 1f64.exp();
        let mut c_fit: f64 = 0.0;
        for n in [50usize, 100, 200, 400] {
            let model = build_continuous_model(&cmd, &j, n).unwrap();
            let s = eval_s(&model, cplx(0.0, 1.0));
            c_fit = c_fit.max(n as f64 * (s.s[(0, 0)].re - e).abs());
            let approx = charfn_product_approximation(&cmd, &j, cplx(0.0, 1.0), n).unwrap();
            c_fit = c_fit.max(n as f64 * (approx[(0, 0)].re - e).abs());
        }
        assert!(c_fit <= 10.0, "fitted constant {c_fit}");
    }

    #[test]
    fn product_approximation_first_order_rate() {
        let cmd = ContinuousModelData::integration_operator(1.0);
        let j = Signature::plus(1);
        let z = cplx(0.0, 1.0);
        let e = 1f64.exp();
        let mut errors = Vec::new();
        for n in [50usize, 100, 200, 400] {
            let s = charfn_product_approximation(&cmd, &j, z, n).unwrap();
            errors.push((s[(0, 0)].re - e).abs());
        }
        assert!(errors[3] <= 1e-2);
        for k in 1..errors.len() {
            let ratio = errors[k - 1] / errors[k];
            assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn spectral_model_scalar_reproduces_alpha_i() {
        let c = Colligation::new(
            CMatrix::from_element(1, 1, cplx(0.0, 1.0)),
            CMatrix::from_element(1, 1, cplx(2f64.sqrt(), 0.0)),
            Signature::plus(1),
        )
        .unwrap();
        let m = spectral_model(&c).unwrap();
        assert_eq!(m.n(), 1);
        assert!((m.a()[(0, 0)] - cplx(0.0, 1.0)).norm() < 1e-12);
        assert!((m.phi()[(0, 0)].norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectral_model_hermitian_diagonalizes() {
        let mut r = rng(70);
        let h_raw = random_matrix(&mut r, 4, 4);
        let h = (&h_raw + h_raw.adjoint()).scale(0.5);
        let c = colligation::embed(&h, Some(&SubspaceBasis::full(4))).unwrap();
        let m = spectral_model(&c).unwrap();
        assert!(m.validate(m.default_tol()).pass);
        // fundamental operator should be diagonal up to the vanished coupling
        for z in [cplx(0.0, 2.0), cplx(1.0, -1.5)] {
            let v1 = charfn::eval_v(&c, z).unwrap();
            let v2 = charfn::eval_v(&m, z).unwrap();
            assert!((v1 - v2).norm() < 1e-9);
        }
    }

    #[test]
    fn spectral_model_matches_v_and_s_random() {
        let mut r = rng(71);
        for _ in 0..3 {
            let c = {
                let re_raw = random_matrix(&mut r, 5, 5);
                let re = (&re_raw + re_raw.adjoint()).scale(0.5);
                let phi = random_matrix(&mut r, 2, 5);
                let j = Signature::plus(2);
                let gram = phi.adjoint() * j.scale_rows(&phi);
                Colligation::new(re + gram.scale(0.5) * cplx(0.0, 1.0), phi, j).unwrap()
            };
            let m = spectral_model(&c).unwrap();
            assert!(m.validate(m.default_tol()).pass);
            for _ in 0..10 {
                let z = cplx(r.random_range(-1.0..1.0), r.random_range(1.0..2.5));
                let v1 = charfn::eval_v(&c, z).unwrap();
                let v2 = charfn::eval_v(&m, z).unwrap();
                assert!((v1 - v2).norm() <= 1e-9);
                let s1 = eval_s(&c, z);
                let s2 = eval_s(&m, z);
                assert!((s1.s - s2.s).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn spectral_model_unitarily_equivalent_for_simple() {
        let mut r = rng(72);
        let c = {
            let re_raw = random_matrix(&mut r, 5, 5);
            let re = (&re_raw + re_raw.adjoint()).scale(0.5);
            let phi = random_matrix(&mut r, 2, 5);
            let j = Signature::plus(2);
            let gram = phi.adjoint() * j.scale_rows(&phi);
            Colligation::new(re + gram.scale(0.5) * cplx(0.0, 1.0), phi, j).unwrap()
        };
        assert!(c.is_simple(1e-10));
        let m = spectral_model(&c).unwrap();
        let u = colligation::unitary_equivalence(&c, &m, 10, 1e-8)
            .unwrap()
            .expect("simple colligation must be equivalent to its spectral model");
        assert!((&u * c.a() - m.a() * &u).norm() < 1e-7);
        assert!((c.phi() - m.phi() * &u).norm() < 1e-7);
    }

    #[test]
    fn redundant_part_of_integration_operator_is_trivial() {
        let cmd = ContinuousModelData::integration_operator(1.0);
        let cm = CombinedModel::continuous_only(cmd, 24);
        let red = model_redundant_part(&cm, &Signature::plus(1)).unwrap();
        assert_eq!(red.dim(), 0);
    }

    #[test]
    fn redundant_part_of_pure_discrete_model_is_trivial() {
        let (data, j) = scalar_pair_data();
        let cm = CombinedModel::discrete_only(data);
        let red = model_redundant_part(&cm, &j).unwrap();
        assert_eq!(red.dim(), 0);
    }

    #[test]
    fn redundant_part_sits_on_vanishing_xi_cells() {
        // xi = 1 on the first half, 0 on the second half; samples are placed
        // at the cell midpoints so interpolation is exact there.
        let n = 8usize;
        let mut grid = vec![0.0];
        for k in 0..n {
            grid.push((k as f64 + 0.5) / n as f64);
        }
        grid.push(1.0);
        let xi_of = |t: f64| {
            if t < 0.5 {
                CMatrix::from_element(1, 1, C64::ONE)
            } else {
                CMatrix::zeros(1, 1)
            }
        };
        let a: Vec<f64> = grid.to_vec();
        let xi: Vec<CMatrix> = grid.iter().map(|&t| xi_of(t)).collect();
        let cmd = ContinuousModelData::new(1.0, grid, a, xi).unwrap();
        let j = Signature::plus(1);
        let cm = CombinedModel::continuous_only(cmd, n);
        let red = model_redundant_part(&cm, &j).unwrap();
        assert_eq!(red.dim(), n / 2);
        // redundant directions live on the last n/2 coordinates
        for col in 0..red.dim() {
            for row in 0..n / 2 {
                assert!(red.columns()[(row, col)].norm() < 1e-8);
            }
        }
        // and in the combined model they are orthogonal to the (empty)
        // discrete block by construction.
    }

    #[test]
    fn from_density_recovers_rank_and_product() {
        // M(t) = xi(t) xi(t)* for a rotating unit vector: p = 1, tr M = 1.
        let xi_true = |t: f64| {
            CMatrix::from_fn(2, 1, |i, _| {
                if i == 0 {
                    cplx((0.8 * t).cos(), 0.0)
                } else {
                    cplx((0.8 * t).sin(), 0.1).scale(1.0 / (1.0 + 0.01f64).sqrt())
                }
            })
        };
        // normalize so tr(xi xi*) = 1 exactly
        let xi_unit = move |t: f64| {
            let x = xi_true(t);
            let n = x.norm();
            x / cplx(n, 0.0)
        };
        let density = move |t: f64| {
            let x = xi_unit(t);
            &x * x.adjoint()
        };
        let data = ContinuousModelData::from_density(1.0, |t| t, density, 33).unwrap();
        assert_eq!(data.rank(), 1);
        // xi xi* matches the density at samples and between them
        for k in 0..=64 {
            let t = k as f64 / 64.0;
            let x = data.xi_at(t);
            assert!((&x * x.adjoint() - density(t)).norm() < 1e-3, "density mismatch at t = {t}");
        }
        let c = build_continuous_model(&data, &Signature::plus(2), 32).unwrap();
        assert!(c.validate(1e-9).pass);
    }

    #[test]
    fn unicellular_ladder_monotone() {
        let steps = unicellular_demo(1.0, 64, 8).unwrap();
        assert!((steps[0].s_abs - 1.0).abs() < 1e-14);
        for w in steps.windows(2) {
            assert!(w[1].s_abs > w[0].s_abs, "divisor moduli must increase");
        }
        for s in &steps {
            assert!(s.invariance_residual <= 1e-9);
        }
        // sigma = ell: |S(i)| near e; sigma = ell/2: near sqrt(e)
        let last = steps.last().unwrap();
        assert!((last.s_abs - 1f64.exp()).abs() < 2e-2);
        let mid = steps.iter().find(|s| (s.sigma - 0.5).abs() < 1e-9).unwrap();
        assert!((mid.s_abs - 0.5f64.exp()).abs() < 2e-2);
    }

    #[test]
    fn completeness_diagonal_example() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![cplx(0.0, 1.0), cplx(0.0, 2.0)]));
        let rep = completeness_criterion(&a).unwrap();
        assert!((rep.sum_im_eigs - 3.0).abs() < 1e-12);
        assert!((rep.trace_im - 3.0).abs() < 1e-12);
        assert!(rep.slack.abs() < 1e-12);
        assert!(rep.complete);
    }

    #[test]
    fn completeness_jordan_like_example() {
        // A = [[i, 10], [0, i]]: Im A = [[1, -5i], [5i, 1]] which is NOT
        // positive semidefinite (eigenvalues 1 +- 5), so not dissipative.
        let a = CMatrix::from_row_slice(2, 2, &[cplx(0.0, 1.0), cplx(10.0, 0.0), C64::ZERO, cplx(0.0, 1.0)]);
        let im = (&a - a.adjoint()) * cplx(0.0, -0.5);
        assert!((im[(0, 1)] - cplx(0.0, -5.0)).norm() < 1e-14);
        assert!(matches!(completeness_criterion(&a), Err(ModelError::NotDissipative(_))));

        // The dissipative variant with small coupling keeps slack ~ 0 while
        // being non-normal.
        let a = CMatrix::from_row_slice(2, 2, &[cplx(0.0, 1.0), cplx(0.5, 0.0), C64::ZERO, cplx(0.0, 1.0)]);
        let rep = completeness_criterion(&a).unwrap();
        assert!((rep.sum_im_eigs - 2.0).abs() < 1e-9);
        assert!((rep.trace_im - 2.0).abs() < 1e-12);
        assert!(rep.slack.abs() < 1e-9);
        assert!(rep.normality_defect > 0.4);
    }

    #[test]
    fn completeness_hermitian_trivial() {
        let mut r = rng(73);
        let h_raw = random_matrix(&mut r, 3, 3);
        let h = (&h_raw + h_raw.adjoint()).scale(0.5);
        let rep = completeness_criterion(&h).unwrap();
        assert!(rep.sum_im_eigs.abs() < 1e-8);
        assert!(rep.trace_im.abs() < 1e-12);
        assert!(rep.complete);
    }

    #[test]
    fn completeness_random_dissipative_slack_nonnegative() {
        let mut r = rng(74);
        for _ in 0..20 {
            let n = r.random_range(2..=10);
            let re_raw = random_matrix(&mut r, n, n);
            let re = (&re_raw + re_raw.adjoint()).scale(0.5);
            let b = random_matrix(&mut r, n, n);
            let psd = &b * b.adjoint();
            let a = re + psd * cplx(0.0, 1.0);
            let rep = completeness_criterion(&a).unwrap();
            assert!(rep.slack >= -1e-9, "slack {}", rep.slack);
        }
    }

    #[test]
    fn dissipative_embed_cases() {
        let a = CMatrix::from_element(1, 1, cplx(0.0, 1.0));
        let c = dissipative_embed(&a).unwrap();
        assert_eq!(c.r(), 1);
        assert!((c.phi()[(0, 0)].norm() - 2f64.sqrt()).abs() < 1e-12);

        let mut r = rng(75);
        let h_raw = random_matrix(&mut r, 3, 3);
        let h = (&h_raw + h_raw.adjoint()).scale(0.5);
        assert_eq!(dissipative_embed(&h).unwrap().r(), 0);

        let not_dissipative = CMatrix::from_element(1, 1, cplx(0.0, -1.0));
        assert!(matches!(dissipative_embed(&not_dissipative), Err(ModelError::NotDissipative(_))));
    }

    #[test]
    fn dissipative_embed_of_discretized_integration_operator() {
        // Build the collocation matrix, then re-embed it: rank(Im A) = 1 and
        // the characteristic function still evaluates to ~ e at z = i.
        let cmd = ContinuousModelData::integration_operator(1.0);
        let j = Signature::plus(1);
        let model = build_continuous_model(&cmd, &j, 100).unwrap();
        let c = dissipative_embed(model.a()).unwrap();
        assert_eq!(c.r(), 1);
        assert!(c.is_simple(1e-10));
        let s = eval_s(&c, cplx(0.0, 1.0));
        assert!((s.s[(0, 0)].re - 1f64.exp()).abs() < 5e-2);
    }

    #[test]
    fn factorize_then_rebuild_discrete_model() {
        // Round trip: simple colligation with strictly dissipative Im A, so
        // every eigenvalue is non-real; extract Blaschke data, rebuild the
        // discrete model, compare characteristic functions.
        let mut r = rng(76);
        for _ in 0..3 {
            let n = 4;
            let re_raw = random_matrix(&mut r, n, n);
            let re = (&re_raw + re_raw.adjoint()).scale(0.5);
            let phi = random_matrix(&mut r, n, n) + identity(n).scale(2.0);
            let j = Signature::plus(n);
            let gram = phi.adjoint() * j.scale_rows(&phi);
            let c = Colligation::new(re + gram.scale(0.5) * cplx(0.0, 1.0), phi, j.clone()).unwrap();
            let bp = factorize::potapov_factorize(&c).unwrap();
            let data = DiscreteModelData {
                lambdas: bp.factors.iter().map(|f| f.lambda).collect(),
                etas: bp.factors.iter().map(|f| f.eta.clone()).collect(),
            };
            let model = build_discrete_model(&data, &j).unwrap();
            for _ in 0..10 {
                let z = cplx(r.random_range(-2.0..2.0), r.random_range(3.0..6.0));
                let s1 = eval_s(&c, z);
                let s2 = eval_s(&model, z);
                assert!((s1.s - s2.s).norm() <= 1e-8);
            }
        }
    }
}
