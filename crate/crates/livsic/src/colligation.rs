//! Operator colligations `(A, Phi, J)` and their structure theory.
//!
//! A colligation ties a square matrix `A` on the internal space to a channel
//! map `Phi` into an `r`-dimensional external space with signature `J` through
//! the identity `(A - A*)/i = Phi* J Phi`. The operations here mirror the
//! algebra of open systems: embedding a bare matrix, adjoints, products
//! (cascade coupling), projections onto subspaces, splitting off the maximal
//! closed (self-adjoint) subsystem, chain factorizations along invariant
//! subspaces, and the Gram-matrix test for unitary equivalence.

use crate::numerics::{self, cplx, identity, norm, CMatrix, CVector, C64};
use nalgebra::DVector;
use thiserror::Error;

/// Default relative tolerance for the colligation identity.
pub const COLLIGATION_TOL: f64 = 1e-10;
/// Default residual threshold for subspace invariance checks.
pub const INVARIANCE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ColligationError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("signature entries must be +1 or -1")]
    BadSignature,
    #[error("external spaces differ (dimensions or signatures)")]
    ExternalMismatch,
    #[error("channel does not contain ran(Im A) (projection residual {0:.3e})")]
    ChannelTooSmall(f64),
    #[error("subspace basis is not orthonormal (residual {0:.3e})")]
    NotOrthonormal(f64),
    #[error("chain member {index} is not invariant (residual {residual:.3e})")]
    NotInvariant { index: usize, residual: f64 },
    #[error("chain is not strictly increasing at member {0}")]
    ChainNotIncreasing(usize),
    #[error("colligation is not simple (principal dimension {principal} < {n})")]
    NotSimple { principal: usize, n: usize },
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, ColligationError>;

/// The directing operator `J = J* = J^{-1}`, stored as its +-1 signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    signs: Vec<i8>,
}

impl Signature {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(ColligationError::BadSignature);
        }
        Ok(Self { signs })
    }

    /// All-plus signature (`J = I`), the dissipative case.
    pub fn plus(r: usize) -> Self {
        Self { signs: vec![1; r] }
    }

    pub fn r(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Number of direct (+1) channels.
    pub fn p(&self) -> usize {
        self.signs.iter().filter(|&&s| s == 1).count()
    }

    /// Number of inverse (-1) channels.
    pub fn q(&self) -> usize {
        self.signs.len() - self.p()
    }

    pub fn negated(&self) -> Self {
        Self { signs: self.signs.iter().map(|s| -s).collect() }
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.r(), self.r(), |i, j| {
            if i == j { cplx(self.signs[i] as f64, 0.0) } else { C64::ZERO }
        })
    }

    /// `J * m` without forming the diagonal matrix.
    pub fn scale_rows(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for (i, &s) in self.signs.iter().enumerate() {
            if s < 0 {
                for j in 0..out.ncols() {
                    out[(i, j)] = -out[(i, j)];
                }
            }
        }
        out
    }

    /// `m * J` without forming the diagonal matrix.
    pub fn scale_cols(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for (j, &s) in self.signs.iter().enumerate() {
            if s < 0 {
                for i in 0..out.nrows() {
                    out[(i, j)] = -out[(i, j)];
                }
            }
        }
        out
    }
}

/// Residuals of the defining identities, produced by [`Colligation::validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// `|| J - J* ||` and `|| J^2 - I ||` combined; zero by construction here.
    pub involution_residual: f64,
    /// `|| (A - A*)/i - Phi* J Phi ||`.
    pub identity_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// An operator colligation `(C^n, C^r; A, Phi, J)`.
#[derive(Debug, Clone)]
pub struct Colligation {
    a: CMatrix,
    phi: CMatrix,
    j: Signature,
}

impl Colligation {
    /// Assembles a colligation after shape checks. The identity itself is not
    /// enforced here; use [`Colligation::validate`] (constructors in this
    /// crate always produce valid colligations).
    pub fn new(a: CMatrix, phi: CMatrix, j: Signature) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(ColligationError::ShapeMismatch(format!(
                "fundamental operator must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if phi.ncols() != a.nrows() || phi.nrows() != j.r() {
            return Err(ColligationError::ShapeMismatch(format!(
                "channel map must be {}x{}, got {}x{}",
                j.r(),
                a.nrows(),
                phi.nrows(),
                phi.ncols()
            )));
        }
        Ok(Self { a, phi, j })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn r(&self) -> usize {
        self.j.r()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn phi(&self) -> &CMatrix {
        &self.phi
    }

    pub fn j(&self) -> &Signature {
        &self.j
    }

    /// `(A - A*)/i`, twice the imaginary part of `A`.
    pub fn imag_defect(&self) -> CMatrix {
        (&self.a - self.a.adjoint()).scale(1.0) * cplx(0.0, -1.0)
    }

    /// Default tolerance scale `COLLIGATION_TOL * (||A|| + ||Phi||^2)`.
    pub fn default_tol(&self) -> f64 {
        COLLIGATION_TOL * (norm(&self.a) + norm(&self.phi).powi(2)).max(1.0)
    }

    /// Checks `(A - A*)/i = Phi* J Phi` against `tol`.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let gram = self.phi.adjoint() * self.j.scale_rows(&self.phi);
        let identity_residual = (self.imag_defect() - gram).norm();
        ValidationReport {
            involution_residual: 0.0,
            identity_residual,
            tol,
            pass: identity_residual <= tol,
        }
    }

    /// The adjoint colligation `(A*, Phi, -J)`.
    pub fn adjoint(&self) -> Colligation {
        Colligation {
            a: self.a.adjoint(),
            phi: self.phi.clone(),
            j: self.j.negated(),
        }
    }

    /// Cascade coupling: internal space `C^{n1} + C^{n2}`, block upper
    /// triangular fundamental operator with coupling `i Phi1* J Phi2`.
    pub fn product(&self, other: &Colligation) -> Result<Colligation> {
        if self.j != other.j {
            return Err(ColligationError::ExternalMismatch);
        }
        let (n1, n2) = (self.n(), other.n());
        let coupling = self.phi.adjoint() * self.j.scale_rows(&other.phi) * cplx(0.0, 1.0);
        let mut a = CMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((0, n1), (n1, n2)).copy_from(&coupling);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut phi = CMatrix::zeros(self.r(), n1 + n2);
        phi.view_mut((0, 0), (self.r(), n1)).copy_from(&self.phi);
        phi.view_mut((0, n1), (self.r(), n2)).copy_from(&other.phi);
        Colligation::new(a, phi, self.j.clone())
    }

    /// Projection onto a subspace: `A_0 = P_0 A P_0` restricted, `Phi_0`
    /// restricted. Always a colligation again.
    pub fn project(&self, sub: &SubspaceBasis) -> Result<Colligation> {
        if sub.ambient_dim() != self.n() {
            return Err(ColligationError::ShapeMismatch(format!(
                "subspace lives in dimension {}, colligation in {}",
                sub.ambient_dim(),
                self.n()
            )));
        }
        let v = sub.columns();
        Colligation::new(v.adjoint() * &self.a * v, &self.phi * v, self.j.clone())
    }

    /// Splits into the principal (simple) part and the redundant (closed,
    /// self-adjoint) part. The returned basis spans the principal subspace
    /// `span{ A^k Phi* e_j }`, computed by block Krylov iteration with rank
    /// tolerance `tol`.
    pub fn principal_split(&self, tol: f64) -> (Colligation, Colligation, SubspaceBasis) {
        let n = self.n();
        let basis = self.principal_basis(tol);
        let complement = basis.complement();
        let principal = self
            .project(&basis)
            .expect("projection onto principal subspace");
        let redundant = self
            .project(&complement)
            .expect("projection onto redundant subspace");
        debug_assert!(basis.dim() + complement.dim() == n);
        (principal, redundant, basis)
    }

    fn principal_basis(&self, tol: f64) -> SubspaceBasis {
        let n = self.n();
        let scale = (norm(&self.a) + norm(&self.phi)).max(1.0);
        let mut q: Vec<CVector> = Vec::new();
        let mut block: Vec<CVector> = (0..self.r())
            .map(|j| self.phi.adjoint().column(j).into_owned())
            .collect();
        for _depth in 0..n.max(1) {
            let mut accepted: Vec<CVector> = Vec::new();
            for w in &block {
                let mut v = w.clone();
                // Two orthogonalization passes keep the basis orthonormal.
                for _ in 0..2 {
                    for qi in q.iter().chain(accepted.iter()) {
                        let coeff = qi.dotc(&v);
                        v -= qi * coeff;
                    }
                }
                if v.norm() > tol * scale {
                    let nv = v.norm();
                    accepted.push(v / cplx(nv, 0.0));
                }
            }
            if accepted.is_empty() {
                break;
            }
            q.extend(accepted.iter().cloned());
            if q.len() >= n {
                break;
            }
            block = accepted.iter().map(|v| &self.a * v).collect();
        }
        SubspaceBasis::from_columns(n, &q)
    }

    /// A colligation is simple when the principal subspace is everything.
    pub fn is_simple(&self, tol: f64) -> bool {
        self.principal_basis(tol).dim() == self.n()
    }

    /// Factorization along a nested chain of invariant subspaces (the last
    /// chain member need not be the full space; the orthogonal complement is
    /// appended as a final factor when it is proper).
    pub fn chain_factorization(
        &self,
        chain: &[SubspaceBasis],
        tol: f64,
    ) -> Result<Vec<Colligation>> {
        let n = self.n();
        let mut factors = Vec::new();
        let mut prev: Option<&SubspaceBasis> = None;
        for (index, sub) in chain.iter().enumerate() {
            if sub.ambient_dim() != n {
                return Err(ColligationError::ShapeMismatch(format!(
                    "chain member {index} has ambient dimension {}",
                    sub.ambient_dim()
                )));
            }
            if let Some(p) = prev {
                if sub.dim() <= p.dim() {
                    return Err(ColligationError::ChainNotIncreasing(index));
                }
            }
            let residual = invariance_residual(&self.a, sub);
            if residual > tol {
                return Err(ColligationError::NotInvariant { index, residual });
            }
            let step = match prev {
                None => sub.clone(),
                Some(p) => sub.quotient_by(p),
            };
            factors.push(self.project(&step)?);
            prev = Some(sub);
        }
        let covered: usize = prev.map_or(0, |p| p.dim());
        if covered < n {
            let tail = match prev {
                None => SubspaceBasis::full(n),
                Some(p) => p.complement(),
            };
            factors.push(self.project(&tail)?);
        }
        Ok(factors)
    }
}

/// `|| (I - P) A P ||` for the subspace spanned by `sub`.
pub fn invariance_residual(a: &CMatrix, sub: &SubspaceBasis) -> f64 {
    let v = sub.columns();
    let av = a * v;
    (&av - v * (v.adjoint() * &av)).norm()
}

/// Embeds a matrix as the fundamental operator of a colligation (the channel
/// defaults to `ran(Im A)`, giving the canonical minimal embedding). A larger
/// channel may be supplied; it must contain `ran(Im A)` and contributes
/// mutually cancelling direct/inverse channel pairs. The external space is
/// always canonicalized to `C^r` with the +1 channels listed first.
pub fn embed(a: &CMatrix, channel: Option<&SubspaceBasis>) -> Result<Colligation> {
    if a.nrows() != a.ncols() {
        return Err(ColligationError::ShapeMismatch(format!(
            "embed requires a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let k = (a - a.adjoint()) * cplx(0.0, -1.0); // 2 Im A, Hermitian
    let (d, u) = numerics::hermitian_eig(&k)?;
    let cutoff = numerics::RANK_TOL * norm(&k).max(1.0);
    // Positive channels first, each group by descending magnitude.
    let mut kept: Vec<usize> = (0..n).filter(|&i| d[i].abs() > cutoff).collect();
    kept.sort_by(|&i, &j| d[j].total_cmp(&d[i]));

    let mut phi_rows: Vec<(i8, CVector)> = Vec::new();
    for &i in &kept {
        let weight = cplx(d[i].abs().sqrt(), 0.0);
        let row: CVector = u.column(i).map(|x| x.conj() * weight);
        phi_rows.push((d[i].signum() as i8, row));
    }

    if let Some(chan) = channel {
        if chan.ambient_dim() != n {
            return Err(ColligationError::ShapeMismatch(
                "channel has wrong ambient dimension".into(),
            ));
        }
        // ran(Im A) must sit inside the channel.
        let p = chan.columns();
        let mut residual = 0.0f64;
        for &i in &kept {
            let v = u.column(i).into_owned();
            let proj = p * (p.adjoint() * &v);
            residual = residual.max((&v - proj).norm());
        }
        if residual > 1e-10 {
            return Err(ColligationError::ChannelTooSmall(residual));
        }
        // Extra directions E0 = channel minus ran(Im A) appear twice, once as
        // a direct and once as an inverse channel.
        let ran_im: Vec<CVector> = kept.iter().map(|&i| u.column(i).into_owned()).collect();
        let ran_basis = SubspaceBasis::from_columns(n, &ran_im);
        let extra = orthogonalize_against(chan.columns(), &ran_basis);
        for col in &extra {
            let row: CVector = col.map(|x| x.conj());
            phi_rows.push((1, row.clone()));
            phi_rows.push((-1, row));
        }
    }

    // Canonical order: +1 channels first (stable).
    phi_rows.sort_by_key(|(s, _)| -(*s as i32));
    let r = phi_rows.len();
    let mut phi = CMatrix::zeros(r, n);
    let mut signs = Vec::with_capacity(r);
    for (idx, (s, row)) in phi_rows.iter().enumerate() {
        signs.push(*s);
        phi.set_row(idx, &row.transpose());
    }
    Colligation::new(a.clone(), phi, Signature::new(signs)?)
}

fn orthogonalize_against(cols: &CMatrix, against: &SubspaceBasis) -> Vec<CVector> {
    let mut out: Vec<CVector> = Vec::new();
    let q = against.columns();
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).into_owned();
        for _ in 0..2 {
            let coeffs = q.adjoint() * &v;
            v -= q * coeffs;
            for o in &out {
                let c = o.dotc(&v);
                v -= o * c;
            }
        }
        if v.norm() > 1e-10 {
            let nv = v.norm();
            out.push(v / cplx(nv, 0.0));
        }
    }
    out
}

/// Resolvent of a product colligation from the factor resolvents,
/// `R = R1 P1 + R2 P2 - i R1 Phi1* J Phi2 R2 P2`, assembled in block form.
pub fn resolvent_of_product(c1: &Colligation, c2: &Colligation, z: C64) -> Result<CMatrix> {
    if c1.j != c2.j {
        return Err(ColligationError::ExternalMismatch);
    }
    let (n1, n2) = (c1.n(), c2.n());
    let r1 = numerics::inverse(&(c1.a() - identity(n1).scale(1.0) * z))?;
    let r2 = numerics::inverse(&(c2.a() - identity(n2).scale(1.0) * z))?;
    let coupling = c1.phi.adjoint() * c1.j.scale_rows(&c2.phi);
    let top_right = (&r1 * coupling * &r2) * cplx(0.0, -1.0);
    let mut out = CMatrix::zeros(n1 + n2, n1 + n2);
    out.view_mut((0, 0), (n1, n1)).copy_from(&r1);
    out.view_mut((0, n1), (n1, n2)).copy_from(&top_right);
    out.view_mut((n1, n1), (n2, n2)).copy_from(&r2);
    Ok(out)
}

/// Gram-matrix test for unitary equivalence of two simple colligations.
///
/// Builds the frames `[Phi*, A Phi*, ..., A^{depth-1} Phi*]` on both sides;
/// if their Gram matrices agree within `tol` the intertwining unitary exists
/// and is reconstructed (and polished by a polar correction). Returns `None`
/// when the Gram matrices differ, i.e. the characteristic functions differ.
pub fn unitary_equivalence(
    c1: &Colligation,
    c2: &Colligation,
    depth: usize,
    tol: f64,
) -> Result<Option<CMatrix>> {
    if c1.j != c2.j {
        return Err(ColligationError::ExternalMismatch);
    }
    for c in [c1, c2] {
        let basis = c.principal_basis(tol.min(1e-8));
        if basis.dim() != c.n() {
            return Err(ColligationError::NotSimple { principal: basis.dim(), n: c.n() });
        }
    }
    // An intertwiner of (A, Phi) also intertwines (A/s, Phi/t); scaling keeps
    // the Krylov columns at comparable magnitudes over deep powers.
    let a_scale = cplx(1.0 / norm(c1.a()).max(norm(c2.a())).max(1.0), 0.0);
    let phi_scale = cplx(1.0 / norm(c1.phi()).max(norm(c2.phi())).max(1.0), 0.0);
    let f1 = krylov_frame(&(c1.a() * a_scale), &(c1.phi().adjoint() * phi_scale), depth);
    let f2 = krylov_frame(&(c2.a() * a_scale), &(c2.phi().adjoint() * phi_scale), depth);
    let g1 = f1.adjoint() * &f1;
    let g2 = f2.adjoint() * &f2;
    let scale = norm(&g1).max(norm(&g2)).max(1.0);
    if (&g1 - &g2).norm() > tol * scale {
        return Ok(None);
    }
    if c1.n() != c2.n() {
        return Ok(None);
    }
    let n = c1.n();
    // Pivoted Gram-Schmidt on the first frame, tracking the combination
    // coefficients so the same combination can be applied to the second.
    let (q1, comb) = pivoted_mgs_with_comb(&f1, 1e-12);
    if q1.ncols() < n {
        return Err(ColligationError::NotSimple { principal: q1.ncols(), n });
    }
    let q2 = &f2 * &comb;
    let mut u = q2 * q1.adjoint();
    // Polar correction: U <- U (U*U)^{-1/2}.
    let gram = u.adjoint() * &u;
    let inv_sqrt = invert_hermitian_sqrt(&gram)?;
    u *= inv_sqrt;
    Ok(Some(u))
}

fn invert_hermitian_sqrt(g: &CMatrix) -> Result<CMatrix> {
    let (d, v) = numerics::hermitian_eig(g)?;
    let f = DVector::from_fn(d.len(), |i, _| cplx(1.0 / d[i].sqrt(), 0.0));
    Ok(&v * CMatrix::from_diagonal(&f) * v.adjoint())
}

fn krylov_frame(a: &CMatrix, phi_adjoint: &CMatrix, depth: usize) -> CMatrix {
    let n = a.nrows();
    let r = phi_adjoint.ncols();
    let mut frame = CMatrix::zeros(n, depth.max(1) * r);
    let mut block = phi_adjoint.clone();
    for d in 0..depth.max(1) {
        frame.view_mut((0, d * r), (n, r)).copy_from(&block);
        if d + 1 < depth {
            block = a * block;
        }
    }
    frame
}

/// Modified Gram-Schmidt with column pivoting. Returns `Q` (orthonormal) and
/// the combination matrix `C` with `Q = F C`.
fn pivoted_mgs_with_comb(f: &CMatrix, tol: f64) -> (CMatrix, CMatrix) {
    let n = f.nrows();
    let m = f.ncols();
    let mut q_cols: Vec<CVector> = Vec::new();
    let mut c_cols: Vec<CVector> = Vec::new();
    let mut remaining: Vec<usize> = (0..m).collect();
    let scale = norm(f).max(1.0);
    while q_cols.len() < n && !remaining.is_empty() {
        // pick the remaining column with the largest orthogonal residual
        let mut best: Option<(usize, f64, CVector, CVector)> = None;
        for (slot, &col) in remaining.iter().enumerate() {
            let mut v = f.column(col).into_owned();
            let mut c = CVector::zeros(m);
            c[col] = C64::ONE;
            for _ in 0..2 {
                for (qi, ci) in q_cols.iter().zip(c_cols.iter()) {
                    let coeff = qi.dotc(&v);
                    v -= qi * coeff;
                    c -= ci * coeff;
                }
            }
            let nv = v.norm();
            if best.as_ref().is_none_or(|(_, bn, _, _)| nv > *bn) {
                best = Some((slot, nv, v, c));
            }
        }
        let (slot, nv, v, c) = best.unwrap();
        if nv <= tol * scale {
            break;
        }
        q_cols.push(v / cplx(nv, 0.0));
        c_cols.push(c / cplx(nv, 0.0));
        remaining.remove(slot);
    }
    let k = q_cols.len();
    let mut q = CMatrix::zeros(n, k);
    let mut cm = CMatrix::zeros(m, k);
    for (j, (qc, cc)) in q_cols.iter().zip(c_cols.iter()).enumerate() {
        q.set_column(j, qc);
        cm.set_column(j, cc);
    }
    (q, cm)
}

/// Orthonormal column basis of a subspace of `C^n`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    n: usize,
    cols: CMatrix,
}

impl SubspaceBasis {
    /// Wraps an already orthonormal set of columns.
    pub fn new(cols: CMatrix) -> Result<Self> {
        let k = cols.ncols();
        let residual = (cols.adjoint() * &cols - identity(k)).norm();
        if residual > 1e-10 {
            return Err(ColligationError::NotOrthonormal(residual));
        }
        Ok(Self { n: cols.nrows(), cols })
    }

    /// Orthonormalizes a spanning set, dropping dependent columns.
    pub fn from_span(cols: &CMatrix, tol: f64) -> Self {
        let (q, _) = pivoted_mgs_with_comb(cols, tol);
        Self { n: cols.nrows(), cols: q }
    }

    pub fn from_columns(n: usize, cols: &[CVector]) -> Self {
        let mut m = CMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        Self { n, cols: m }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinates(n: usize, axes: &[usize]) -> Self {
        let mut m = CMatrix::zeros(n, axes.len());
        for (j, &i) in axes.iter().enumerate() {
            m[(i, j)] = C64::ONE;
        }
        Self { n, cols: m }
    }

    pub fn full(n: usize) -> Self {
        Self { n, cols: identity(n) }
    }

    pub fn empty(n: usize) -> Self {
        Self { n, cols: CMatrix::zeros(n, 0) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.cols.ncols()
    }

    pub fn columns(&self) -> &CMatrix {
        &self.cols
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> SubspaceBasis {
        let candidates = orthogonalize_against(&identity(self.n), self);
        SubspaceBasis::from_columns(self.n, &candidates)
    }

    /// Orthonormal basis of `self` minus `smaller` (requires nesting).
    pub fn quotient_by(&self, smaller: &SubspaceBasis) -> SubspaceBasis {
        let cols = orthogonalize_against(&self.cols, smaller);
        SubspaceBasis::from_columns(self.n, &cols)
    }
}
