//! Dense complex matrix kernels shared by the rest of the crate.
//!
//! Everything here operates on dynamically sized `Complex64` matrices. The
//! decompositions are backed by nalgebra; this module pins down the contracts
//! the other modules rely on (ascending eigenvalue order, exactly triangular
//! Schur factors, deterministic zero thresholds, a condition-number guard on
//! solves) and adds a Givens-based reordering pass for Schur forms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues below `RANK_TOL * ||M||` are treated as zero in the
/// sign/abs functional calculus and in rank decisions.
pub const RANK_TOL: f64 = 1e-12;
/// Condition-number threshold above which `solve` reports `Singular`.
pub const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not Hermitian (symmetry residual {residual:.3e}, tolerance {tol:.3e})")]
    NotHermitian { residual: f64, tol: f64 },
    #[error("Schur iteration failed to converge")]
    ConvergenceFailure,
    #[error("matrix is numerically singular (condition estimate {cond:.3e})")]
    Singular { cond: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

pub fn cplx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Frobenius norm; used for most residual checks in the crate.
pub fn norm(m: &CMatrix) -> f64 {
    m.norm()
}

/// Spectral norm, the square root of the top eigenvalue of `M* M`.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let (d, _) = hermitian_eig(&gram).expect("Gram matrix is Hermitian");
    d[d.len() - 1].max(0.0).sqrt()
}

fn require_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(NumericsError::ShapeMismatch(format!(
            "{what}: expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn hermitian_part_checked(m: &CMatrix) -> Result<CMatrix> {
    require_square(m, "hermitian input")?;
    let residual = (m - m.adjoint()).norm();
    let tol = HERMITIAN_TOL * norm(m).max(1.0);
    if residual > tol {
        return Err(NumericsError::NotHermitian { residual, tol });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Returns `(d, u)` with `M = U diag(d) U*` and `U` unitary.
pub fn hermitian_eig(m: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    let h = hermitian_part_checked(m)?;
    let n = h.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), CMatrix::zeros(0, 0)));
    }
    let se = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let d = DVector::from_fn(n, |i, _| se.eigenvalues[order[i]]);
    let mut u = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok((d, u))
}

/// How `schur` arranges the diagonal of the triangular factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchurOrder {
    /// Leave the eigenvalues in the order the iteration produced.
    #[default]
    AsProduced,
    /// Stable reorder by `(Re, Im)` lexicographically ascending.
    RealAscending,
}

/// Unitary triangularization `M = Q T Q*` with `T` exactly upper triangular.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    schur_ordered(m, SchurOrder::AsProduced)
}

pub fn schur_ordered(m: &CMatrix, order: SchurOrder) -> Result<(CMatrix, CMatrix)> {
    require_square(m, "schur input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)));
    }
    let sch = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or(NumericsError::ConvergenceFailure)?;
    let (q, mut t) = sch.unpack();
    let mut q = q;
    // The iteration leaves roundoff-level noise below the diagonal; drop it so
    // downstream chain factorizations see an exactly triangular matrix.
    for i in 0..n {
        for j in 0..i {
            t[(i, j)] = C64::ZERO;
        }
    }
    if order == SchurOrder::RealAscending {
        reorder_schur(&mut q, &mut t);
    }
    Ok((q, t))
}

fn schur_cmp(a: C64, b: C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Stable bubble pass swapping adjacent diagonal entries of `T` via Givens
/// rotations until the diagonal is `(Re, Im)`-ascending.
fn reorder_schur(q: &mut CMatrix, t: &mut CMatrix) {
    let n = t.nrows();
    loop {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1) {
            if schur_cmp(t[(k, k)], t[(k + 1, k + 1)]) == std::cmp::Ordering::Greater {
                swap_adjacent(q, t, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

/// Swap the eigenvalues at positions `k`, `k+1` of the triangular factor by a
/// unitary similarity. The rotation sends the eigenvector `(t12, t22 - t11)`
/// of the trailing eigenvalue to the first coordinate.
fn swap_adjacent(q: &mut CMatrix, t: &mut CMatrix, k: usize) {
    let t11 = t[(k, k)];
    let t12 = t[(k, k + 1)];
    let t22 = t[(k + 1, k + 1)];
    let v0 = t12;
    let v1 = t22 - t11;
    let nrm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return;
    }
    let a = v0 / nrm;
    let b = v1 / nrm;
    // g = [[a, -conj(b)], [b, conj(a)]] is unitary with g e1 = v / |v|.
    let g = CMatrix::from_row_slice(2, 2, &[a, -b.conj(), b, a.conj()]);
    let gh = g.adjoint();

    let n = t.nrows();
    for j in 0..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = gh[(0, 0)] * x + gh[(0, 1)] * y;
        t[(k + 1, j)] = gh[(1, 0)] * x + gh[(1, 1)] * y;
    }
    for i in 0..n {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * g[(0, 0)] + y * g[(1, 0)];
        t[(i, k + 1)] = x * g[(0, 1)] + y * g[(1, 1)];
    }
    for i in 0..q.nrows() {
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * g[(0, 0)] + y * g[(1, 0)];
        q[(i, k + 1)] = x * g[(0, 1)] + y * g[(1, 1)];
    }
    t[(k + 1, k)] = C64::ZERO;
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
}

/// Matrix exponential by scaling and squaring (Pade).
pub fn expm(m: &CMatrix) -> CMatrix {
    assert!(m.is_square(), "expm requires a square matrix");
    if m.nrows() == 0 {
        return CMatrix::zeros(0, 0);
    }
    m.clone().exp()
}

/// Which Hermitian function `hermitian_calculus` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HermitianFn {
    /// `|M|^{1/2} = U diag(|d|^{1/2}) U*`
    AbsSqrt,
    /// `sign(M) = U diag(sign d) U*`, with eigenvalues below
    /// `RANK_TOL * ||M||` mapped to zero.
    Sign,
}

pub fn hermitian_calculus(m: &CMatrix, which: HermitianFn) -> Result<CMatrix> {
    let (d, u) = hermitian_eig(m)?;
    let cutoff = RANK_TOL * norm(m);
    let f = DVector::from_fn(d.len(), |i, _| {
        let x = d[i];
        match which {
            HermitianFn::AbsSqrt => cplx(x.abs().sqrt(), 0.0),
            HermitianFn::Sign => {
                if x.abs() <= cutoff {
                    C64::ZERO
                } else {
                    cplx(x.signum(), 0.0)
                }
            }
        }
    });
    Ok(&u * CMatrix::from_diagonal(&f) * u.adjoint())
}

/// Solve `M X = B`, refusing matrices with condition estimate above
/// [`COND_LIMIT`] (which signals that a shift `z` sits in the spectrum).
pub fn solve(m: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    require_square(m, "solve lhs")?;
    if m.ncols() != b.nrows() {
        return Err(NumericsError::ShapeMismatch(format!(
            "solve: lhs is {}x{} but rhs has {} rows",
            m.nrows(),
            m.ncols(),
            b.nrows()
        )));
    }
    if m.nrows() == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    let lu = m.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or(NumericsError::Singular { cond: f64::INFINITY })?;
    let cond = norm(m) * norm(&inv);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(NumericsError::Singular { cond });
    }
    lu.solve(b).ok_or(NumericsError::Singular { cond })
}

/// Solve `X M = B` from the right, with the same condition guard.
pub fn solve_right(b: &CMatrix, m: &CMatrix) -> Result<CMatrix> {
    Ok(solve(&m.transpose(), &b.transpose())?.transpose())
}

/// Inverse through [`solve`], with the same condition guard.
pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    solve(m, &identity(m.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(seed: u64, n: usize) -> CMatrix {
        // Tiny deterministic LCG; plenty for smoke inputs.
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| cplx(next(), next()))
    }

    #[test]
    fn hermitian_eig_identity() {
        let (d, u) = hermitian_eig(&identity(3)).unwrap();
        for i in 0..3 {
            assert!((d[i] - 1.0).abs() < 1e-14);
        }
        assert!((u.adjoint() * &u - identity(3)).norm() < 1e-12);
    }

    #[test]
    fn hermitian_eig_pauli_y() {
        // [[0, -i], [i, 0]] has characteristic polynomial l^2 - 1.
        let m = CMatrix::from_row_slice(2, 2, &[C64::ZERO, cplx(0.0, -1.0), cplx(0.0, 1.0), C64::ZERO]);
        let (d, u) = hermitian_eig(&m).unwrap();
        assert!((d[0] + 1.0).abs() < 1e-12);
        assert!((d[1] - 1.0).abs() < 1e-12);
        let recon = &u * CMatrix::from_diagonal(&d.map(|x| cplx(x, 0.0))) * u.adjoint();
        assert!((recon - m).norm() < 1e-12);
    }

    #[test]
    fn hermitian_eig_sorts_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![cplx(3.0, 0.0), cplx(-2.0, 0.0)]));
        let (d, _) = hermitian_eig(&m).unwrap();
        assert!((d[0] + 2.0).abs() < 1e-14 && (d[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eig_rejects_nonhermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[C64::ZERO, C64::ONE, C64::ZERO, C64::ZERO]);
        assert!(matches!(hermitian_eig(&m), Err(NumericsError::NotHermitian { .. })));
    }

    #[test]
    fn hermitian_eig_reconstructs_random() {
        for seed in 0..5u64 {
            let a = rand_matrix(seed, 7);
            let h = (&a + a.adjoint()).scale(0.5);
            let (d, u) = hermitian_eig(&h).unwrap();
            let recon = &u * CMatrix::from_diagonal(&d.map(|x| cplx(x, 0.0))) * u.adjoint();
            assert!((recon - &h).norm() <= 1e-10 * norm(&h).max(1.0));
            assert!((u.adjoint() * &u - identity(7)).norm() < 1e-10);
        }
    }

    #[test]
    fn schur_triangular_input_fixed() {
        let m = CMatrix::from_row_slice(2, 2, &[C64::ZERO, C64::ONE, C64::ZERO, C64::ZERO]);
        let (q, t) = schur(&m).unwrap();
        assert!((&q * &t * q.adjoint() - &m).norm() < 1e-12);
        assert_eq!(t[(1, 0)], C64::ZERO);
        assert!(t[(0, 0)].norm() < 1e-12 && t[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn schur_reconstructs_random() {
        for seed in 0..5u64 {
            let m = rand_matrix(seed + 10, 6);
            let (q, t) = schur(&m).unwrap();
            assert!((&q * &t * q.adjoint() - &m).norm() <= 1e-10 * norm(&m));
            assert!((q.adjoint() * &q - identity(6)).norm() < 1e-10);
        }
    }

    #[test]
    fn schur_diag_matches_eigs_of_hermitian_route() {
        // Hermitian input: Schur diagonal must agree with hermitian_eig.
        let a = rand_matrix(3, 6);
        let h = (&a + a.adjoint()).scale(0.5);
        let (_, t) = schur_ordered(&h, SchurOrder::RealAscending).unwrap();
        let (d, _) = hermitian_eig(&h).unwrap();
        for i in 0..6 {
            assert!((t[(i, i)].re - d[i]).abs() < 1e-8);
            assert!(t[(i, i)].im.abs() < 1e-8);
        }
    }

    #[test]
    fn schur_diag_matches_power_sums() {
        // Independent oracle: sum of diag(T)^k must equal tr(M^k).
        for seed in 0..5u64 {
            let m = rand_matrix(seed + 70, 7);
            let (_, t) = schur(&m).unwrap();
            let mut power = identity(7);
            for k in 1..=4 {
                power = &power * &m;
                let trace: C64 = (0..7).map(|i| power[(i, i)]).sum();
                let diag_sum: C64 = (0..7).map(|i| t[(i, i)].powu(k as u32)).sum();
                assert!((trace - diag_sum).norm() <= 1e-8 * trace.norm().max(1.0));
            }
        }
    }

    #[test]
    fn schur_reordering_sorts_and_reconstructs() {
        for seed in 0..5u64 {
            let m = rand_matrix(seed + 40, 8);
            let (q, t) = schur_ordered(&m, SchurOrder::RealAscending).unwrap();
            assert!((&q * &t * q.adjoint() - &m).norm() <= 1e-9 * norm(&m));
            for k in 0..7 {
                assert_ne!(schur_cmp(t[(k, k)], t[(k + 1, k + 1)]), std::cmp::Ordering::Greater);
            }
        }
    }

    #[test]
    fn expm_cases() {
        assert!((expm(&CMatrix::zeros(3, 3)) - identity(3)).norm() < 1e-14);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::ONE, cplx(2.0, 0.0)]));
        let e = expm(&d);
        assert!((e[(0, 0)].re - 1f64.exp()).abs() < 1e-12);
        assert!((e[(1, 1)].re - 2f64.exp()).abs() < 1e-11);
        let n = CMatrix::from_row_slice(2, 2, &[C64::ZERO, C64::ONE, C64::ZERO, C64::ZERO]);
        assert!((expm(&n) - (identity(2) + &n)).norm() < 1e-14);
    }

    #[test]
    fn expm_inverse_property() {
        for seed in 0..5u64 {
            let m = rand_matrix(seed + 20, 5);
            let prod = expm(&m) * expm(&(-&m));
            let bound = 1e-9 * (2.0 * norm(&m)).exp();
            assert!((prod - identity(5)).norm() <= bound);
        }
    }

    #[test]
    fn hermitian_calculus_cases() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![cplx(4.0, 0.0), cplx(-9.0, 0.0)]));
        let abs_sqrt = hermitian_calculus(&m, HermitianFn::AbsSqrt).unwrap();
        assert!((abs_sqrt[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((abs_sqrt[(1, 1)].re - 3.0).abs() < 1e-12);
        let sign = hermitian_calculus(&m, HermitianFn::Sign).unwrap();
        assert!((sign[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((sign[(1, 1)].re + 1.0).abs() < 1e-12);

        let b = CMatrix::from_row_slice(2, 2, &[C64::ZERO, cplx(0.0, -1.0), cplx(0.0, 1.0), C64::ZERO]);
        assert!((hermitian_calculus(&b, HermitianFn::Sign).unwrap() - &b).norm() < 1e-12);
        assert!((hermitian_calculus(&b, HermitianFn::AbsSqrt).unwrap() - identity(2)).norm() < 1e-12);
    }

    #[test]
    fn sign_times_abs_recovers_matrix() {
        for seed in 0..5u64 {
            let a = rand_matrix(seed + 30, 6);
            let h = (&a + a.adjoint()).scale(0.5);
            let sign = hermitian_calculus(&h, HermitianFn::Sign).unwrap();
            let abs_sqrt = hermitian_calculus(&h, HermitianFn::AbsSqrt).unwrap();
            let abs = &abs_sqrt * &abs_sqrt;
            assert!((sign * abs - &h).norm() <= 1e-10 * norm(&h).max(1.0));
        }
    }

    #[test]
    fn solve_cases() {
        let b = rand_matrix(7, 3);
        let x = solve(&identity(3), &b).unwrap();
        assert!((&x - &b).norm() < 1e-14);

        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![cplx(2.0, 0.0), cplx(4.0, 0.0)]));
        let x = solve(&m, &identity(2)).unwrap();
        assert!((x[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((x[(1, 1)].re - 0.25).abs() < 1e-14);
    }

    #[test]
    fn solve_detects_spectral_point() {
        // z = 1 is an eigenvalue of diag(1, 2): A - zI is singular.
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::ONE, cplx(2.0, 0.0)]));
        let shifted = &a - identity(2);
        assert!(matches!(solve(&shifted, &identity(2)), Err(NumericsError::Singular { .. })));
    }

    #[test]
    fn solve_residual_random() {
        for seed in 0..5u64 {
            let m = rand_matrix(seed + 50, 6) + identity(6).scale(2.0);
            let b = rand_matrix(seed + 60, 6);
            let x = solve(&m, &b).unwrap();
            assert!((&m * &x - &b).norm() <= 1e-10 * norm(&m) * norm(&x).max(1.0));
        }
    }
}
