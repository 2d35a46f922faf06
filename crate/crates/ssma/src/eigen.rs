//! Symmetric-definite generalized eigensolver.
//!
//! Solves `A φ = λ (B + εI) φ` for symmetric `A`, `B` by Cholesky reduction
//! to an ordinary symmetric problem: with `B + εI = L Lᵀ`, the matrix
//! `M = L⁻¹ A L⁻ᵀ` is symmetric and similar to the pencil, and mapping its
//! eigenvectors back through `L⁻ᵀ` yields pencil eigenvectors that are
//! orthonormal in the `B + εI` inner product.
//!
//! `B` is often rank-deficient in practice (it is a Gram form of a label
//! graph with few labeled samples), so [`solve_generalized_auto`] escalates
//! the ridge `ε` through a fixed ladder relative to `trace(B)/d` until the
//! factorization succeeds and the residuals meet the solver tolerance.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative residual bound: `‖Aφ − λB_effφ‖ ≤ RESIDUAL_TOL (‖A‖_F + |λ|‖B_eff‖_F)`.
const RESIDUAL_TOL: f64 = 1e-8;

/// Relative symmetry tolerance on the inputs.
const SYMMETRY_TOL: f64 = 1e-10;

/// Ridge ladder, as multiples of `trace(B)/d`.
const RIDGE_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

/// How `ε` is chosen when solving the pencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RidgePolicy {
    /// Escalate through the built-in ladder until the solve is well posed.
    Auto,
    /// Use exactly this `ε ≥ 0`.
    Fixed(f64),
}

impl Default for RidgePolicy {
    fn default() -> Self {
        RidgePolicy::Auto
    }
}

/// Eigenpairs of the (regularized) pencil, ascending by eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<f64>,
    residual_norms: Vec<f64>,
    ridge: f64,
}

impl EigenSolution {
    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` pairs with eigenvalue `i`; columns are orthonormal in the
    /// `B + εI` inner product.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    /// `‖Aφ_i − λ_i (B + εI) φ_i‖₂` per pair.
    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    /// The `ε` actually applied.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

fn check_symmetric(m: &Array2<f64>, name: &str) -> Result<Array2<f64>> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::Validation(format!("{name} must be square, got {r}×{c}")));
    }
    let scale = linalg::max_abs(m).max(1.0);
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in (i + 1)..r {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::Validation(format!(
            "{name} is asymmetric beyond tolerance: max |m_ij - m_ji| = {worst:.3e} vs allowed {:.3e}",
            SYMMETRY_TOL * scale
        )));
    }
    Ok((m + &m.t()) * 0.5)
}

/// Solves `A φ = λ (B + ridge·I) φ` with a caller-supplied ridge.
///
/// The returned pairs are sorted ascending; each eigenvector's largest-
/// magnitude entry is made positive so the output is bitwise reproducible.
pub fn solve_generalized(a: &Array2<f64>, b: &Array2<f64>, ridge: f64) -> Result<EigenSolution> {
    if ridge < 0.0 {
        return Err(Error::Parameter(format!("ridge must be nonnegative, got {ridge}")));
    }
    let a = check_symmetric(a, "A")?;
    let b = check_symmetric(b, "B")?;
    if a.dim() != b.dim() {
        return Err(Error::Validation(format!(
            "A is {:?} but B is {:?}",
            a.dim(),
            b.dim()
        )));
    }
    solve_prepared(&a, &b, ridge)
}

/// Solves the pencil, escalating the ridge through the built-in ladder
/// (multiples of `trace(B)/d`) until the Cholesky factorization succeeds and
/// the residual bound holds.
pub fn solve_generalized_auto(a: &Array2<f64>, b: &Array2<f64>) -> Result<EigenSolution> {
    let a = check_symmetric(a, "A")?;
    let b = check_symmetric(b, "B")?;
    if a.dim() != b.dim() {
        return Err(Error::Validation(format!(
            "A is {:?} but B is {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let d = b.nrows() as f64;
    let scale = b.diag().sum() / d;
    let ladder: Vec<f64> = RIDGE_LADDER.iter().map(|f| f * scale).collect();
    for &eps in &ladder {
        if let Ok(solution) = solve_prepared(&a, &b, eps) {
            return Ok(solution);
        }
    }
    Err(Error::Numerical(format!(
        "B + εI is not positive definite (or residuals exceed tolerance) for any ε in the ladder {ladder:?}"
    )))
}

fn solve_prepared(a: &Array2<f64>, b: &Array2<f64>, ridge: f64) -> Result<EigenSolution> {
    let d = a.nrows();
    let mut b_eff = b.to_owned();
    for i in 0..d {
        b_eff[[i, i]] += ridge;
    }
    let l = linalg::cholesky(&b_eff).ok_or_else(|| {
        Error::Numerical(format!("B + εI is not positive definite at ε = {ridge:.3e}"))
    })?;

    // M = L⁻¹ A L⁻ᵀ, symmetrized against rounding.
    let y = linalg::solve_lower(&l, a);
    let m = linalg::solve_lower(&l, &y.t().to_owned());
    let m = (&m + &m.t()) * 0.5;

    let (vals, vecs) = linalg::jacobi_eigh(&m);
    let phi = linalg::solve_lower_transpose(&l, &vecs);

    // Sort ascending; ties keep original order.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j)));

    let mut eigenvalues = Vec::with_capacity(d);
    let mut eigenvectors = Array2::<f64>::zeros((d, d));
    for (out, &idx) in order.iter().enumerate() {
        eigenvalues.push(vals[idx]);
        let mut col = phi.column(idx).to_owned();
        // Sign convention: the largest-magnitude entry (first on ties) is positive.
        let mut lead = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
        eigenvectors.column_mut(out).assign(&col);
    }

    // Residual check against the regularized pencil.
    let a_norm = linalg::fro_norm(a);
    let b_norm = linalg::fro_norm(&b_eff);
    let mut residual_norms = Vec::with_capacity(d);
    for i in 0..d {
        let phi_i = eigenvectors.column(i).to_owned();
        let lambda = eigenvalues[i];
        let r: Array1<f64> = a.dot(&phi_i) - &(b_eff.dot(&phi_i) * lambda);
        let norm = r.dot(&r).sqrt();
        let bound = RESIDUAL_TOL * (a_norm + lambda.abs() * b_norm);
        if norm > bound {
            return Err(Error::Numerical(format!(
                "eigenpair {i} residual {norm:.3e} exceeds bound {bound:.3e} at ε = {ridge:.3e}"
            )));
        }
        residual_norms.push(norm);
    }

    Ok(EigenSolution { eigenvalues, eigenvectors, residual_norms, ridge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((d, d));
        for v in m.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut spd = m.t().dot(&m);
        for i in 0..d {
            spd[[i, i]] += 0.5;
        }
        spd
    }

    #[test]
    fn diagonal_pencil() {
        let a = array![[2.0, 0.0], [0.0, 1.0]];
        let b = Array2::<f64>::eye(2);
        let sol = solve_generalized(&a, &b, 0.0).unwrap();
        assert!((sol.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((sol.eigenvalues()[1] - 2.0).abs() < 1e-12);
        // Ascending order pairs e2 first, then e1, with positive leading entries.
        assert!((sol.eigenvectors()[[1, 0]] - 1.0).abs() < 1e-12);
        assert!((sol.eigenvectors()[[0, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_pencil_gives_unit_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(5, &mut rng);
        let sol = solve_generalized(&a, &a, 0.0).unwrap();
        for lambda in sol.eigenvalues() {
            assert!((lambda - 1.0).abs() < 1e-9, "λ = {lambda}");
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = array![[1.0, 2.0], [0.0, 1.0]];
        let b = Array2::<f64>::eye(2);
        assert!(solve_generalized(&a, &b, 0.0).is_err());
    }

    #[test]
    fn b_orthonormality_of_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(6, &mut rng);
        let b = random_spd(6, &mut rng);
        let sol = solve_generalized(&a, &b, 0.0).unwrap();
        let gram = sol.eigenvectors().t().dot(&b.dot(sol.eigenvectors()));
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - expect).abs() < 1e-8, "gram[{i},{j}] = {}", gram[[i, j]]);
            }
        }
    }

    #[test]
    fn trace_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(5, &mut rng);
        let b = random_spd(5, &mut rng);
        let sol = solve_generalized(&a, &b, 0.0).unwrap();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..5 {
            let phi = sol.eigenvectors().column(i).to_owned();
            lhs += sol.eigenvalues()[i] * phi.dot(&b.dot(&phi));
            rhs += phi.dot(&a.dot(&phi));
        }
        assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0));
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_spd(5, &mut rng);
        let b = random_spd(5, &mut rng);
        let c = 3.7;
        let base = solve_generalized(&a, &b, 0.0).unwrap();
        let scaled = solve_generalized(&(&a * c), &b, 0.0).unwrap();
        for i in 0..5 {
            assert!(
                (scaled.eigenvalues()[i] - c * base.eigenvalues()[i]).abs()
                    < 1e-8 * (1.0 + base.eigenvalues()[i].abs() * c),
            );
            // Directions agree: |cos angle| = 1 within 1e-8.
            let u = base.eigenvectors().column(i);
            let v = scaled.eigenvectors().column(i);
            let cos = u.dot(&v) / (u.dot(&u).sqrt() * v.dot(&v).sqrt());
            assert!((cos.abs() - 1.0).abs() < 1e-8, "pair {i}: cos = {cos}");
        }
    }

    #[test]
    fn bitwise_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(7, &mut rng);
        let b = random_spd(7, &mut rng);
        let s1 = solve_generalized(&a, &b, 1e-9).unwrap();
        let s2 = solve_generalized(&a, &b, 1e-9).unwrap();
        assert_eq!(s1.eigenvalues(), s2.eigenvalues());
        assert_eq!(s1.eigenvectors(), s2.eigenvectors());
    }

    #[test]
    fn auto_ridge_handles_singular_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_spd(4, &mut rng);
        // Rank-1 PSD B.
        let v = Array1::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let mut b = Array2::<f64>::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                b[[i, j]] = v[i] * v[j];
            }
        }
        let sol = solve_generalized_auto(&a, &b).unwrap();
        assert!(sol.ridge() > 0.0);
        assert_eq!(sol.eigenvalues().len(), 4);
        for w in sol.eigenvalues().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn auto_ridge_zero_for_spd_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(5, &mut rng);
        let b = random_spd(5, &mut rng);
        let sol = solve_generalized_auto(&a, &b).unwrap();
        assert_eq!(sol.ridge(), 0.0);
    }

    /// Independent oracle: eigendecompose the symmetrized similar matrix
    /// `B^{-1/2} A B^{-1/2}` using a locally implemented Jacobi sweep.
    mod oracle {
        use ndarray::Array2;

        pub fn jacobi(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
            let n = a.nrows();
            let mut d = a.clone();
            let mut v = Array2::<f64>::eye(n);
            for _ in 0..200 {
                let mut max = 0.0f64;
                for i in 0..n {
                    for j in (i + 1)..n {
                        max = max.max(d[[i, j]].abs());
                    }
                }
                if max < 1e-14 {
                    break;
                }
                for p in 0..n - 1 {
                    for q in (p + 1)..n {
                        if d[[p, q]].abs() < 1e-18 {
                            continue;
                        }
                        let theta = 0.5 * (d[[q, q]] - d[[p, p]]) / d[[p, q]];
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        let mut rot = Array2::<f64>::eye(n);
                        rot[[p, p]] = c;
                        rot[[q, q]] = c;
                        rot[[p, q]] = s;
                        rot[[q, p]] = -s;
                        d = rot.t().dot(&d).dot(&rot);
                        v = v.dot(&rot);
                    }
                }
            }
            ((0..n).map(|i| d[[i, i]]).collect(), v)
        }

        /// Eigenvalues of the pencil (A, B) via B^{-1/2} A B^{-1/2}.
        pub fn pencil_eigenvalues(a: &Array2<f64>, b: &Array2<f64>) -> Vec<f64> {
            let n = b.nrows();
            let (b_vals, b_vecs) = jacobi(b);
            let mut inv_sqrt = Array2::<f64>::zeros((n, n));
            for k in 0..n {
                let f = 1.0 / b_vals[k].sqrt();
                for i in 0..n {
                    for j in 0..n {
                        inv_sqrt[[i, j]] += b_vecs[[i, k]] * f * b_vecs[[j, k]];
                    }
                }
            }
            let sym = inv_sqrt.dot(a).dot(&inv_sqrt);
            let (mut vals, _) = jacobi(&sym);
            vals.sort_by(f64::total_cmp);
            vals
        }
    }

    #[test]
    fn eigenvalues_match_similarity_transform_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..10 {
            let d = rng.random_range(2..=6);
            let a = random_spd(d, &mut rng);
            let b = random_spd(d, &mut rng);
            let sol = solve_generalized(&a, &b, 0.0).unwrap();
            let expected = oracle::pencil_eigenvalues(&a, &b);
            for (got, want) in sol.eigenvalues().iter().zip(&expected) {
                assert!(
                    (got - want).abs() < 1e-8 * (1.0 + want.abs()),
                    "trial {trial}: {got} vs oracle {want}"
                );
            }
        }
    }
}
