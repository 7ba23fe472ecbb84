use super::Matrix;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Default relative rank cutoff for an `n`-dimensional problem: `n · 10⁻¹⁰`.
pub fn default_rel_tol(n: usize) -> f64 {
    n.max(1) as f64 * 1e-10
}

/// Determinant and adjugate by the Faddeev–LeVerrier recursion.
///
/// With `M₀ = 0`, `c_n = 1`:
///
/// ```text
/// M_k     = A M_{k-1} + c_{n-k+1} I
/// c_{n-k} = -tr(A M_k) / k
/// ```
///
/// then `det A = (-1)ⁿ c₀` and `adj A = (-1)ⁿ⁻¹ M_n`. No division by the
/// determinant occurs, so singular inputs (including the zero matrix) are fine.
pub fn det_and_adjugate(a: &Matrix) -> (f64, Matrix) {
    assert!(a.is_square(), "det_and_adjugate needs a square matrix");
    let n = a.rows();
    if n == 0 {
        return (1.0, Matrix::zeros(0, 0));
    }
    let mut m = Matrix::zeros(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        let mut next = a.matmul(&m);
        for i in 0..n {
            next[(i, i)] += c;
        }
        m = next;
        c = -a.matmul(&m).trace() / k as f64;
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    (sign * c, m.scale(-sign))
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    // Work on the orientation with at least as many rows as columns.
    let work = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.transpose()
    };
    let (m, n) = (work.rows(), work.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| work.column(j)).collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = (0..m).fold((0.0, 0.0, 0.0), |acc, i| {
                    let (up, uq) = (cols[p][i], cols[q][i]);
                    (acc.0 + up * up, acc.1 + uq * uq, acc.2 + up * uq)
                });
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * up - s * uq;
                    cols[q][i] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = cols.iter().map(|c| super::norm(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn spectral_norm(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn smallest_singular_value(a: &Matrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Number of singular values strictly above `rel_tol · σ_max`; zero for the
/// zero matrix.
pub fn rank_with_tolerance(a: &Matrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    assert!(a.is_square(), "symmetric_eigenvalues needs a square matrix");
    let n = a.rows();
    let mut s = a.clone();
    s.symmetrize();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[(i, j)] * s[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| s[(i, i)] * s[(i, i)]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (s[(q, q)] - s[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // S ← Jᵀ S J with J the (p, q) rotation.
                for k in 0..n {
                    let (skp, skq) = (s[(k, p)], s[(k, q)]);
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let (spk, sqk) = (s[(p, k)], s[(q, k)]);
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
            }
        }
    }

    let mut ev: Vec<f64> = (0..n).map(|i| s[(i, i)]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}
