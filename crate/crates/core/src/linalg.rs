//! Small dense linear-algebra helpers: eigenpairs of real nonsymmetric
//! matrices, polynomial roots, Gauss–Legendre nodes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigenpair of a real square matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: DVector<Complex64>,
}

/// All eigenpairs of a real square matrix, sorted by real part.
///
/// Eigenvectors are unit-norm null vectors of `M - λ I` from a complex SVD.
/// For a repeated eigenvalue the null space is returned as an orthonormal
/// basis whose first vector carries the largest possible weight on the
/// last coordinate.
pub fn eigenpairs(m: &DMatrix<f64>) -> Vec<EigenPair> {
    let n = m.nrows();
    let scale = m.norm().max(1e-300);
    let mut values: Vec<Complex64> = m.clone().complex_eigenvalues().iter().cloned().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let mc = m.map(|x| Complex64::new(x, 0.0));
    let cluster_tol = 1e-7 * scale;
    let mut out: Vec<EigenPair> = Vec::with_capacity(n);
    let mut i = 0;
    while i < values.len() {
        let mut j = i + 1;
        while j < values.len() && (values[j] - values[i]).norm() < cluster_tol {
            j += 1;
        }
        let mult = j - i;
        let mean: Complex64 = values[i..j].iter().sum::<Complex64>() / mult as f64;
        let shifted = &mc - DMatrix::<Complex64>::identity(n, n) * mean;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        // singular values come unsorted from nalgebra; collect the smallest
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let basis: Vec<DVector<Complex64>> = order[..mult]
            .iter()
            .map(|&k| v_t.row(k).adjoint().into_owned())
            .collect();
        let basis = if mult > 1 { align_last_coordinate(basis) } else { basis };
        for (k, vector) in basis.into_iter().enumerate() {
            // polish the eigenvalue with the Rayleigh quotient
            let value = if mult == 1 {
                (vector.adjoint() * &mc * &vector)[(0, 0)]
            } else {
                values[i + k]
            };
            out.push(EigenPair { value, vector });
        }
        i = j;
    }
    out
}

/// Rotate an orthonormal basis so the first vector is the projection of the
/// last unit vector onto the span.
fn align_last_coordinate(basis: Vec<DVector<Complex64>>) -> Vec<DVector<Complex64>> {
    let n = basis[0].len();
    let mut target = DVector::<Complex64>::zeros(n);
    target[n - 1] = Complex64::new(1.0, 0.0);
    let mut proj = DVector::<Complex64>::zeros(n);
    for b in &basis {
        let c = b.dotc(&target);
        proj += b * c;
    }
    if proj.norm() < 1e-12 {
        return basis;
    }
    let dim = basis.len();
    let mut out = vec![proj.normalize()];
    for b in basis {
        if out.len() == dim {
            break;
        }
        let mut v = b;
        for u in &out {
            let c = u.dotc(&v);
            v -= u * c;
        }
        if v.norm() > 1e-8 {
            out.push(v.normalize());
        }
    }
    out
}

/// Roots of `Σ c_k x^k` (ascending coefficients) from the companion matrix,
/// each refined by Newton iteration.
///
/// Returns `(root, converged)` pairs; `converged` is false when the Newton
/// polish did not reach a relative residual of 1e-12.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<(Complex64, bool)> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for k in 0..deg {
        comp[(0, k)] = -c[deg - 1 - k] / lead;
        if k + 1 < deg {
            comp[(k + 1, k)] = 1.0;
        }
    }
    comp.complex_eigenvalues()
        .iter()
        .map(|&z| newton_polish(&c, z))
        .collect()
}

/// Relative backward error `|p(z)| / Σ |c_k| |z|^k`.
pub fn relative_residual(coeffs: &[f64], z: Complex64) -> f64 {
    let (p, _) = horner(coeffs, z);
    let mag: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() * z.norm().powi(k as i32))
        .sum();
    if mag == 0.0 {
        0.0
    } else {
        p.norm() / mag
    }
}

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn newton_polish(coeffs: &[f64], mut z: Complex64) -> (Complex64, bool) {
    for _ in 0..50 {
        if relative_residual(coeffs, z) < 1e-15 {
            break;
        }
        let (p, dp) = horner(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let next = z - step;
        // stop when Newton no longer improves the residual (multiple roots)
        if relative_residual(coeffs, next) >= relative_residual(coeffs, z) {
            break;
        }
        z = next;
    }
    (z, relative_residual(coeffs, z) < 1e-12)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenpairs_of_rotation_block() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let pairs = eigenpairs(&m);
        assert_eq!(pairs.len(), 3);
        let mc = m.map(|x| Complex64::new(x, 0.0));
        for p in &pairs {
            let r = &mc * &p.vector - &p.vector * p.value;
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_eigenspace_prefers_last_axis() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut m4 = DMatrix::zeros(4, 4);
        m4.view_mut((0, 0), (3, 3)).copy_from(&m);
        // eigenvalue 0 twice: (0,0,1,0) and (0,0,0,1)
        let pairs = eigenpairs(&m4);
        let zero: Vec<_> = pairs.iter().filter(|p| p.value.norm() < 1e-9).collect();
        assert_eq!(zero.len(), 2);
        assert!((zero[0].vector[3].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_roots() {
        // (x-1)(x-2)(x+3)(x-0.5)
        let c = {
            let roots = [1.0, 2.0, -3.0, 0.5];
            let mut p = vec![1.0];
            for r in roots {
                let mut q = vec![0.0; p.len() + 1];
                for (k, a) in p.iter().enumerate() {
                    q[k + 1] += a;
                    q[k] -= r * a;
                }
                p = q;
            }
            p
        };
        let mut roots: Vec<f64> = polynomial_roots(&c).iter().map(|(z, ok)| {
            assert!(ok);
            assert!(z.im.abs() < 1e-12);
            z.re
        }).collect();
        roots.sort_by(f64::total_cmp);
        for (a, b) in roots.iter().zip([-3.0, 0.5, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
