use num_complex::Complex64;

const MAX_SWEEPS: usize = 60;

/// Singular values of a real `rows × cols` row-major matrix, descending.
/// One-sided Jacobi on the columns.
pub fn singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    assert_eq!(data.len(), rows * cols);
    // Column-major copy so each column is contiguous.
    let mut u: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| data[i * cols + j]).collect())
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&u[p], &u[q]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for k in 0..rows {
                        a += cp[k] * cp[k];
                        b += cq[k] * cq[k];
                        g += cp[k] * cq[k];
                    }
                    (a, b, g)
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = u.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                for k in 0..rows {
                    let a = cp[k];
                    let b = cq[k];
                    cp[k] = c * a - s * b;
                    cq[k] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Smallest singular value of `zI − A` for real `A` (row-major, `n × n`),
/// via the real embedding `[[Re, −Im], [Im, Re]]`, whose singular values
/// are those of the complex matrix, each repeated twice.
pub fn sigma_min_shifted(n: usize, a: &[f64], z: Complex64) -> f64 {
    let m = 2 * n;
    let mut e = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let re = if i == j { z.re - a[i * n + j] } else { -a[i * n + j] };
            let im = if i == j { z.im } else { 0.0 };
            e[i * m + j] = re;
            e[(i + n) * m + (j + n)] = re;
            e[i * m + (j + n)] = -im;
            e[(i + n) * m + j] = im;
        }
    }
    *singular_values(m, m, &e).last().unwrap_or(&0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_values_are_absolute_entries() {
        let sv = singular_values(3, 3, &[3.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(sv, vec![5.0, 3.0, 0.5]);
    }

    #[test]
    fn rank_one_and_frobenius() {
        let a = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        let sv = singular_values(3, 2, &a);
        let fro: f64 = a.iter().map(|v| v * v).sum();
        assert!((sv[0] * sv[0] - fro).abs() < 1e-12);
        assert!(sv[1] < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        // σ² are eigenvalues of AᵀA.
        let a = [2.0, 1.0, -1.0, 3.0];
        let ata = [5.0, -1.0, -1.0, 10.0];
        let tr: f64 = ata[0] + ata[3];
        let det: f64 = ata[0] * ata[3] - ata[1] * ata[2];
        let disc = (tr * tr / 4.0 - det).sqrt();
        let want = [(tr / 2.0 + disc).sqrt(), (tr / 2.0 - disc).sqrt()];
        let sv = singular_values(2, 2, &a);
        assert!((sv[0] - want[0]).abs() < 1e-13 && (sv[1] - want[1]).abs() < 1e-13);
    }

    #[test]
    fn shifted_normal_matrix() {
        // For A = diag(0.5, −0.2), σ_min(zI − A) = min |z − λ|.
        let a = [0.5, 0.0, 0.0, -0.2];
        let z = Complex64::new(0.3, 1.1);
        let want = (z - 0.5).norm().min((z + 0.2).norm());
        assert!((sigma_min_shifted(2, &a, z) - want).abs() < 1e-13);
    }
}
