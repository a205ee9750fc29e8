//! Least-squares polynomial fits for the sweep and multi-round figures.

use crate::{LabError, Result};

/// Fit a degree-1 or degree-2 polynomial by normal equations. Returns the
/// coefficients in ascending power order plus the RMS residual; with exactly
/// `degree + 1` points the fit interpolates and the residual is zero.
pub fn polyfit(points: &[(f64, f64)], degree: usize) -> Result<(Vec<f64>, f64)> {
    if !(1..=2).contains(&degree) {
        return Err(LabError::Config(format!("unsupported fit degree {degree}")));
    }
    if points.len() < degree + 1 {
        return Err(LabError::Config(format!(
            "need at least {} points for a degree-{degree} fit",
            degree + 1
        )));
    }
    let n = degree + 1;
    // Normal equations A c = b with A[i][j] = sum x^(i+j), b[i] = sum y x^i.
    let mut a = vec![vec![0.0f64; n]; n];
    let mut b = vec![0.0f64; n];
    for &(x, y) in points {
        let mut xp = vec![1.0; 2 * degree + 1];
        for i in 1..xp.len() {
            xp[i] = xp[i - 1] * x;
        }
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += xp[i + j];
            }
            b[i] += y * xp[i];
        }
    }
    let coeffs = solve(&mut a, &mut b)?;
    let mut sq = 0.0;
    for &(x, y) in points {
        let mut fx = 0.0;
        for (i, c) in coeffs.iter().enumerate() {
            fx += c * x.powi(i as i32);
        }
        sq += (y - fx).powi(2);
    }
    let rms = (sq / points.len() as f64).sqrt();
    Ok((coeffs, rms))
}

fn solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        if mag < 1e-12 {
            return Err(LabError::Config(
                "degenerate abscissae: fit system is singular".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in (r + 1)..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

/// Evaluate fitted coefficients at a point.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * x.powi(i as i32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_recovered_exactly() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, (i * i) as f64)).collect();
        let (c, rms) = polyfit(&pts, 2).unwrap();
        assert!(c[0].abs() < 1e-12);
        assert!(c[1].abs() < 1e-12);
        assert!((c[2] - 1.0).abs() < 1e-12);
        assert!(rms < 1e-12);
    }

    #[test]
    fn line_recovered() {
        let pts: Vec<(f64, f64)> = (0..4).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (c, rms) = polyfit(&pts, 1).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!((c[1] - 2.0).abs() < 1e-12);
        assert!(rms < 1e-12);
    }

    #[test]
    fn exact_interpolation_residual_is_zero() {
        let pts = vec![(0.0, 3.0), (1.0, 1.0), (2.0, 7.0)];
        let (c, rms) = polyfit(&pts, 2).unwrap();
        for (x, y) in &pts {
            assert!((poly_eval(&c, *x) - y).abs() < 1e-12);
        }
        assert!(rms < 1e-12);
    }

    #[test]
    fn degenerate_abscissae_rejected() {
        let pts = vec![(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)];
        assert!(polyfit(&pts, 2).is_err());
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(polyfit(&[(0.0, 0.0), (1.0, 1.0)], 2).is_err());
    }
}
