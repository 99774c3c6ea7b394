//! Cubic spline interpolation, used to reconstruct second derivatives of
//! sampled warping functions.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Copy)]
pub enum SplineEnd {
    /// Zero second derivative at both ends.
    Natural,
    /// Periodic with the given period; the last knot must not repeat the first.
    Periodic,
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
    period: Option<f64>,
}

impl CubicSpline {
    pub fn natural(knots: &[f64], values: &[f64]) -> Result<Self> {
        check_knots(knots, values, 3)?;
        let n = knots.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives
            let k = n - 2;
            let mut sub = vec![0.0; k];
            let mut diag = vec![0.0; k];
            let mut sup = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                sub[i - 1] = h0;
                diag[i - 1] = 2.0 * (h0 + h1);
                sup[i - 1] = h1;
                rhs[i - 1] =
                    6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
            }
            let sol = solve_tridiagonal(&sub, &diag, &sup, &rhs);
            m[1..n - 1].copy_from_slice(&sol);
        }
        Ok(CubicSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            m,
            period: None,
        })
    }

    /// Spline with prescribed first derivatives `d0`, `d1` at the ends.
    pub fn clamped(knots: &[f64], values: &[f64], d0: f64, d1: f64) -> Result<Self> {
        check_knots(knots, values, 2)?;
        let n = knots.len();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let h = |i: usize| knots[i + 1] - knots[i];
        let slope = |i: usize| (values[i + 1] - values[i]) / h(i);
        diag[0] = 2.0 * h(0);
        sup[0] = h(0);
        rhs[0] = 6.0 * (slope(0) - d0);
        for i in 1..n - 1 {
            sub[i] = h(i - 1);
            diag[i] = 2.0 * (h(i - 1) + h(i));
            sup[i] = h(i);
            rhs[i] = 6.0 * (slope(i) - slope(i - 1));
        }
        sub[n - 1] = h(n - 2);
        diag[n - 1] = 2.0 * h(n - 2);
        rhs[n - 1] = 6.0 * (d1 - slope(n - 2));
        let m = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        Ok(CubicSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            m,
            period: None,
        })
    }

    pub fn periodic(knots: &[f64], values: &[f64], period: f64) -> Result<Self> {
        check_knots(knots, values, 3)?;
        let n = knots.len();
        if knots[n - 1] - knots[0] >= period {
            return Err(LabError::Reconstruction(
                "periodic knots must span less than one period".into(),
            ));
        }
        let h = |i: usize| -> f64 {
            if i + 1 < n {
                knots[i + 1] - knots[i]
            } else {
                knots[0] + period - knots[n - 1]
            }
        };
        let val = |i: usize| values[i % n];
        // cyclic tridiagonal system, solved densely (grids here are small)
        let mut a = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let im1 = (i + n - 1) % n;
            let h0 = h(im1);
            let h1 = h(i);
            a[i][im1] += h0;
            a[i][i] += 2.0 * (h0 + h1);
            a[i][(i + 1) % n] += h1;
            rhs[i] = 6.0 * ((val(i + 1) - val(i)) / h1 - (val(i) - val(im1)) / h0);
        }
        let m = solve_dense(a, rhs)
            .ok_or_else(|| LabError::Reconstruction("singular periodic spline system".into()))?;
        Ok(CubicSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            m,
            period: Some(period),
        })
    }

    pub fn build(knots: &[f64], values: &[f64], end: SplineEnd, period: f64) -> Result<Self> {
        match end {
            SplineEnd::Natural => Self::natural(knots, values),
            SplineEnd::Periodic => Self::periodic(knots, values, period),
        }
    }

    /// Value, first and second derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        if let Some(p) = self.period {
            let start = self.knots[0];
            let xr = start + (x - start).rem_euclid(p);
            let i = self.knots.partition_point(|&k| k <= xr).saturating_sub(1);
            let (x1, j) = if i + 1 < n {
                (self.knots[i + 1], i + 1)
            } else {
                (start + p, 0)
            };
            return segment(
                xr,
                self.knots[i],
                x1,
                self.values[i],
                self.values[j],
                self.m[i],
                self.m[j],
            );
        }
        let i = self
            .knots
            .partition_point(|&k| k <= x)
            .saturating_sub(1)
            .min(n - 2);
        segment(
            x,
            self.knots[i],
            self.knots[i + 1],
            self.values[i],
            self.values[i + 1],
            self.m[i],
            self.m[i + 1],
        )
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }
}

fn segment(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> (f64, f64, f64) {
    let h = x1 - x0;
    let a = (x1 - x) / h;
    let b = (x - x0) / h;
    let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
    let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
    let d2 = a * m0 + b * m1;
    (v, d1, d2)
}

fn check_knots(knots: &[f64], values: &[f64], min: usize) -> Result<()> {
    if knots.len() != values.len() {
        return Err(LabError::DimensionMismatch {
            expected: knots.len(),
            found: values.len(),
        });
    }
    if knots.len() < min {
        return Err(LabError::Reconstruction(format!(
            "need at least {min} knots, got {}",
            knots.len()
        )));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::Reconstruction(
            "knots must be strictly increasing".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Reconstruction("non-finite sample".into()));
    }
    Ok(())
}

fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn natural_spline_reproduces_linear_data() {
        let k: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let v: Vec<f64> = k.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = CubicSpline::natural(&k, &v).unwrap();
        let (y, d1, d2) = s.eval(1.3);
        assert!((y - 2.9).abs() < 1e-13);
        assert!((d1 - 3.0).abs() < 1e-13);
        assert!(d2.abs() < 1e-12);
    }

    #[test]
    fn periodic_spline_converges_on_sine() {
        let n = 256;
        let k: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let v: Vec<f64> = k.iter().map(|x| x.sin()).collect();
        let s = CubicSpline::periodic(&k, &v, 2.0 * PI).unwrap();
        for &x in &[0.1, 1.7, 3.3, 6.2, -0.4, 7.0] {
            let (y, d1, d2) = s.eval(x);
            assert!((y - x.sin()).abs() < 1e-8);
            assert!((d1 - x.cos()).abs() < 1e-5);
            assert!((d2 + x.sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn clamped_spline_reproduces_cubic() {
        let k: Vec<f64> = (0..9).map(|i| -1.0 + 0.3 * i as f64 + 0.01 * (i * i) as f64).collect();
        let f = |x: f64| x * x * x - 2.0 * x * x + 0.5;
        let df = |x: f64| 3.0 * x * x - 4.0 * x;
        let v: Vec<f64> = k.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::clamped(&k, &v, df(k[0]), df(k[8])).unwrap();
        for &x in &[-0.95, -0.2, 0.4, 1.3] {
            let (y, d, dd) = s.eval(x);
            assert!((y - f(x)).abs() < 1e-12);
            assert!((d - df(x)).abs() < 1e-11);
            assert!((dd - (6.0 * x - 4.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(CubicSpline::natural(&[0.0, 2.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
    }
}
