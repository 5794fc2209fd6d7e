//! Scalar fields on a [`Grid`] and the function-space operations the model
//! is phrased in: the H = L^2 inner product, the V = H^1 norm, the dual
//! V* norm built from the inverse Neumann Laplacian, and the smoothing
//! resolvent (I - eps Laplacian)^{-1}.
//!
//! All integrals are midpoint quadrature over the cells; for fields that the
//! cosine basis resolves, midpoint quadrature of products of basis functions
//! is exact, so quadrature sums and spectral (Parseval) sums agree to
//! roundoff.

use std::sync::Arc;

use crate::error::SimError;
use crate::grid::Grid;

/// Mean magnitudes below this fraction of the H norm count as zero when the
/// inverse Neumann Laplacian checks its domain.
pub const ZERO_MEAN_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    data: Vec<f64>,
}

impl Field {
    pub fn from_samples(grid: &Arc<Grid>, data: Vec<f64>) -> Field {
        assert_eq!(data.len(), grid.len());
        Field {
            grid: Arc::clone(grid),
            data,
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Field {
        Field::from_samples(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field::constant(grid, 0.0)
    }

    /// Evaluates `f` at the midpoint coordinates of every cell.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Field {
        let data = match grid.dims() {
            1 => grid.coords(0).iter().map(|&x| f(&[x])).collect(),
            _ => {
                let xs = grid.coords(0);
                let ys = grid.coords(1);
                let mut data = Vec::with_capacity(grid.len());
                for &x in &xs {
                    for &y in &ys {
                        data.push(f(&[x, y]));
                    }
                }
                data
            }
        };
        Field::from_samples(grid, data)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Field {
            grid: Arc::clone(&self.grid),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// self += c * other
    pub fn add_scaled(&mut self, c: f64, other: &Field) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    /// Spatial mean (midpoint quadrature divided by the volume, which is the
    /// plain sample average and equals the zero cosine mode).
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn inner_h(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let w = self.grid.cell_volume();
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
            * w
    }

    pub fn norm_h(&self) -> f64 {
        self.inner_h(self).sqrt()
    }

    /// H norm of the gradient, evaluated spectrally: each mode contributes
    /// lambda times its squared amplitude times the basis weight.
    pub fn norm_grad(&self) -> f64 {
        let modes = self.grid.to_modes(&self.data);
        let mut acc = 0.0;
        self.grid.for_each_mode(|flat, lambda, w| {
            acc += lambda * modes[flat] * modes[flat] * w;
        });
        acc.sqrt()
    }

    pub fn norm_v(&self) -> f64 {
        let modes = self.grid.to_modes(&self.data);
        let mut acc = 0.0;
        self.grid.for_each_mode(|flat, lambda, w| {
            acc += (1.0 + lambda) * modes[flat] * modes[flat] * w;
        });
        acc.sqrt()
    }

    /// Dual norm: || grad N(u - mean) ||_H^2 + mean^2, where N is the
    /// inverse Neumann Laplacian. In modes the first term is the sum of
    /// c_j^2 / lambda_j over the non-constant modes.
    pub fn norm_vstar(&self) -> f64 {
        let modes = self.grid.to_modes(&self.data);
        let mut acc = modes[0] * modes[0];
        self.grid.for_each_mode(|flat, lambda, w| {
            if lambda > 0.0 {
                acc += modes[flat] * modes[flat] / lambda * w;
            }
        });
        acc.sqrt()
    }

    /// || u ||_H + || Laplacian u ||_H; the norm in which boundary-datum
    /// differences enter the continuous-dependence estimate.
    pub fn norm_w(&self) -> f64 {
        self.norm_h() + self.laplacian().norm_h()
    }

    pub fn laplacian(&self) -> Field {
        let mut modes = self.grid.to_modes(&self.data);
        self.grid.for_each_mode(|flat, lambda, _| {
            modes[flat] *= -lambda;
        });
        Field {
            grid: Arc::clone(&self.grid),
            data: self.grid.to_samples(&modes),
        }
    }

    /// Solves -Laplacian w = u with homogeneous Neumann data and zero-mean
    /// side condition. Defined only for (numerically) zero-mean u.
    pub fn inv_neumann_laplacian(&self) -> Result<Field, SimError> {
        let m = self.mean();
        let norm = self.norm_h();
        if m.abs() > ZERO_MEAN_RTOL * norm {
            return Err(SimError::NonZeroMean { mean: m, norm });
        }
        let mut modes = self.grid.to_modes(&self.data);
        self.grid.for_each_mode(|flat, lambda, _| {
            if lambda > 0.0 {
                modes[flat] /= lambda;
            } else {
                modes[flat] = 0.0;
            }
        });
        Ok(Field {
            grid: Arc::clone(&self.grid),
            data: self.grid.to_samples(&modes),
        })
    }

    /// Helmholtz smoothing (I - eps Laplacian)^{-1} u: mode j is divided by
    /// 1 + eps lambda_j, so the mean is preserved exactly.
    pub fn helmholtz_smooth(&self, eps: f64) -> Field {
        assert!(eps >= 0.0);
        let mut modes = self.grid.to_modes(&self.data);
        self.grid.for_each_mode(|flat, lambda, _| {
            modes[flat] /= 1.0 + eps * lambda;
        });
        Field {
            grid: Arc::clone(&self.grid),
            data: self.grid.to_samples(&modes),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rng_vals(n: usize, seed: u64) -> Vec<f64> {
        // splitmix64, good enough to fill test fields
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_add(0x9e3779b97f4a7c15);
                let mut z = s;
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
                z = z ^ (z >> 31);
                (z as f64 / u64::MAX as f64) * 2.0 - 1.0
            })
            .collect()
    }

    fn random_zero_mean(grid: &Arc<Grid>, seed: u64) -> Field {
        let mut f = Field::from_samples(grid, rng_vals(grid.len(), seed));
        let m = f.mean();
        for v in f.data_mut() {
            *v -= m;
        }
        f
    }

    #[test]
    fn mean_of_shifted_cosine() {
        let grid = Grid::new_1d(64, 1.0);
        let f = Field::from_fn(&grid, |x| 0.3 + (PI * x[0]).cos());
        // quadrature oracle: plain midpoint sum
        let direct = f.data().iter().sum::<f64>() / 64.0;
        assert!((f.mean() - direct).abs() < 1e-15);
        assert!((f.mean() - 0.3).abs() < 1e-13);
    }

    #[test]
    fn norm_h_of_cosine_is_sqrt_half() {
        // integral of cos^2(pi x) over (0,1) is 1/2
        let grid = Grid::new_1d(128, 1.0);
        let f = Field::from_fn(&grid, |x| (PI * x[0]).cos());
        assert!((f.norm_h() - 0.5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn norm_h_of_constant() {
        let grid = Grid::new_1d(32, 1.0);
        let f = Field::constant(&grid, -2.5);
        assert!((f.norm_h() - 2.5).abs() < 1e-13);
        assert!((f.norm_vstar() - 2.5).abs() < 1e-13);
    }

    #[test]
    fn norm_v_of_cosine_matches_analytic() {
        // |cos|_H^2 = 1/2, |grad cos(pi x)|_H^2 = pi^2/2
        let grid = Grid::new_1d(128, 1.0);
        let f = Field::from_fn(&grid, |x| (PI * x[0]).cos());
        let expect = (0.5 + 0.5 * PI * PI).sqrt();
        assert!((f.norm_v() - expect).abs() < 1e-12);
        assert!((f.norm_grad() - (0.5 * PI * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn norm_vstar_of_cosine() {
        // N maps cos(pi x) to cos(pi x)/pi^2, gradient norm sqrt(1/2)/pi
        let grid = Grid::new_1d(128, 1.0);
        let f = Field::from_fn(&grid, |x| (PI * x[0]).cos());
        assert!((f.norm_vstar() - 0.5f64.sqrt() / PI).abs() < 1e-13);
    }

    #[test]
    fn norm_grad_matches_quadrature_of_sine_series() {
        // d/dx cos(2 pi x / L) = -(2 pi / L) sin(2 pi x / L); midpoint
        // quadrature of sin^2 over (0, L) is L/2 exactly for resolved modes
        let l = 1.7;
        let grid = Grid::new_1d(96, l);
        let f = Field::from_fn(&grid, |x| (2.0 * PI * x[0] / l).cos());
        let expect = (2.0 * PI / l) * (l / 2.0).sqrt();
        assert!((f.norm_grad() - expect).abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_tensor_mode() {
        let (lx, ly) = (1.0, 2.0);
        let grid = Grid::new_2d(32, 24, lx, ly);
        let f = Field::from_fn(&grid, |x| {
            (2.0 * PI * x[0] / lx).cos() * (3.0 * PI * x[1] / ly).cos()
        });
        let lam = (2.0 * PI / lx).powi(2) + (3.0 * PI / ly).powi(2);
        let lap = f.laplacian();
        let diff = lap.zip_with(&f, |a, b| a + lam * b);
        assert!(diff.max_abs() < 1e-10, "max err {}", diff.max_abs());
    }

    #[test]
    fn laplacian_has_zero_mean() {
        let grid = Grid::new_1d(64, 1.0);
        let f = Field::from_samples(&grid, rng_vals(64, 3));
        assert!(f.laplacian().mean().abs() < 1e-12);
    }

    #[test]
    fn inv_neumann_inverts_laplacian() {
        let grid = Grid::new_1d(128, 1.0);
        for seed in 0..10 {
            let w = random_zero_mean(&grid, 100 + seed);
            // N(Laplacian w) = -w for zero-mean w
            let nw = w.laplacian().inv_neumann_laplacian().unwrap();
            let diff = nw.zip_with(&w, |a, b| a + b);
            assert!(diff.max_abs() < 1e-10 * w.max_abs().max(1.0));
        }
    }

    #[test]
    fn inv_neumann_solves_to_relative_residual() {
        for &n in &[64usize, 128, 256] {
            let grid = Grid::new_1d(n, 1.0);
            let u = random_zero_mean(&grid, n as u64);
            let w = u.inv_neumann_laplacian().unwrap();
            let res = w.laplacian().zip_with(&u, |a, b| a + b);
            assert!(
                res.norm_h() <= 1e-10 * u.norm_h(),
                "n={n}: rel residual {}",
                res.norm_h() / u.norm_h()
            );
            assert!(w.mean().abs() < 1e-12);
        }
    }

    #[test]
    fn inv_neumann_is_self_adjoint() {
        let grid = Grid::new_1d(64, 1.0);
        for seed in 0..5 {
            let u = random_zero_mean(&grid, 40 + seed);
            let v = random_zero_mean(&grid, 80 + seed);
            let lhs = u.inner_h(&v.inv_neumann_laplacian().unwrap());
            let rhs = v.inner_h(&u.inv_neumann_laplacian().unwrap());
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn inv_neumann_rejects_nonzero_mean() {
        let grid = Grid::new_1d(32, 1.0);
        let f = Field::constant(&grid, 0.5);
        match f.inv_neumann_laplacian() {
            Err(SimError::NonZeroMean { .. }) => {}
            other => panic!("expected NonZeroMean, got {other:?}"),
        }
    }

    #[test]
    fn inv_neumann_of_zero_is_zero() {
        let grid = Grid::new_1d(32, 1.0);
        let z = Field::zeros(&grid);
        assert_eq!(z.inv_neumann_laplacian().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn poincare_bound_on_zero_mean_fields() {
        // || u ||_V <= sqrt(1 + (L/pi)^2) || grad u ||_H on zero-mean fields
        let l = 2.0;
        let grid = Grid::new_1d(64, l);
        let c = (1.0 + (l / PI).powi(2)).sqrt();
        for seed in 0..20 {
            let u = random_zero_mean(&grid, 7 + seed);
            assert!(u.norm_v() <= c * u.norm_grad() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn vstar_bounded_by_h() {
        // embedding constant: modes carry 1/lambda <= 1/lambda_min, the mean
        // term compares against vol * c_0^2
        let grid = Grid::new_1d(48, 1.0);
        let lambda_min = PI * PI;
        let c = (1.0f64 / lambda_min).max(1.0).sqrt();
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let u = Field::from_samples(&grid, rng_vals(48, 900 + seed));
            let ratio = u.norm_vstar() / u.norm_h();
            worst = worst.max(ratio);
            assert!(ratio <= c * (1.0 + 1e-12));
        }
        println!("max vstar/h ratio over samples: {worst:.6} (bound {c:.6})");
    }

    #[test]
    fn helmholtz_preserves_mean_and_damps_modes() {
        let grid = Grid::new_1d(64, 1.0);
        let f = Field::from_fn(&grid, |x| 0.4 + (3.0 * PI * x[0]).cos());
        let eps = 0.05;
        let s = f.helmholtz_smooth(eps);
        assert!((s.mean() - f.mean()).abs() < 1e-14);
        let lam = (3.0 * PI).powi(2);
        let expect = Field::from_fn(&grid, |x| 0.4 + (3.0 * PI * x[0]).cos() / (1.0 + eps * lam));
        let diff = s.zip_with(&expect, |a, b| a - b);
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn helmholtz_approaches_identity() {
        let grid = Grid::new_1d(64, 1.0);
        let f = Field::from_samples(&grid, rng_vals(64, 17));
        let mut last = f64::INFINITY;
        for &eps in &[1e-1, 1e-2, 1e-3] {
            let d = f.helmholtz_smooth(eps).zip_with(&f, |a, b| a - b).norm_h();
            assert!(d < last);
            last = d;
        }
    }
}
