//! Cell-centered tensor grids on rectangles with a cosine spectral basis.
//!
//! Samples live at the midpoints x_i = (i + 1/2) h of a uniform grid, so the
//! DCT-II diagonalizes the Laplacian with homogeneous Neumann conditions:
//! the basis function of mode j on an axis of length L is cos(pi j x / L)
//! with eigenvalue -lambda_j, lambda_j = (pi j / L)^2. In 2D the basis and
//! the eigenvalues tensorize. Mode coefficients are stored in amplitude
//! convention: u_i = sum_j c_j cos(pi j x_i / L), so c_0 is the plain
//! average of the samples.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

pub struct Grid {
    shape: Vec<usize>,
    lengths: Vec<f64>,
    /// Per-axis Laplacian symbols lambda_j = (pi j / L)^2.
    lambda: Vec<Vec<f64>>,
    plans: Vec<Arc<dyn TransformType2And3<f64>>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("shape", &self.shape)
            .field("lengths", &self.lengths)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.lengths == other.lengths
    }
}

impl Grid {
    pub fn new(shape: &[usize], lengths: &[f64]) -> Arc<Grid> {
        assert!(
            !shape.is_empty() && shape.len() <= 2,
            "only 1D and 2D grids are supported"
        );
        assert_eq!(shape.len(), lengths.len());
        let mut planner = DctPlanner::new();
        let mut lambda = Vec::with_capacity(shape.len());
        let mut plans = Vec::with_capacity(shape.len());
        for (&n, &l) in shape.iter().zip(lengths) {
            assert!(n >= 4, "need at least 4 samples per axis");
            assert!(l > 0.0, "axis length must be positive");
            lambda.push(
                (0..n)
                    .map(|j| (std::f64::consts::PI * j as f64 / l).powi(2))
                    .collect(),
            );
            plans.push(planner.plan_dct2(n));
        }
        Arc::new(Grid {
            shape: shape.to_vec(),
            lengths: lengths.to_vec(),
            lambda,
            plans,
        })
    }

    pub fn new_1d(n: usize, length: f64) -> Arc<Grid> {
        Grid::new(&[n], &[length])
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Arc<Grid> {
        Grid::new(&[nx, ny], &[lx, ly])
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Quadrature weight of one cell (midpoint rule).
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Midpoint coordinates along one axis.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let n = self.shape[axis];
        let h = self.lengths[axis] / n as f64;
        (0..n).map(|i| (i as f64 + 0.5) * h).collect()
    }

    /// Laplacian symbol of the mode with the given flat index.
    pub fn lambda_at(&self, flat: usize) -> f64 {
        match self.shape.len() {
            1 => self.lambda[0][flat],
            _ => {
                let n1 = self.shape[1];
                self.lambda[0][flat / n1] + self.lambda[1][flat % n1]
            }
        }
    }

    /// Calls `f(flat, lambda, weight)` for every mode, where `weight` is the
    /// squared H norm of that basis function (volume times 1/2 per active
    /// axis direction).
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, f64, f64)) {
        let vol = self.volume();
        match self.shape.len() {
            1 => {
                for (j, &lam) in self.lambda[0].iter().enumerate() {
                    let w = if j == 0 { vol } else { 0.5 * vol };
                    f(j, lam, w);
                }
            }
            _ => {
                let n1 = self.shape[1];
                for j0 in 0..self.shape[0] {
                    let w0 = if j0 == 0 { 1.0 } else { 0.5 };
                    for j1 in 0..n1 {
                        let w1 = if j1 == 0 { 1.0 } else { 0.5 };
                        f(
                            j0 * n1 + j1,
                            self.lambda[0][j0] + self.lambda[1][j1],
                            vol * w0 * w1,
                        );
                    }
                }
            }
        }
    }

    /// Samples -> amplitude coefficients.
    pub fn to_modes(&self, samples: &[f64]) -> Vec<f64> {
        assert_eq!(samples.len(), self.len());
        let mut buf = samples.to_vec();
        match self.shape.len() {
            1 => self.dct2_line(0, &mut buf),
            _ => {
                let (n0, n1) = (self.shape[0], self.shape[1]);
                for row in buf.chunks_exact_mut(n1) {
                    self.dct2_line(1, row);
                }
                let mut col = vec![0.0; n0];
                for j in 0..n1 {
                    for i in 0..n0 {
                        col[i] = buf[i * n1 + j];
                    }
                    self.dct2_line(0, &mut col);
                    for i in 0..n0 {
                        buf[i * n1 + j] = col[i];
                    }
                }
            }
        }
        buf
    }

    /// Amplitude coefficients -> samples.
    pub fn to_samples(&self, modes: &[f64]) -> Vec<f64> {
        assert_eq!(modes.len(), self.len());
        let mut buf = modes.to_vec();
        match self.shape.len() {
            1 => self.dct3_line(0, &mut buf),
            _ => {
                let (n0, n1) = (self.shape[0], self.shape[1]);
                for row in buf.chunks_exact_mut(n1) {
                    self.dct3_line(1, row);
                }
                let mut col = vec![0.0; n0];
                for j in 0..n1 {
                    for i in 0..n0 {
                        col[i] = buf[i * n1 + j];
                    }
                    self.dct3_line(0, &mut col);
                    for i in 0..n0 {
                        buf[i * n1 + j] = col[i];
                    }
                }
            }
        }
        buf
    }

    /// Unnormalized DCT-II followed by the amplitude scaling: the library
    /// returns X_k = sum_i x_i cos(pi k (2i+1) / (2n)), so c_0 = X_0 / n and
    /// c_k = 2 X_k / n for k >= 1.
    fn dct2_line(&self, axis: usize, line: &mut [f64]) {
        self.plans[axis].process_dct2(line);
        let n = line.len() as f64;
        line[0] /= n;
        for v in &mut line[1..] {
            *v *= 2.0 / n;
        }
    }

    /// Inverse of `dct2_line`: the library DCT-III computes
    /// y_i = z_0 / 2 + sum_{k>=1} z_k cos(pi k (2i+1) / (2n)), so feeding
    /// z_0 = 2 c_0, z_k = c_k reconstructs the samples exactly.
    fn dct3_line(&self, axis: usize, line: &mut [f64]) {
        line[0] *= 2.0;
        self.plans[axis].process_dct3(line);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(n^2) evaluation of the half-sample cosine series.
    fn naive_samples(n: usize, l: f64, modes: &[f64]) -> Vec<f64> {
        let h = l / n as f64;
        (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                modes
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * (std::f64::consts::PI * j as f64 * x / l).cos())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn mode_amplitudes_match_naive_series() {
        let n = 12;
        let l = 2.5;
        let grid = Grid::new_1d(n, l);
        let mut modes = vec![0.0; n];
        modes[0] = 0.7;
        modes[1] = -1.3;
        modes[5] = 0.25;
        let samples = grid.to_samples(&modes);
        let direct = naive_samples(n, l, &modes);
        for (a, b) in samples.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
        let back = grid.to_modes(&samples);
        for (a, b) in back.iter().zip(&modes) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn round_trip_2d() {
        let grid = Grid::new_2d(8, 6, 1.0, 3.0);
        let vals: Vec<f64> = (0..grid.len())
            .map(|i| ((i * 37 + 11) % 17) as f64 / 17.0 - 0.4)
            .collect();
        let modes = grid.to_modes(&vals);
        let back = grid.to_samples(&modes);
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_mode_is_sample_average() {
        let grid = Grid::new_2d(8, 4, 2.0, 1.0);
        let vals: Vec<f64> = (0..grid.len()).map(|i| (i as f64).sin()).collect();
        let modes = grid.to_modes(&vals);
        let avg = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((modes[0] - avg).abs() < 1e-14);
    }

    #[test]
    fn lambda_tensorizes() {
        let grid = Grid::new_2d(6, 4, 1.0, 2.0);
        let pi = std::f64::consts::PI;
        // mode (2, 3) sits at flat index 2 * 4 + 3
        let expect = (2.0 * pi).powi(2) + (3.0 * pi / 2.0).powi(2);
        assert!((grid.lambda_at(2 * 4 + 3) - expect).abs() < 1e-12);
    }
}
