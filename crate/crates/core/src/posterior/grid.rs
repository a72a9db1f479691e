//! Uniform-grid tabulation, convolution, interpolation and inverse-CDF
//! sampling for one-dimensional densities.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{log, sqrt};
use crate::model::ComponentDist;

pub(crate) const GRID_POINTS: usize = 4096;
const CENTER: usize = GRID_POINTS / 2;

/// Points `x_k = offset + (k − CENTER)·h` for `k = 0..GRID_POINTS`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct UniformGrid {
    pub h: f64,
    pub offset: f64,
}

impl UniformGrid {
    pub fn with_half_width(half_width: f64, offset: f64) -> Self {
        Self {
            h: 2.0 * half_width / GRID_POINTS as f64,
            offset,
        }
    }

    pub fn x(&self, k: usize) -> f64 {
        self.offset + (k as f64 - CENTER as f64) * self.h
    }

    fn position(&self, x: f64) -> f64 {
        (x - self.offset) / self.h + CENTER as f64
    }

    /// Density of `d` shifted to location zero, on a zero-offset grid.
    pub fn tabulate_centered(&self, d: &ComponentDist) -> Vec<f64> {
        let c = d.centered();
        (0..GRID_POINTS)
            .map(|k| c.pdf((k as f64 - CENTER as f64) * self.h))
            .collect()
    }

    pub fn tabulate(&self, d: &ComponentDist) -> Vec<f64> {
        (0..GRID_POINTS).map(|k| d.pdf(self.x(k))).collect()
    }
}

fn support(f: &[f64]) -> (usize, usize) {
    let lo = f.iter().position(|v| *v != 0.0).unwrap_or(0);
    let hi = f.iter().rposition(|v| *v != 0.0).unwrap_or(0);
    (lo, hi)
}

/// Trapezoid convolution `(f * g)(x_k) = h Σ_j f(x_j) g(x_k − x_j)` of two
/// zero-offset tabulations.
pub(crate) fn convolve(f: &[f64], g: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; GRID_POINTS];
    let (flo, fhi) = support(f);
    let (glo, ghi) = support(g);
    for (k, slot) in out.iter_mut().enumerate() {
        // g index k − j + CENTER must lie in its support
        let j_lo = (k + CENTER).saturating_sub(ghi).max(flo);
        let j_hi = (k + CENTER).saturating_sub(glo).min(fhi);
        if j_lo > j_hi {
            continue;
        }
        let mut s = 0.0;
        for j in j_lo..=j_hi {
            s += f[j] * g[k + CENTER - j];
        }
        *slot = s * h;
    }
    out
}

/// Values on a grid with cubic interpolation inside `[lo, hi]` and linear
/// extrapolation outside it.
#[derive(Clone, Debug)]
pub(crate) struct Interpolant {
    grid: UniformGrid,
    values: Vec<f64>,
    lo: usize,
    hi: usize,
}

impl Interpolant {
    pub fn new(grid: UniformGrid, values: Vec<f64>, lo: usize, hi: usize) -> Self {
        debug_assert!(hi >= lo + 3);
        Self {
            grid,
            values,
            lo,
            hi,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = self.grid.position(x);
        let (lo, hi) = (self.lo as f64, self.hi as f64);
        if pos <= lo {
            let v0 = self.values[self.lo];
            let v1 = self.values[self.lo + 1];
            return v0 + (pos - lo) * (v1 - v0);
        }
        if pos >= hi {
            let v0 = self.values[self.hi];
            let v1 = self.values[self.hi - 1];
            return v0 + (pos - hi) * (v0 - v1);
        }
        // four-point Lagrange on k-1..k+2, clamped to the valid range
        let k = (pos as usize).clamp(self.lo + 1, self.hi - 2);
        let t = pos - k as f64;
        let v = &self.values[k - 1..k + 3];
        let (tm1, t1, t2) = (t + 1.0, t - 1.0, t - 2.0);
        -v[0] * t * t1 * t2 / 6.0 + v[1] * tm1 * t1 * t2 / 2.0 - v[2] * tm1 * t * t2 / 2.0
            + v[3] * tm1 * t * t1 / 6.0
    }
}

/// Inverse-CDF sampler from a tabulated density, exact for the piecewise
/// linear density implied by the trapezoid rule.
#[derive(Clone, Debug)]
pub(crate) struct Sampler {
    grid: UniformGrid,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn new(grid: UniformGrid, pdf: Vec<f64>) -> Self {
        let h = grid.h;
        let n = pdf.len();
        let slope = |k: usize| {
            if k == 0 || k + 1 == n {
                0.0
            } else {
                (pdf[k + 1] - pdf[k - 1]) / (2.0 * h)
            }
        };
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for k in 1..n {
            acc += 0.5 * h * (pdf[k - 1] + pdf[k]);
            // Euler-Maclaurin end correction of the running trapezoid sum
            cdf.push(acc - h * h / 12.0 * (slope(k) - slope(0)));
        }
        Self { grid, pdf, cdf }
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let total = *self.cdf.last().expect("nonempty grid");
        let target = u * total;
        let k = self
            .cdf
            .partition_point(|c| *c <= target)
            .saturating_sub(1)
            .min(GRID_POINTS - 2);
        let r = target - self.cdf[k];
        let (f0, f1) = (self.pdf[k], self.pdf[k + 1]);
        let d = (f1 - f0) / (2.0 * self.grid.h);
        let disc = f0 * f0 + 4.0 * d * r;
        let denom = f0 + sqrt(disc.max(0.0));
        let t = if denom > 0.0 {
            (2.0 * r / denom).clamp(0.0, self.grid.h)
        } else {
            0.5 * self.grid.h
        };
        self.grid.x(k) + t
    }
}

/// Density of the sum of independent components, all shifted to location
/// zero, tabulated on `grid`.
pub(crate) fn sum_density(parts: &[ComponentDist], grid: &UniformGrid) -> Vec<f64> {
    let mut acc = grid.tabulate_centered(&parts[0]);
    for p in &parts[1..] {
        acc = convolve(&acc, &grid.tabulate_centered(p), grid.h);
    }
    acc
}

/// Index range where a tabulated density is usable in log space.
pub(crate) fn valid_range(f: &[f64], lo_bound: usize, hi_bound: usize) -> (usize, usize) {
    let floor = 1e-280;
    let mut lo = lo_bound;
    while lo < CENTER && !(f[lo] > floor) {
        lo += 1;
    }
    let mut hi = hi_bound;
    while hi > CENTER && !(f[hi] > floor) {
        hi -= 1;
    }
    (lo, hi)
}

pub(crate) fn log_values(f: &[f64]) -> Vec<f64> {
    f.iter().map(|v| if *v > 0.0 { log(*v) } else { -745.0 }).collect()
}

/// Grid indices bounding `|x − offset| ≤ frac·half_width`.
pub(crate) fn inner_bounds(frac: f64) -> (usize, usize) {
    let half = (frac * CENTER as f64) as usize;
    (CENTER - half, CENTER + half - 1)
}

#[cfg(test)]
fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_convolution_is_gaussian() {
        let grid = UniformGrid::with_half_width(20.0, 0.0);
        let a = ComponentDist::gaussian_with_variance(0.0, 1.0);
        let b = ComponentDist::gaussian_with_variance(0.0, 0.5);
        let sum = sum_density(&[a, b], &grid);
        let exact = grid.tabulate(&ComponentDist::gaussian_with_variance(0.0, 1.5));
        assert!(max_abs_diff(&sum, &exact) < 1e-13);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_quadratics() {
        let grid = UniformGrid::with_half_width(10.0, 1.0);
        let vals: Vec<f64> = (0..GRID_POINTS)
            .map(|k| {
                let x = grid.x(k);
                -0.5 * x * x + 3.0 * x
            })
            .collect();
        let (lo, hi) = inner_bounds(0.9);
        let interp = Interpolant::new(grid, vals, lo, hi);
        for x in [-3.3, 0.0001, 1.2345, 7.77] {
            assert!((interp.eval(x) - (-0.5 * x * x + 3.0 * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn sampler_inverts_logistic_cdf() {
        let d = ComponentDist::Logistic {
            location: 0.0,
            scale: 0.8,
        };
        let grid = UniformGrid::with_half_width(40.0, 0.0);
        let s = Sampler::new(grid, grid.tabulate(&d));
        for u in [0.001, 0.2, 0.5, 0.77, 0.999] {
            let exact = 0.8 * log(u / (1.0 - u));
            assert!((s.inverse_cdf(u) - exact).abs() < 1e-5, "u = {u}");
        }
    }
}
