//! Band-limited functions stored as Fourier coefficients on a finite
//! frequency lattice, with quadrature-weighted norms and direct synthesis.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation;

/// Default lattice used by the experiments: n = 1, Ξ_max = 64, Δξ = 1/8.
pub const DEFAULT_GRID: GridParams = GridParams {
    n: 1,
    xi_max: 64.0,
    dxi: 0.125,
};

/// Lattice parameters; also the JSON sidecar written next to a field CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub n: usize,
    pub xi_max: f64,
    pub dxi: f64,
}

impl GridParams {
    pub fn build(&self) -> Result<FrequencyGrid> {
        make_grid(self.n, self.xi_max, self.dxi)
    }
}

/// Ordered, duplicate-free set of frequency vectors with a per-mode
/// quadrature weight `dxi^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    dim: usize,
    xi_max: f64,
    dxi: f64,
    // flat, `dim` coordinates per mode, lexicographic order
    coords: Vec<f64>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or_else(|| x.total_cmp(y)))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn check_dim(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dimension must be 1, 2 or 3, got {n}"
        )))
    }
}

/// Symmetric rectangular lattice `{-Ξ_max, …, -Δξ, 0, Δξ, …, Ξ_max}^n`.
pub fn make_grid(n: usize, xi_max: f64, dxi: f64) -> Result<FrequencyGrid> {
    check_dim(n)?;
    if !(xi_max.is_finite() && xi_max > 0.0) {
        return Err(Error::invalid(format!("xi_max must be > 0, got {xi_max}")));
    }
    if !(dxi.is_finite() && dxi > 0.0 && dxi <= xi_max) {
        return Err(Error::invalid(format!(
            "dxi must satisfy 0 < dxi <= xi_max, got {dxi}"
        )));
    }
    let half = (xi_max / dxi + 1e-9).floor() as i64;
    let axis: Vec<f64> = (-half..=half).map(|k| k as f64 * dxi).collect();
    let per_axis = axis.len();
    let count = per_axis.pow(n as u32);
    let mut coords = Vec::with_capacity(count * n);
    for flat in 0..count {
        // first axis varies slowest so the flat order is lexicographic
        let mut rem = flat;
        let mut idx = vec![0usize; n];
        for d in (0..n).rev() {
            idx[d] = rem % per_axis;
            rem /= per_axis;
        }
        coords.extend(idx.iter().map(|&i| axis[i]));
    }
    Ok(FrequencyGrid {
        dim: n,
        xi_max,
        dxi,
        coords,
    })
}

impl FrequencyGrid {
    /// Grid from an explicit mode list (any order). Modes are sorted
    /// lexicographically; duplicates are rejected. Symmetry about the
    /// origin is only guaranteed by [`make_grid`].
    pub fn from_modes(dim: usize, modes: &[Vec<f64>], dxi: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(dxi.is_finite() && dxi > 0.0) {
            return Err(Error::invalid(format!("dxi must be > 0, got {dxi}")));
        }
        if modes.is_empty() {
            return Err(Error::invalid("mode list is empty"));
        }
        for m in modes {
            if m.len() != dim {
                return Err(Error::invalid(format!(
                    "mode {m:?} has {} coordinates, expected {dim}",
                    m.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("mode {m:?} is not finite")));
            }
        }
        let mut sorted: Vec<&Vec<f64>> = modes.iter().collect();
        sorted.sort_by(|a, b| lex_cmp(a, b));
        if sorted
            .windows(2)
            .any(|w| lex_cmp(w[0], w[1]) == Ordering::Equal)
        {
            return Err(Error::invalid("duplicate frequency mode"));
        }
        let xi_max = sorted
            .iter()
            .flat_map(|m| m.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        Ok(FrequencyGrid {
            dim,
            xi_max,
            dxi,
            coords: sorted.into_iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn dxi(&self) -> f64 {
        self.dxi
    }

    pub fn params(&self) -> GridParams {
        GridParams {
            n: self.dim,
            xi_max: self.xi_max,
            dxi: self.dxi,
        }
    }

    /// Quadrature weight attached to every mode, `dxi^n`.
    pub fn weight(&self) -> f64 {
        self.dxi.powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn modes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        self.modes().any(|m| lex_cmp(m, xi) == Ordering::Equal)
    }

    /// Index of the mode closest to `xi` (Euclidean), smaller index on ties.
    pub fn nearest(&self, xi: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, m) in self.modes().enumerate() {
            let d = m
                .iter()
                .zip(xi)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

/// Euclidean norm without intermediate overflow.
pub fn norm(xi: &[f64]) -> f64 {
    match xi {
        [x] => x.abs(),
        _ => xi.iter().fold(0.0, |acc: f64, v| acc.hypot(*v)),
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sobolev regularity index `s`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() {
            Ok(Self(s))
        } else {
            Err(Error::invalid(format!(
                "Sobolev index must be finite, got {s}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `(1 + |xi|^2)^{s/2}`.
    pub fn weight(self, xi_abs: f64) -> f64 {
        (1.0 + xi_abs * xi_abs).powf(0.5 * self.0)
    }
}

/// A band-limited function, represented by `f̂(ξ_j)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Arc<FrequencyGrid>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: impl Into<Arc<FrequencyGrid>>, coeffs: Vec<Complex64>) -> Result<Self> {
        let grid = grid.into();
        if coeffs.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                grid.len()
            )));
        }
        if coeffs
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::invalid("non-finite coefficient"));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: impl Into<Arc<FrequencyGrid>>) -> Self {
        let grid = grid.into();
        let coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, coeffs }
    }

    /// Field with one mode `xi` carrying coefficient `c`.
    pub fn single_mode(xi: &[f64], c: Complex64, dxi: f64) -> Result<Self> {
        let grid = FrequencyGrid::from_modes(xi.len(), &[xi.to_vec()], dxi)?;
        Self::new(grid, vec![c])
    }

    /// Coefficients with real and imaginary parts uniform in [-1, 1].
    pub fn random<R: Rng + ?Sized>(grid: impl Into<Arc<FrequencyGrid>>, rng: &mut R) -> Self {
        let grid = grid.into();
        let coeffs = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
            .collect();
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<FrequencyGrid> {
        Arc::clone(&self.grid)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Same grid, coefficients replaced by `f(ξ_j, f̂_j)`.
    pub fn map_coeffs(&self, f: impl Fn(&[f64], Complex64) -> Complex64) -> Self {
        let coeffs = self
            .grid
            .modes()
            .zip(&self.coeffs)
            .map(|(xi, &c)| f(xi, c))
            .collect();
        Self {
            grid: Arc::clone(&self.grid),
            coeffs,
        }
    }

    /// `α·self + β·other` on a shared grid.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("fields live on different grids"));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            coeffs,
        })
    }

    /// Discrete `H^s` norm `(Σ_j (1+|ξ_j|²)^s |f̂_j|² Δξ^n)^{1/2}`.
    pub fn sobolev_norm(&self, s: SobolevIndex) -> f64 {
        let w = self.grid.weight();
        let total = summation::sum(
            self.grid
                .modes()
                .zip(&self.coeffs)
                .map(|(xi, c)| (1.0 + dot(xi, xi)).powf(s.get()) * c.norm_sqr() * w),
        );
        total.sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.weight();
        summation::sum(self.coeffs.iter().map(|c| c.norm_sqr() * w)).sqrt()
    }

    /// `(2π)^{-n} Σ_j e^{i x·ξ_j} f̂_j Δξ^n`.
    ///
    /// Panics if `x` does not have the grid's dimension.
    pub fn synthesize(&self, x: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        let w = self.grid.weight();
        let acc = summation::sum_complex(
            self.grid
                .modes()
                .zip(&self.coeffs)
                .map(|(xi, &c)| Complex64::from_polar(1.0, dot(x, xi)) * c),
        );
        acc * w * inverse_fourier_factor(self.dim())
    }

    /// Writes the `xi_1,…,xi_n,re,im` CSV body.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("xi_{i}")).collect();
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        for (xi, c) in self.grid.modes().zip(&self.coeffs) {
            let mut row: Vec<String> = xi.iter().map(f64::to_string).collect();
            row.push(c.re.to_string());
            row.push(c.im.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV body; the sidecar supplies `n` and `dxi`.
    pub fn read_csv<R: Read>(reader: R, params: GridParams) -> Result<Self> {
        check_dim(params.n)?;
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let expected: Vec<String> = (1..=params.n)
            .map(|i| format!("xi_{i}"))
            .chain(["re".to_string(), "im".to_string()])
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::invalid(format!(
                "unexpected CSV header {:?}, expected {:?}",
                header, expected
            )));
        }
        let mut rows: Vec<(Vec<f64>, Complex64)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad number {v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (xi, c) = vals.split_at(params.n);
            rows.push((xi.to_vec(), Complex64::new(c[0], c[1])));
        }
        rows.sort_by(|a, b| lex_cmp(&a.0, &b.0));
        let modes: Vec<Vec<f64>> = rows.iter().map(|(xi, _)| xi.clone()).collect();
        let mut grid = FrequencyGrid::from_modes(params.n, &modes, params.dxi)?;
        grid.xi_max = grid.xi_max.max(params.xi_max);
        Self::new(grid, rows.into_iter().map(|(_, c)| c).collect())
    }

    /// Writes `path` (CSV) and its JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::io::write_atomic(path, &buf)?;
        let meta = serde_json::to_vec_pretty(&self.grid.params())?;
        crate::io::write_atomic(&sidecar_path(path), &meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: GridParams = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
        Self::read_csv(std::fs::File::open(path)?, meta)
    }
}

/// `field.csv` → `field.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// `(2π)^{-n}`.
pub fn inverse_fourier_factor(n: usize) -> f64 {
    (2.0 * PI).powi(-(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn three_point_lattice() {
        let g = make_grid(1, 1.0, 1.0).unwrap();
        let modes: Vec<f64> = g.modes().map(|m| m[0]).collect();
        assert_eq!(modes, vec![-1.0, 0.0, 1.0]);
        assert_eq!(g.weight(), 1.0);
    }

    #[test]
    fn two_dimensional_lattice_is_lexicographic() {
        let g = make_grid(2, 1.0, 1.0).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.weight(), 1.0);
        assert_eq!(g.mode(0), &[-1.0, -1.0]);
        assert_eq!(g.mode(1), &[-1.0, 0.0]);
        assert_eq!(g.mode(8), &[1.0, 1.0]);
    }

    #[test]
    fn quarter_spacing_lattice() {
        let g = make_grid(1, 10.0, 0.25).unwrap();
        assert_eq!(g.len(), 81);
        assert_eq!(g.weight(), 0.25);
    }

    #[test]
    fn lattice_is_symmetric() {
        let g = make_grid(2, 2.0, 0.5).unwrap();
        for m in g.modes() {
            let neg: Vec<f64> = m.iter().map(|v| -v).collect();
            assert!(g.contains(&neg));
        }
    }

    #[test]
    fn invalid_grid_parameters() {
        assert!(make_grid(0, 1.0, 1.0).is_err());
        assert!(make_grid(4, 1.0, 1.0).is_err());
        assert!(make_grid(1, 0.0, 1.0).is_err());
        assert!(make_grid(1, 1.0, 0.0).is_err());
        assert!(make_grid(1, 1.0, 2.0).is_err());
        assert!(make_grid(1, f64::NAN, 0.1).is_err());
    }

    #[test]
    fn duplicate_modes_rejected() {
        let r = FrequencyGrid::from_modes(1, &[vec![1.0], vec![1.0]], 1.0);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn coefficient_count_must_match() {
        let g = make_grid(1, 1.0, 1.0).unwrap();
        assert!(SpectralField::new(g.clone(), vec![c(1.0, 0.0)]).is_err());
        assert!(SpectralField::new(g, vec![c(f64::NAN, 0.0); 3]).is_err());
    }

    #[test]
    fn sobolev_norm_of_zero_mode_ignores_s() {
        let f = SpectralField::single_mode(&[0.0], c(3.0, -4.0), 1.0).unwrap();
        for s in [-1.0, 0.0, 0.5, 2.0] {
            assert_eq!(f.sobolev_norm(SobolevIndex::new(s).unwrap()), 5.0);
        }
    }

    #[test]
    fn sobolev_norm_single_mode() {
        let xi = [1.0, 1.0, 1.0];
        let f = SpectralField::single_mode(&xi, c(1.0, 0.0), 1.0).unwrap();
        let v = f.sobolev_norm(SobolevIndex::new(1.0).unwrap());
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sobolev_norm_zero_iff_zero_field() {
        let g = make_grid(1, 2.0, 0.5).unwrap();
        let s = SobolevIndex::new(0.7).unwrap();
        assert_eq!(SpectralField::zeros(g.clone()).sobolev_norm(s), 0.0);
        let mut coeffs = vec![c(0.0, 0.0); g.len()];
        coeffs[3] = c(1e-120, 0.0);
        let f = SpectralField::new(g, coeffs).unwrap();
        assert!(f.sobolev_norm(SobolevIndex::new(0.0).unwrap()) > 0.0);
    }

    #[test]
    fn plancherel_sum_matches_l2() {
        let g = make_grid(2, 3.0, 0.5).unwrap();
        let f = SpectralField::random(g, &mut ChaCha8Rng::seed_from_u64(7));
        let s0 = f.sobolev_norm(SobolevIndex::new(0.0).unwrap());
        assert_eq!(s0, f.l2_norm());
        let w = f.grid().weight();
        let direct = summation::sum(f.coeffs().iter().map(|c| c.norm_sqr() * w));
        assert_eq!(s0 * s0, direct.sqrt() * direct.sqrt());
    }

    #[test]
    fn synthesize_single_mode_at_origin() {
        let f = SpectralField::single_mode(&[2.0, -1.0], c(1.5, 0.5), 1.0).unwrap();
        let v = f.synthesize(&[0.0, 0.0]);
        let expected = c(1.5, 0.5) / (2.0 * PI).powi(2);
        assert!((v - expected).norm() < 1e-16);
    }

    #[test]
    fn synthesize_unit_phase() {
        let f = SpectralField::single_mode(&[1.0], c(1.0, 0.0), 1.0).unwrap();
        let v = f.synthesize(&[PI]);
        assert!((v - c(-1.0 / (2.0 * PI), 0.0)).norm() < 1e-16);
    }

    #[test]
    fn synthesize_cosine_pair() {
        let g = FrequencyGrid::from_modes(1, &[vec![-1.0], vec![1.0]], 1.0).unwrap();
        let f = SpectralField::new(g, vec![c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-20.0..20.0);
            // direct trigonometric sum
            let expected = (0.5 * (-x).cos() + 0.5 * x.cos()) / (2.0 * PI);
            let v = f.synthesize(&[x]);
            assert!((v.re - expected).abs() < 1e-15);
            assert!(v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn zero_field_synthesizes_to_zero() {
        let f = SpectralField::zeros(make_grid(3, 1.0, 0.5).unwrap());
        assert_eq!(f.synthesize(&[0.1, 0.2, 0.3]), c(0.0, 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let g = make_grid(2, 1.0, 0.5).unwrap();
        let f = SpectralField::random(g, &mut ChaCha8Rng::seed_from_u64(3));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("xi_1,xi_2,re,im\n"));
        let back = SpectralField::read_csv(&buf[..], f.grid().params()).unwrap();
        assert_eq!(back.coeffs(), f.coeffs());
        assert_eq!(back.grid().params(), f.grid().params());
        assert_eq!(back.grid().len(), f.grid().len());
    }

    #[test]
    fn csv_with_wrong_header_rejected() {
        let data = "k,re,im\n0,1,0\n";
        let r = SpectralField::read_csv(
            data.as_bytes(),
            GridParams {
                n: 1,
                xi_max: 1.0,
                dxi: 1.0,
            },
        );
        assert!(r.is_err());
    }
}
