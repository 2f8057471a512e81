//! Periodic grids on the torus `[0, 2L)^dim`, sampled fields, dyadic cubes
//! and FFT-based circular convolution.
//!
//! Points are `x_i = i·h` with `h = 2L/N`; in 2D the flat index is
//! `i0·N + i1` (second axis fastest). Grid frequencies are `ξ = πk/L` with
//! `k` the signed wavenumber, so a field is `Σ c_k e^{iξ·x}`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N must be a power of two >= 64, got {n}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        Ok(Self { dim, n, half_length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log2_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.period() / self.n as f64
    }

    /// `h^dim`, the quadrature weight of one grid point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.period()
    }

    /// Same torus with twice the points per axis.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        if self.dim == 1 {
            mi[0]
        } else {
            mi[0] * self.n + mi[1]
        }
    }

    /// Coordinates of a grid point (unused axes are 0).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let mi = self.multi_index(idx);
        if self.dim == 1 {
            [mi[0] as f64 * h, 0.0]
        } else {
            [mi[0] as f64 * h, mi[1] as f64 * h]
        }
    }

    /// Signed wavenumber of FFT bin `i` on one axis; the Nyquist bin maps to `-N/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// FFT bin of a signed wavenumber.
    pub fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let s = std::f64::consts::PI / self.half_length;
        let mi = self.multi_index(idx);
        if self.dim == 1 {
            [s * self.wavenumber(mi[0]) as f64, 0.0]
        } else {
            [s * self.wavenumber(mi[0]) as f64, s * self.wavenumber(mi[1]) as f64]
        }
    }

    pub fn frequency_norm(&self, idx: usize) -> f64 {
        let xi = self.frequency(idx);
        (xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
    }

    /// Minimal-image representative of a coordinate difference, in `[-L, L)`.
    pub fn wrap(&self, d: f64) -> f64 {
        let p = self.period();
        let mut r = d.rem_euclid(p);
        if r >= self.half_length {
            r -= p;
        }
        r
    }

    /// Periodic Euclidean distance.
    pub fn distance(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let d0 = self.wrap(x[0] - y[0]);
        let d1 = if self.dim == 2 { self.wrap(x[1] - y[1]) } else { 0.0 };
        (d0 * d0 + d1 * d1).sqrt()
    }

    /// Minimal-image displacement between two grid points, in units of `h`.
    pub fn index_offset(&self, a: usize, b: usize) -> [i64; 2] {
        let n = self.n as i64;
        let wrap = |d: i64| {
            let r = d.rem_euclid(n);
            if r >= n / 2 {
                r - n
            } else {
                r
            }
        };
        let ma = self.multi_index(a);
        let mb = self.multi_index(b);
        let d0 = wrap(ma[0] as i64 - mb[0] as i64);
        let d1 = if self.dim == 2 { wrap(ma[1] as i64 - mb[1] as i64) } else { 0 };
        [d0, d1]
    }

    /// Flat index of the point `a - b` (taken modulo the grid).
    pub fn difference_index(&self, a: usize, b: usize) -> usize {
        let n = self.n;
        let ma = self.multi_index(a);
        let mb = self.multi_index(b);
        let d0 = (ma[0] + n - mb[0]) % n;
        let d1 = if self.dim == 2 { (ma[1] + n - mb[1]) % n } else { 0 };
        self.flat_index([d0, d1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn constant(grid: Grid, c: Complex64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_grid(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_grid(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Quadrature `L²` norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// `∫ f·conj(g)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        same_grid(self, other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Unnormalised DFT, `F[k] = Σ_j f_j e^{-2πi jk/N}` per axis.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        fft_nd(&self.grid, &mut data, false);
        data
    }

    /// Inverse of [`SampledField::spectrum`].
    pub fn from_spectrum(grid: Grid, mut spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::InvalidGrid("spectrum length".into()));
        }
        fft_nd(&grid, &mut spectrum, true);
        let s = 1.0 / grid.len() as f64;
        for v in spectrum.iter_mut() {
            *v *= s;
        }
        Ok(Self { grid, values: spectrum })
    }

    /// Applies the Fourier multiplier `m(ξ)` exactly on the grid frequencies.
    pub fn apply_multiplier(&self, m: impl Fn([f64; 2]) -> Complex64) -> Self {
        let mut spec = self.spectrum();
        for (i, v) in spec.iter_mut().enumerate() {
            *v *= m(self.grid.frequency(i));
        }
        Self::from_spectrum(self.grid, spec).expect("length preserved")
    }

    /// Radial real multiplier `m(|ξ|)`.
    pub fn apply_radial(&self, m: impl Fn(f64) -> f64) -> Self {
        let mut spec = self.spectrum();
        for (i, v) in spec.iter_mut().enumerate() {
            *v *= m(self.grid.frequency_norm(i));
        }
        Self::from_spectrum(self.grid, spec).expect("length preserved")
    }

    /// Largest spectral modulus at frequencies with `|ξ| > band`, relative to the largest overall.
    pub fn out_of_band(&self, band: f64) -> f64 {
        let spec = self.spectrum();
        let mut top = 0.0f64;
        let mut out = 0.0f64;
        for (i, v) in spec.iter().enumerate() {
            let a = v.norm();
            top = top.max(a);
            if self.grid.frequency_norm(i) > band * (1.0 + 1e-12) {
                out = out.max(a);
            }
        }
        if top == 0.0 {
            0.0
        } else {
            out / top
        }
    }
}

fn same_grid(a: &SampledField, b: &SampledField) -> Result<()> {
    if a.grid != b.grid {
        Err(Error::GridMismatch)
    } else {
        Ok(())
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_nd(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        // rows are contiguous in both dimensions
        fft.process(data);
        if grid.dim() == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                fft.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
    });
}

/// Midpoint rule: `h^dim · Σ values`.
pub fn integrate(f: &SampledField) -> Complex64 {
    f.values.iter().sum::<Complex64>() * f.grid.cell_volume()
}

/// Circular convolution `∫ f(y) k(x−y) dy` via the DFT.
pub fn convolve(f: &SampledField, kernel: &SampledField) -> Result<SampledField> {
    same_grid(f, kernel)?;
    let a = f.spectrum();
    let b = kernel.spectrum();
    let w = f.grid.cell_volume();
    let prod = a.iter().zip(&b).map(|(x, y)| x * y * w).collect();
    SampledField::from_spectrum(f.grid, prod)
}

/// A dyadic cube `2^{-ν}(k + [0,1)^dim)`; unused axes of `k` are 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub k: [i64; 2],
}

impl DyadicCube {
    pub fn new(level: u32, k: [i64; 2]) -> Self {
        Self { level, k }
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn volume(&self, dim: usize) -> f64 {
        self.side().powi(dim as i32)
    }

    /// Lower-left corner `x_Q = 2^{-ν} k`.
    pub fn corner(&self) -> [f64; 2] {
        let s = self.side();
        [s * self.k[0] as f64, s * self.k[1] as f64]
    }

    pub fn center(&self, dim: usize) -> [f64; 2] {
        let s = self.side();
        let c = self.corner();
        if dim == 1 {
            [c[0] + 0.5 * s, 0.0]
        } else {
            [c[0] + 0.5 * s, c[1] + 0.5 * s]
        }
    }
}

/// How level `ν` sits on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelLayout {
    pub cubes_per_axis: usize,
    pub points_per_side: usize,
}

pub fn level_layout(grid: &Grid, level: u32) -> Result<LevelLayout> {
    let c = grid.period() * (level as f64).exp2();
    let cr = c.round();
    if cr < 1.0 || (c - cr).abs() > 1e-9 * c {
        return Err(Error::LevelTooDeep {
            level,
            reason: format!("2L·2^ν = {c} is not an integer"),
        });
    }
    let cubes = cr as usize;
    if cubes > grid.n() || grid.n() % cubes != 0 {
        return Err(Error::LevelTooDeep {
            level,
            reason: format!("side 2^-{level} is not a multiple of h = {}", grid.spacing()),
        });
    }
    Ok(LevelLayout { cubes_per_axis: cubes, points_per_side: grid.n() / cubes })
}

/// The level-`ν` cubes tiling the fundamental domain, in row-major order of `k`.
pub fn cubes_at_level(grid: &Grid, level: u32) -> Result<Vec<DyadicCube>> {
    let lay = level_layout(grid, level)?;
    let c = lay.cubes_per_axis as i64;
    let mut out = Vec::with_capacity(lay.cubes_per_axis.pow(grid.dim() as u32));
    if grid.dim() == 1 {
        for k in 0..c {
            out.push(DyadicCube::new(level, [k, 0]));
        }
    } else {
        for k0 in 0..c {
            for k1 in 0..c {
                out.push(DyadicCube::new(level, [k0, k1]));
            }
        }
    }
    Ok(out)
}

/// Grid point indices covered by a cube (half-open).
pub fn cube_points(grid: &Grid, cube: &DyadicCube) -> Result<Vec<usize>> {
    let lay = level_layout(grid, cube.level)?;
    let p = lay.points_per_side;
    let c = lay.cubes_per_axis as i64;
    let base0 = cube.k[0].rem_euclid(c) as usize * p;
    if grid.dim() == 1 {
        return Ok((base0..base0 + p).collect());
    }
    let base1 = cube.k[1].rem_euclid(c) as usize * p;
    let mut out = Vec::with_capacity(p * p);
    for i in base0..base0 + p {
        for j in base1..base1 + p {
            out.push(grid.flat_index([i, j]));
        }
    }
    Ok(out)
}

/// Flat index of the grid point at a cube's corner.
pub fn corner_index(grid: &Grid, cube: &DyadicCube) -> Result<usize> {
    let lay = level_layout(grid, cube.level)?;
    let c = lay.cubes_per_axis as i64;
    let p = lay.points_per_side;
    let i0 = cube.k[0].rem_euclid(c) as usize * p;
    let i1 = if grid.dim() == 2 { cube.k[1].rem_euclid(c) as usize * p } else { 0 };
    Ok(grid.flat_index([i0, i1]))
}

/// The level-`ν` cube containing a grid point.
pub fn cube_of_point(grid: &Grid, level: u32, idx: usize) -> Result<DyadicCube> {
    let lay = level_layout(grid, level)?;
    let mi = grid.multi_index(idx);
    let p = lay.points_per_side;
    let k1 = if grid.dim() == 2 { (mi[1] / p) as i64 } else { 0 };
    Ok(DyadicCube::new(level, [(mi[0] / p) as i64, k1]))
}

/// Coefficients `{s_Q}` on dyadic cubes of levels `0..=nu_max`; absent keys are 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoeffSeq {
    pub nu_max: u32,
    pub entries: BTreeMap<DyadicCube, Complex64>,
}

impl CoeffSeq {
    pub fn new(nu_max: u32) -> Self {
        Self { nu_max, entries: BTreeMap::new() }
    }

    pub fn get(&self, q: &DyadicCube) -> Complex64 {
        self.entries.get(q).copied().unwrap_or_default()
    }

    pub fn insert(&mut self, q: DyadicCube, v: Complex64) {
        self.entries.insert(q, v);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn level(&self, level: u32) -> impl Iterator<Item = (&DyadicCube, &Complex64)> {
        self.entries.range(DyadicCube::new(level, [i64::MIN, i64::MIN])..=DyadicCube::new(level, [i64::MAX, i64::MAX]))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            nu_max: self.nu_max,
            entries: self.entries.iter().map(|(q, v)| (*q, v * c)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.norm()))
    }
}

const MAGIC: &[u8; 4] = b"VXSF";

/// Writes the binary field format: 16-byte header (`VXSF`, u8 dim, u8 log2 N,
/// two zero bytes, f64 L, little endian) then `N^dim` complex128 values.
pub fn write_field<W: Write>(mut w: W, f: &SampledField) -> Result<()> {
    let g = f.grid;
    let mut header = [0u8; 16];
    header[..4].copy_from_slice(MAGIC);
    header[4] = g.dim() as u8;
    header[5] = g.log2_n() as u8;
    header[8..].copy_from_slice(&g.half_length().to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(16 * f.values.len());
    for v in &f.values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SampledField> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let dim = header[4] as usize;
    let log2n = header[5] as u32;
    if log2n >= 31 {
        return Err(Error::Format(format!("log2 N = {log2n} out of range")));
    }
    let l = f64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    let grid = Grid::new(dim, 1usize << log2n, l)?;
    let mut buf = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    SampledField::new(grid, values)
}

pub fn save_field(path: impl AsRef<Path>, f: &SampledField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field(std::io::BufWriter::new(file), f)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<SampledField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}
