use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Anchor, CellRule, RadialGrid};
use super::harmonics::{eval_harmonics, HarmonicTables};
use super::sphere::SphereRule;
use crate::error::{Error, Result};
use crate::linalg::Sym3;
use crate::scalar::{norm3, Cx, Point, Real};

/// Resolution of a (log-radial × sphere) product mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes_per_decade: usize,
    /// Highest spherical-harmonic degree carried by the solver; the sphere rule has degree `2·l_max + 4`.
    pub l_max: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { r_min: 1e-4, r_max: 20.0, nodes_per_decade: 60, l_max: 8 }
    }
}

impl MeshSpec {
    /// Doubles the radial density and the harmonic degree `k` times.
    pub fn refined(&self, k: u32) -> Self {
        let f = 1usize << k;
        Self { nodes_per_decade: self.nodes_per_decade * f, l_max: self.l_max * f, ..*self }
    }
}

/// Product mesh shared by all fields of a computation.
#[derive(Debug)]
pub struct Mesh<T: Real> {
    pub spec: MeshSpec,
    pub radial: RadialGrid<T>,
    pub sphere: SphereRule<T>,
    pub harmonics: HarmonicTables<T>,
    vol_rule: CellRule<T>,
    log_rule: CellRule<T>,
}

pub type MeshRef<T> = Arc<Mesh<T>>;

impl<T: Real> Mesh<T> {
    pub fn new(spec: MeshSpec) -> Result<MeshRef<T>> {
        if spec.l_max == 0 {
            return Err(Error::Validation("l_max must be at least 1".into()));
        }
        let radial = RadialGrid::new(T::lit(spec.r_min), T::lit(spec.r_max), spec.nodes_per_decade)?;
        let sphere = SphereRule::gauss_product(2 * spec.l_max + 4);
        let harmonics = HarmonicTables::new(spec.l_max, &sphere);
        let vol_rule = radial.cell_rule(T::lit(3.0), Anchor::Origin);
        let log_rule = radial.cell_rule(T::zero(), Anchor::Origin);
        Ok(Arc::new(Self { spec, radial, sphere, harmonics, vol_rule, log_rule }))
    }

    pub fn nr(&self) -> usize {
        self.radial.len()
    }

    pub fn nq(&self) -> usize {
        self.sphere.len()
    }

    pub fn dim(&self) -> usize {
        3
    }

    pub fn point(&self, i: usize, q: usize) -> Point<T> {
        let r = self.radial.r(i);
        let th = self.sphere.nodes()[q];
        [th[0] * r, th[1] * r, th[2] * r]
    }

    /// Cell rule for `∫ f ρ² dρ`.
    pub fn volume_rule(&self) -> &CellRule<T> {
        &self.vol_rule
    }

    /// Cell rule for `∫ f dρ/ρ`.
    pub fn log_rule(&self) -> &CellRule<T> {
        &self.log_rule
    }

    pub fn describe(&self) -> String {
        let (nt, np) = self.sphere.shape();
        format!("{};sphere={}x{};l_max={}", self.radial.describe(), nt, np, self.spec.l_max)
    }
}

#[inline]
fn czero<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

/// Complex samples on the product mesh, row-major in (radial node, sphere node).
#[derive(Clone, Debug)]
pub struct AnnularField<T: Real> {
    mesh: MeshRef<T>,
    values: Vec<Cx<T>>,
}

impl<T: Real> AnnularField<T> {
    pub fn zeros(mesh: &MeshRef<T>) -> Self {
        Self { mesh: mesh.clone(), values: vec![czero(); mesh.nr() * mesh.nq()] }
    }

    pub fn constant(mesh: &MeshRef<T>, c: Cx<T>) -> Self {
        Self { mesh: mesh.clone(), values: vec![c; mesh.nr() * mesh.nq()] }
    }

    /// Samples `f(i, r, θ)` at every node (`i` resolves the breakpoint side).
    pub fn from_fn<F>(mesh: &MeshRef<T>, f: F) -> Self
    where
        F: Fn(usize, T, &Point<T>) -> Cx<T> + Sync,
    {
        let nq = mesh.nq();
        let mut values = vec![czero(); mesh.nr() * nq];
        values.par_chunks_mut(nq).enumerate().for_each(|(i, row)| {
            let r = mesh.radial.r(i);
            for (q, v) in row.iter_mut().enumerate() {
                *v = f(i, r, &mesh.sphere.nodes()[q]);
            }
        });
        Self { mesh: mesh.clone(), values }
    }

    pub fn from_values(mesh: &MeshRef<T>, values: Vec<Cx<T>>) -> Result<Self> {
        if values.len() != mesh.nr() * mesh.nq() {
            return Err(Error::Validation(format!("field has {} samples, mesh needs {}", values.len(), mesh.nr() * mesh.nq())));
        }
        Ok(Self { mesh: mesh.clone(), values })
    }

    pub fn mesh(&self) -> &MeshRef<T> {
        &self.mesh
    }

    pub fn values(&self) -> &[Cx<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Cx<T>] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[Cx<T>] {
        let nq = self.mesh.nq();
        &self.values[i * nq..(i + 1) * nq]
    }

    pub fn get(&self, i: usize, q: usize) -> Cx<T> {
        self.values[i * self.mesh.nq() + q]
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: Cx<T>, other: &Self) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * s).collect() }
    }

    /// Pointwise product with a radial profile.
    /// Pointwise product.
    pub fn zip_mul(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Self { mesh: self.mesh.clone(), values }
    }

    pub fn mul_profile(&self, p: &RadialProfile<T>) -> Self {
        let nq = self.mesh.nq();
        let values = self.values.iter().enumerate().map(|(k, v)| v * p.values[k / nq]).collect();
        Self { mesh: self.mesh.clone(), values }
    }

    pub fn map<F: Fn(Cx<T>) -> Cx<T>>(&self, f: F) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Spherical mean at every radial node.
    pub fn sphere_means(&self) -> RadialProfile<T> {
        let nq = self.mesh.nq();
        let w = self.mesh.sphere.weights();
        let area = self.mesh.sphere.area();
        let values = (0..self.mesh.nr())
            .map(|i| {
                let row = &self.values[i * nq..(i + 1) * nq];
                let mut acc = czero();
                for q in 0..nq {
                    acc += row[q] * w[q];
                }
                acc / area
            })
            .collect();
        RadialProfile { mesh: self.mesh.clone(), values }
    }

    /// The field minus its spherical mean on each sphere.
    pub fn remove_mean(&self) -> Self {
        let m = self.sphere_means();
        let nq = self.mesh.nq();
        let values = self.values.iter().enumerate().map(|(k, v)| v - m.values[k / nq]).collect();
        Self { mesh: self.mesh.clone(), values }
    }
}

/// Complex samples on the radial nodes of a mesh.
#[derive(Clone, Debug)]
pub struct RadialProfile<T: Real> {
    mesh: MeshRef<T>,
    values: Vec<Cx<T>>,
}

impl<T: Real> RadialProfile<T> {
    pub fn zeros(mesh: &MeshRef<T>) -> Self {
        Self { mesh: mesh.clone(), values: vec![czero(); mesh.nr()] }
    }

    pub fn constant(mesh: &MeshRef<T>, c: Cx<T>) -> Self {
        Self { mesh: mesh.clone(), values: vec![c; mesh.nr()] }
    }

    /// Samples `f(i, r)`; `i` distinguishes the two sides of the breakpoint.
    pub fn from_fn<F: Fn(usize, T) -> Cx<T>>(mesh: &MeshRef<T>, f: F) -> Self {
        let values = (0..mesh.nr()).map(|i| f(i, mesh.radial.r(i))).collect();
        Self { mesh: mesh.clone(), values }
    }

    pub fn from_values(mesh: &MeshRef<T>, values: Vec<Cx<T>>) -> Result<Self> {
        if values.len() != mesh.nr() {
            return Err(Error::Validation(format!("profile has {} samples, grid has {}", values.len(), mesh.nr())));
        }
        Ok(Self { mesh: mesh.clone(), values })
    }

    pub fn mesh(&self) -> &MeshRef<T> {
        &self.mesh
    }

    pub fn values(&self) -> &[Cx<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Cx<T>] {
        &mut self.values
    }

    pub fn at(&self, i: usize) -> Cx<T> {
        self.values[i]
    }

    pub fn map<F: Fn(Cx<T>) -> Cx<T>>(&self, f: F) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map<F: Fn(Cx<T>, Cx<T>) -> Cx<T>>(&self, other: &Self, f: F) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `∫_{r_min}^{r_i} f(ρ) dρ/ρ` at every node.
    pub fn cumulative_log_integral(&self) -> Self {
        let rule = self.mesh.log_rule();
        let mut out = vec![czero(); self.values.len()];
        for k in 0..self.mesh.radial.cells() {
            out[k + 1] = out[k] + rule.cell(k, &self.values);
        }
        Self { mesh: self.mesh.clone(), values: out }
    }

    /// `∫_{r_i}^{r_max} f(ρ) dρ/ρ` at every node.
    pub fn tail_log_integral(&self) -> Self {
        let rule = self.mesh.log_rule();
        let n = self.values.len();
        let mut out = vec![czero(); n];
        for k in (0..self.mesh.radial.cells()).rev() {
            out[k] = out[k + 1] + rule.cell(k, &self.values);
        }
        Self { mesh: self.mesh.clone(), values: out }
    }

    /// Monotone cubic (PCHIP) interpolation in `log r`, on the side of the breakpoint containing `r`.
    pub fn interpolate(&self, r: T) -> Result<Cx<T>> {
        let g = &self.mesh.radial;
        if !(r >= g.r_min() && r <= g.r_max()) {
            return Err(Error::Domain(format!("radius {r} outside the grid span [{}, {}]", g.r_min(), g.r_max())));
        }
        let (lo, hi) = if r < T::one() { (0, g.inner_break()) } else { (g.outer_break(), g.len() - 1) };
        let u = g.log_nodes();
        let x = r.ln();
        let mut k = lo;
        while k + 1 < hi && u[k + 1] <= x {
            k += 1;
        }
        let re: Vec<T> = self.values.iter().map(|v| v.re).collect();
        let im: Vec<T> = self.values.iter().map(|v| v.im).collect();
        Ok(Complex::new(pchip(&u[lo..=hi], &re[lo..=hi], k - lo, x), pchip(&u[lo..=hi], &im[lo..=hi], k - lo, x)))
    }
}

fn pchip_slope<T: Real>(x: &[T], y: &[T], i: usize) -> T {
    let n = x.len();
    let d = |k: usize| (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    if n < 2 {
        return T::zero();
    }
    if i == 0 {
        return d(0);
    }
    if i == n - 1 {
        return d(n - 2);
    }
    let (d0, d1) = (d(i - 1), d(i));
    if d0 * d1 <= T::zero() {
        return T::zero();
    }
    let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
    let w1 = T::lit(2.0) * h1 + h0;
    let w2 = h1 + T::lit(2.0) * h0;
    (w1 + w2) / (w1 / d0 + w2 / d1)
}

/// Fritsch–Carlson monotone cubic Hermite interpolation on cell `k` of `(x, y)`.
fn pchip<T: Real>(x: &[T], y: &[T], k: usize, xq: T) -> T {
    if x.len() == 1 {
        return y[0];
    }
    let k = k.min(x.len() - 2);
    let h = x[k + 1] - x[k];
    let t = (xq - x[k]) / h;
    let (m0, m1) = (pchip_slope(x, y, k), pchip_slope(x, y, k + 1));
    let t2 = t * t;
    let t3 = t2 * t;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * y[k] + h10 * h * m0 + h01 * y[k + 1] + h11 * h * m1
}

/// Packed complex symmetric matrices on the product mesh.
#[derive(Clone, Debug)]
pub struct MatrixField<T: Real> {
    mesh: MeshRef<T>,
    values: Vec<Sym3<T>>,
}

impl<T: Real> MatrixField<T> {
    pub fn zeros(mesh: &MeshRef<T>) -> Self {
        Self { mesh: mesh.clone(), values: vec![[czero(); 6]; mesh.nr() * mesh.nq()] }
    }

    pub fn from_fn<F>(mesh: &MeshRef<T>, f: F) -> Self
    where
        F: Fn(usize, T, &Point<T>) -> Sym3<T> + Sync,
    {
        let nq = mesh.nq();
        let mut values = vec![[czero(); 6]; mesh.nr() * nq];
        values.par_chunks_mut(nq).enumerate().for_each(|(i, row)| {
            let r = mesh.radial.r(i);
            for (q, v) in row.iter_mut().enumerate() {
                *v = f(i, r, &mesh.sphere.nodes()[q]);
            }
        });
        Self { mesh: mesh.clone(), values }
    }

    pub fn from_values(mesh: &MeshRef<T>, values: Vec<Sym3<T>>) -> Result<Self> {
        if values.len() != mesh.nr() * mesh.nq() {
            return Err(Error::Validation("matrix field shape does not match the mesh".into()));
        }
        Ok(Self { mesh: mesh.clone(), values })
    }

    pub fn mesh(&self) -> &MeshRef<T> {
        &self.mesh
    }

    pub fn values(&self) -> &[Sym3<T>] {
        &self.values
    }

    pub fn get(&self, i: usize, q: usize) -> &Sym3<T> {
        &self.values[i * self.mesh.nq() + q]
    }

    /// One packed component as a scalar field.
    pub fn component(&self, c: usize) -> AnnularField<T> {
        AnnularField { mesh: self.mesh.clone(), values: self.values.iter().map(|m| m[c]).collect() }
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|m| m.map(|v| v * s)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let mut o = *a;
                for c in 0..6 {
                    o[c] += b[c];
                }
                o
            })
            .collect();
        Self { mesh: self.mesh.clone(), values }
    }

    /// Pointwise product with a scalar field.
    pub fn mul_field(&self, f: &AnnularField<T>) -> Self {
        let values = self.values.iter().zip(f.values()).map(|(m, v)| m.map(|x| x * v)).collect();
        Self { mesh: self.mesh.clone(), values }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> T {
        self.values.iter().flat_map(|m| m.iter()).fold(T::zero(), |acc, v| acc.max(v.norm()))
    }
}

/// Evaluates a field at arbitrary points by harmonic synthesis on each sphere and
/// cubic interpolation in `log r` between spheres.
pub struct FieldInterpolator<T: Real> {
    mesh: MeshRef<T>,
    l_max: usize,
    nh: usize,
    coeffs: Vec<Cx<T>>,
}

impl<T: Real> FieldInterpolator<T> {
    /// Projects onto harmonics of degree `≤ l_max + 2`, the largest degree the mesh rule resolves exactly.
    pub fn new(field: &AnnularField<T>) -> Self {
        let mesh = field.mesh().clone();
        let l_max = mesh.spec.l_max + 2;
        let tab = HarmonicTables::new(l_max, &mesh.sphere);
        let nh = tab.count();
        let mut coeffs = vec![czero(); mesh.nr() * nh];
        coeffs.par_chunks_mut(nh).enumerate().for_each(|(i, out)| tab.analyze(field.row(i), out));
        Self { mesh, l_max, nh, coeffs }
    }

    pub fn eval(&self, x: &Point<T>, scratch: &mut Vec<T>) -> Result<Cx<T>> {
        let r = norm3(x);
        let (s, w) = self.mesh.radial.interp_weights(r)?;
        let th = [x[0] / r, x[1] / r, x[2] / r];
        eval_harmonics(self.l_max, &th, scratch);
        let mut acc = czero();
        for c in 0..4 {
            let row = &self.coeffs[(s + c) * self.nh..(s + c + 1) * self.nh];
            let mut part = czero();
            for h in 0..self.nh {
                part += row[h] * scratch[h];
            }
            acc += part * w[c];
        }
        Ok(acc)
    }
}
