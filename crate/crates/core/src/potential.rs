//! The fundamental solution `Γ` and the solution operator `G: F ↦ v` with
//! `−Δv = ∂i∂jF_ij − (spherical mean of ∂i∂jF_ij)`.
//!
//! [`GreenSolver`] evaluates `w = ∂i∂j N[F_ij]` (with `N = Γ⋆`) one spherical harmonic at a
//! time: for `f(r)Y(θ)` the Newtonian potential is `r²(Ĵi + Ĵo)/(2l+1)·Y` with one-sided
//! radial moments
//!
//! ```text
//! Ĵi(r) = r^{−l−3} ∫_0^r s^{l+2} f(s) ds,      Ĵo(r) = r^{l−2} ∫_r^∞ s^{1−l} f(s) ds,
//! ```
//!
//! and its Hessian follows in closed form from the gradient and Hessian of the solid harmonic.
//! `G(F) = w − w̄` then agrees with the three-term kernel representation (checked by
//! [`three_term_mean`]). A direct singular-integral evaluation, [`newtonian_hessian`], is kept
//! as an independent reference.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::linalg::{self, Sym3, PAIRS, PAIR_MULT};
use crate::meshmeans::{
    lm_pairs, mp_profile, AnnularField, Anchor, CellRule, FieldInterpolator, MatrixField, MeshRef, RadialProfile,
    SphereRule,
};
use crate::quad;
use crate::scalar::{norm3, Cx, Point, Real};

/// `|∂B₁| = 2π^{n/2}/Γ(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    crate::meshmeans::sphere_area(n)
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Unsupported(format!("the fundamental solution is implemented for n >= 3, got n = {n}")));
    }
    Ok(())
}

/// `Γ(r) = r^{2−n}/((n−2)|∂B₁|)`, so that `−ΔΓ = δ`.
pub fn gamma<T: Real>(r: T, n: usize) -> Result<T> {
    check_dim(n)?;
    if !(r > T::zero()) {
        return domain(format!("fundamental solution evaluated at r = {r}"));
    }
    let a = T::lit(sphere_area(n));
    Ok(r.powi(2 - n as i32) / (T::from_usize_lossy(n - 2) * a))
}

/// `Γ′(r) = −r^{1−n}/|∂B₁|`.
pub fn gamma_prime<T: Real>(r: T, n: usize) -> Result<T> {
    check_dim(n)?;
    if !(r > T::zero()) {
        return domain(format!("fundamental solution derivative evaluated at r = {r}"));
    }
    Ok(-r.powi(1 - n as i32) / T::lit(sphere_area(n)))
}

/// Spherical mean of `Γ(|x − ·|)` over the sphere of radius `ry`, i.e. `Γ(max{|x|, ry})`.
pub fn sphere_mean_gamma<T: Real>(rx: T, ry: T, n: usize) -> Result<T> {
    if rx < T::zero() || ry < T::zero() {
        return domain("radii must be nonnegative");
    }
    if rx == T::zero() && ry == T::zero() {
        return domain("spherical mean of the fundamental solution needs a nonzero radius");
    }
    gamma(rx.max(ry), n)
}

/// Quadrature of the spherical mean of `Γ(|x − ry·θ|)` with the given rule (n = 3).
pub fn sphere_mean_gamma_quadrature<T: Real>(x: &Point<T>, ry: T, rule: &SphereRule<T>) -> Result<T> {
    let mut acc = T::zero();
    for (th, &w) in rule.nodes().iter().zip(rule.weights()) {
        let d = [x[0] - ry * th[0], x[1] - ry * th[1], x[2] - ry * th[2]];
        acc += gamma(norm3(&d), 3)? * w;
    }
    Ok(acc / rule.area())
}

/// `∂i∂jΓ(y) = (nθiθj − δij)|y|^{−n}/|∂B₁|` for `n = 3`.
pub fn gamma_hessian<T: Real>(y: &Point<T>) -> Result<[[T; 3]; 3]> {
    let r = norm3(y);
    if !(r > T::zero()) {
        return domain("Hessian of the fundamental solution is singular at the origin");
    }
    let c = r.powi(-3) / T::lit(sphere_area(3));
    let th = [y[0] / r, y[1] / r, y[2] / r];
    let mut h = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { T::one() } else { T::zero() };
            h[i][j] = (T::lit(3.0) * th[i] * th[j] - d) * c;
        }
    }
    Ok(h)
}

/// Matrix-valued data that can be sampled anywhere.
pub trait MatrixSource<T: Real>: Sync {
    fn eval(&self, y: &Point<T>) -> Sym3<T>;
    /// Radius of a ball containing the support.
    fn support_radius(&self) -> T;
}

/// Closure-backed [`MatrixSource`].
pub struct FnSource<T: Real, F: Fn(&Point<T>) -> Sym3<T> + Sync> {
    pub f: F,
    pub radius: T,
}

impl<T: Real, F: Fn(&Point<T>) -> Sym3<T> + Sync> MatrixSource<T> for FnSource<T, F> {
    fn eval(&self, y: &Point<T>) -> Sym3<T> {
        (self.f)(y)
    }
    fn support_radius(&self) -> T {
        self.radius
    }
}

/// Samples a [`MatrixField`] off the mesh by interpolation (zero outside the grid span).
pub struct MatrixFieldSource<T: Real> {
    parts: Vec<FieldInterpolator<T>>,
    r_min: T,
    r_max: T,
    support: T,
}

impl<T: Real> MatrixFieldSource<T> {
    pub fn new(f: &MatrixField<T>, support: T) -> Self {
        let parts = (0..6).map(|c| FieldInterpolator::new(&f.component(c))).collect();
        let g = &f.mesh().radial;
        Self { parts, r_min: g.r_min(), r_max: g.r_max(), support }
    }
}

impl<T: Real> MatrixSource<T> for MatrixFieldSource<T> {
    fn eval(&self, y: &Point<T>) -> Sym3<T> {
        let r = norm3(y);
        let z = Complex::new(T::zero(), T::zero());
        if r < self.r_min || r > self.r_max || r > self.support {
            return [z; 6];
        }
        let mut scratch = Vec::new();
        let mut out = [z; 6];
        for c in 0..6 {
            out[c] = self.parts[c].eval(y, &mut scratch).unwrap_or(z);
        }
        out
    }
    fn support_radius(&self) -> T {
        self.support
    }
}

/// Accuracy controls for [`newtonian_hessian`].
#[derive(Clone, Copy, Debug)]
pub struct DirectOptions {
    pub sphere_degree: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self { sphere_degree: 48, abs_tol: 1e-10, rel_tol: 1e-9 }
    }
}

/// `p.v.∫ ∂i∂jΓ(x−y)F_ij(y) dy − (1/n)F_ii(x)` by direct quadrature in polar coordinates about `x`.
///
/// The kernel has zero angular mean, so `F(x)` is subtracted on every sphere around `x`; the
/// radial integral is adaptive and split where the spheres meet the origin or the support boundary.
pub fn newtonian_hessian<T: Real, S: MatrixSource<T>>(f: &S, x: &Point<T>, opts: DirectOptions) -> Result<Cx<T>> {
    let rx = norm3(x);
    let support = f.support_radius();
    if !(support > T::zero()) {
        return domain("matrix source must have positive support radius");
    }
    let rule = SphereRule::<T>::gauss_product(opts.sphere_degree);
    let fx = f.eval(x);
    let area = T::lit(sphere_area(3));
    let kernel: Vec<Sym3<T>> = rule
        .nodes()
        .iter()
        .map(|w| {
            let mut k = [Complex::new(T::zero(), T::zero()); 6];
            for (c, &(i, j)) in PAIRS.iter().enumerate() {
                let d = if i == j { T::one() } else { T::zero() };
                k[c] = Complex::new((T::lit(3.0) * w[i] * w[j] - d) / area * T::lit(PAIR_MULT[c]), T::zero());
            }
            k
        })
        .collect();
    let angular = |rho: T| -> Cx<T> {
        if rho <= T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        for ((w, &wt), k) in rule.nodes().iter().zip(rule.weights()).zip(&kernel) {
            let y = [x[0] + rho * w[0], x[1] + rho * w[1], x[2] + rho * w[2]];
            let fy = f.eval(&y);
            let mut s = Complex::new(T::zero(), T::zero());
            for c in 0..6 {
                s += (fy[c] - fx[c]) * k[c];
            }
            acc += s * wt;
        }
        acc / rho
    };
    let top = rx + support;
    let mut cuts = vec![T::zero(), top];
    for c in [rx, (support - rx).abs()] {
        if c > T::zero() && c < top {
            cuts.push(c);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    cuts.dedup();
    let mut total = Complex::new(T::zero(), T::zero());
    for w in cuts.windows(2) {
        total += quad::integrate(&angular, w[0], w[1], T::lit(opts.abs_tol), T::lit(opts.rel_tol));
    }
    // beyond the support the sphere integral of the constant F(x) vanishes exactly
    Ok(total - linalg::trace_sym(&fx) / T::lit(3.0))
}

/// Precomputed spectral solver for the operator `G` on a mesh.
pub struct GreenSolver<T: Real> {
    mesh: MeshRef<T>,
    l_of: Vec<usize>,
    inward: Vec<CellRule<T>>,
    outward: Vec<CellRule<T>>,
    decay_in: Vec<Vec<T>>,
    decay_out: Vec<Vec<T>>,
    /// `θiθjY`, `(δij − θiθj)Y + θi∂jR + θj∂iR` and `∂i∂jR` at the sphere nodes, indexed `[(c·nh + h)·nq + q]`.
    tab_a: Vec<T>,
    tab_b: Vec<T>,
    tab_h: Vec<T>,
}

/// Diagnostic output of [`GreenSolver::prop1_bound_check`].
#[derive(Clone, Debug, Serialize)]
pub struct Prop1Report {
    pub rows: Vec<Prop1Row>,
    pub max_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop1Row {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl<T: Real> GreenSolver<T> {
    pub fn new(mesh: &MeshRef<T>) -> Self {
        let l_max = mesh.spec.l_max;
        let g = &mesh.radial;
        let u = g.log_nodes();
        let mut inward = Vec::new();
        let mut outward = Vec::new();
        let mut decay_in = Vec::new();
        let mut decay_out = Vec::new();
        for l in 0..=l_max {
            let a_in = T::from_usize_lossy(l + 3);
            let a_out = T::lit(2.0) - T::from_usize_lossy(l);
            inward.push(g.cell_rule(a_in, Anchor::Right));
            outward.push(g.cell_rule(a_out, Anchor::Left));
            decay_in.push((0..g.cells()).map(|k| (-a_in * (u[k + 1] - u[k])).exp()).collect());
            decay_out.push((0..g.cells()).map(|k| (a_out * (u[k + 1] - u[k])).exp()).collect());
        }
        let pairs = lm_pairs(l_max);
        let l_of: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let nh = pairs.len();
        let nq = mesh.nq();
        let tabs = &mesh.harmonics;
        let nodes = mesh.sphere.nodes();
        let mut tab_a = vec![T::zero(); 6 * nh * nq];
        let mut tab_b = vec![T::zero(); 6 * nh * nq];
        let mut tab_h = vec![T::zero(); 6 * nh * nq];
        for (c, &(i, j)) in PAIRS.iter().enumerate() {
            let d = if i == j { T::one() } else { T::zero() };
            for h in 0..nh {
                for q in 0..nq {
                    let th = nodes[q];
                    let y = tabs.y[h * nq + q];
                    let gr = tabs.grad[h * nq + q];
                    let idx = (c * nh + h) * nq + q;
                    tab_a[idx] = th[i] * th[j] * y;
                    tab_b[idx] = (d - th[i] * th[j]) * y + th[i] * gr[j] + th[j] * gr[i];
                    tab_h[idx] = tabs.hess[h * nq + q][c];
                }
            }
        }
        Self { mesh: mesh.clone(), l_of, inward, outward, decay_in, decay_out, tab_a, tab_b, tab_h }
    }

    pub fn mesh(&self) -> &MeshRef<T> {
        &self.mesh
    }

    /// `w = Σ_ij ∂i∂j N[F_ij]` at every mesh node.
    pub fn newtonian_hessian_field(&self, f: &MatrixField<T>) -> AnnularField<T> {
        let mesh = &self.mesh;
        let nr = mesh.nr();
        let nq = mesh.nq();
        let nh = self.l_of.len();
        let zero = Complex::new(T::zero(), T::zero());

        // harmonic coefficients f[c][h][k]
        let mut coef = vec![zero; 6 * nh * nr];
        {
            let per_node: Vec<Vec<Cx<T>>> = (0..nr)
                .into_par_iter()
                .map(|k| {
                    let mut out = vec![zero; 6 * nh];
                    let mut vals = vec![zero; nq];
                    for c in 0..6 {
                        for q in 0..nq {
                            vals[q] = f.get(k, q)[c];
                        }
                        mesh.harmonics.analyze(&vals, &mut out[c * nh..(c + 1) * nh]);
                    }
                    out
                })
                .collect();
            for (k, row) in per_node.iter().enumerate() {
                for ch in 0..6 * nh {
                    coef[ch * nr + k] = row[ch];
                }
            }
        }

        // radial sweeps per (component, harmonic)
        let cells = mesh.radial.cells();
        let sweeps: Vec<(Vec<Cx<T>>, Vec<Cx<T>>)> = (0..6 * nh)
            .into_par_iter()
            .map(|ch| {
                let l = self.l_of[ch % nh];
                let fk = &coef[ch * nr..(ch + 1) * nr];
                let mut ji = vec![zero; nr];
                let mut jo = vec![zero; nr];
                if fk.iter().all(|v| v.re == T::zero() && v.im == T::zero()) {
                    return (ji, jo);
                }
                ji[0] = fk[0] / T::from_usize_lossy(l + 3);
                let (rin, din) = (&self.inward[l], &self.decay_in[l]);
                for k in 0..cells {
                    ji[k + 1] = ji[k] * din[k] + rin.cell(k, fk);
                }
                let (rout, dout) = (&self.outward[l], &self.decay_out[l]);
                for k in (0..cells).rev() {
                    jo[k] = jo[k + 1] * dout[k] + rout.cell(k, fk);
                }
                (ji, jo)
            })
            .collect();

        // synthesis of the closed-form Hessian
        let mut values = vec![zero; nr * nq];
        values.par_chunks_mut(nq).enumerate().for_each(|(k, out)| {
            for c in 0..6 {
                let mult = T::lit(PAIR_MULT[c]);
                for h in 0..nh {
                    let ch = c * nh + h;
                    let (ji, jo) = (&sweeps[ch].0, &sweeps[ch].1);
                    if ji.is_empty() {
                        continue;
                    }
                    let (i_k, o_k) = (ji[k], jo[k]);
                    let fv = coef[ch * nr + k];
                    if i_k == zero && o_k == zero && fv == zero {
                        continue;
                    }
                    let l = self.l_of[h];
                    let ca = (i_k * T::from_usize_lossy(2 * (l + 1)) - fv) * mult;
                    let cb = -i_k * mult;
                    let chh = (i_k + o_k) * (mult / T::from_usize_lossy(2 * l + 1));
                    let base = ch * nq;
                    let (ta, tb, th) = (&self.tab_a[base..base + nq], &self.tab_b[base..base + nq], &self.tab_h[base..base + nq]);
                    for q in 0..nq {
                        out[q] += ca * ta[q] + cb * tb[q] + chh * th[q];
                    }
                }
            }
        });
        AnnularField::from_values(mesh, values).expect("shape matches mesh")
    }

    /// `G(F) = w − w̄`, the zero-mean solution of `−Δv = ∂i∂jF_ij − mean`.
    pub fn apply(&self, f: &MatrixField<T>) -> AnnularField<T> {
        self.newtonian_hessian_field(f).remove_mean()
    }

    /// `M_p(v, r)` against the bracket `r∫_r^∞ M_p(F,ρ)ρ^{−2}dρ + r^{−n}∫_0^r M_p(F,ρ)ρ^{n−1}dρ`.
    pub fn prop1_bound_check(&self, f: &MatrixField<T>, v: &AnnularField<T>, r_set: &[T], p: T) -> Result<Prop1Report> {
        let mesh = &self.mesh;
        let g = &mesh.radial;
        let fnorm = AnnularField::from_values(
            mesh,
            f.values().iter().map(|m| Complex::new(linalg::spectral_norm_sym(m), T::zero())).collect(),
        )?;
        let mf = mp_profile(&fnorm, p);
        let mv = mp_profile(v, p);
        // trapezoid in log r over nodes where the annulus mean exists
        let idx: Vec<usize> = (0..g.len()).filter(|&i| mf[i].is_some() && i != g.inner_break()).collect();
        let val = |i: usize| mf[i].unwrap_or(T::zero());
        let mut rows = Vec::new();
        let mut max_ratio = T::zero();
        for &r in r_set {
            let (j, _) = g.snap(r)?;
            let i0 = g.start_index(j).ok_or_else(|| Error::Domain(format!("radius {r} outside grid")))?;
            let lhs = mv.get(i0).copied().flatten().ok_or_else(|| Error::Domain(format!("no annulus mean at {r}")))?;
            let rr = g.r(i0);
            let (mut outer, mut inner) = (T::zero(), T::zero());
            for w in idx.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (ra, rb) = (g.r(a), g.r(b));
                let du = rb.ln() - ra.ln();
                if ra >= rr {
                    outer += (val(a) / ra + val(b) / rb) * du / T::lit(2.0);
                } else if rb <= rr {
                    inner += (val(a) * ra.powi(3) + val(b) * rb.powi(3)) * du / T::lit(2.0);
                }
            }
            let rhs = rr * outer + rr.powi(-3) * inner;
            let ratio = if lhs == T::zero() { T::zero() } else if rhs == T::zero() { T::infinity() } else { lhs / rhs };
            max_ratio = max_ratio.max(ratio);
            rows.push(Prop1Row { r: rr.to_f64_lossy(), lhs: lhs.to_f64_lossy(), rhs: rhs.to_f64_lossy(), ratio: ratio.to_f64_lossy() });
        }
        Ok(Prop1Report { rows, max_ratio: max_ratio.to_f64_lossy(), pass: max_ratio.is_finite() })
    }
}

/// `∫_r^∞ mean(nθθ:F − tr F) dρ/ρ − mean(θθ:F)(r)`, which the spherical mean of
/// `w = ∂i∂j N[F]` must reproduce for the three-term representation of `G` to hold.
pub fn three_term_mean<T: Real>(f: &MatrixField<T>) -> RadialProfile<T> {
    let mesh = f.mesh();
    let nodes = mesh.sphere.nodes();
    let nq = mesh.nq();
    let mut kern = Vec::with_capacity(mesh.nr() * nq);
    let mut qf = Vec::with_capacity(mesh.nr() * nq);
    for k in 0..mesh.nr() {
        for q in 0..nq {
            let m = f.get(k, q);
            let th = &nodes[q];
            let quad = linalg::quad_form_sym(m, th);
            kern.push(quad * T::lit(3.0) - linalg::trace_sym(m));
            qf.push(quad);
        }
    }
    let kern = AnnularField::from_values(mesh, kern).expect("shape").sphere_means();
    let qf = AnnularField::from_values(mesh, qf).expect("shape").sphere_means();
    let tail = kern.tail_log_integral();
    tail.zip_map(&qf, |a, b| a - b)
}

/// Shared handle so that operator contexts can own a solver cheaply.
pub type GreenRef<T> = Arc<GreenSolver<T>>;
