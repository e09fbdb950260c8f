//! Asymptotic analysis of the distinguished solution: the leading term, the boundedness
//! criterion and its classification, the two-sided envelope, weak-form residuals, the
//! decomposition `u = C·Z + w` and the limit at infinity.

use num_complex::Complex;
use serde::Serialize;

use crate::coeff::CoefficientField;
use crate::error::{domain, Error, Result};
use crate::linalg;
use crate::meshmeans::{mp_profile, sphere_area, AnnularField, FieldInterpolator, MeshRef, RadialProfile, SphereRule};
use crate::modulus::ModulusOmega;
use crate::ops::resampled_tail_integral;
use crate::quad;
use crate::scalar::{cx, norm3, Cx, Point, Real};
use crate::zsolver::SolutionBundle;

fn czero<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

/// `L(r) = exp(−∫_r^1 (α₀(ρ) − nα(ρ)) dρ/ρ)` at every mesh node (`L = 1` for `r ≥ 1`).
pub fn leading_term<T: Real>(a: &CoefficientField<T>, mesh: &MeshRef<T>) -> Result<RadialProfile<T>> {
    let n = T::from_usize_lossy(mesh.dim());
    let tail = resampled_tail_integral(a, mesh, |a0, a1| a0 - a1 * n)?;
    Ok(tail.map(|v| (-v).exp()))
}

/// `∫_r^1 (α₀ − nα) dρ/ρ` at an arbitrary radius by adaptive quadrature in `log ρ`.
pub fn stabilization_log_integral<T: Real>(a: &CoefficientField<T>, r: T, rule: &SphereRule<T>) -> Result<Cx<T>> {
    if !(r > T::zero()) {
        return domain(format!("leading term needs r > 0, got {r}"));
    }
    if r >= T::one() {
        return Ok(czero());
    }
    Ok(quad::integrate(|u: T| a.stabilization_integrand(u.exp(), rule), r.ln(), T::zero(), T::lit(1e-13), T::lit(1e-12)))
}

/// [`leading_term`] at an arbitrary radius, including radii below the grid.
pub fn leading_term_at<T: Real>(a: &CoefficientField<T>, r: T, rule: &SphereRule<T>) -> Result<Cx<T>> {
    Ok((-stabilization_log_integral(a, r, rule)?).exp())
}

fn q_one_minus_alpha<T: Real>(a: &CoefficientField<T>, r: T, rule: &SphereRule<T>) -> Cx<T> {
    let (mut a0, mut a1) = (czero::<T>(), czero::<T>());
    for (th, &w) in rule.nodes().iter().zip(rule.weights()) {
        let m = a.eval_polar(r, th);
        a0 += linalg::trace(&m) * w;
        a1 += linalg::quad_form(&m, th) * w;
    }
    a0 = a0 / rule.area();
    a1 = a1 / rule.area();
    let n = cx(T::from_usize_lossy(a.dim()));
    let q = n - a0 / a1;
    q * (cx(T::one()) - a1)
}

/// `C* = lim_{r→0} E(r)/L(r) = exp(∫_0^1 Q(1 − α) dρ/ρ)`.
///
/// The part below the grid is integrated adaptively in `w = −log ρ`.
pub fn stabilization_constant<T: Real>(a: &CoefficientField<T>, mesh: &MeshRef<T>) -> Result<Cx<T>> {
    if a.is_identity() {
        return Ok(cx(T::one()));
    }
    let resolved = resampled_tail_integral(a, mesh, |a0, a1| {
        let n = cx(T::from_usize_lossy(mesh.dim()));
        (n - a0 / a1) * (cx(T::one()) - a1)
    })?
    .at(0);
    let rule = &mesh.sphere;
    let w0 = -mesh.radial.r_min().ln();
    // e^{−w} underflows past w_cap; beyond it the integrand is extended as a power of w
    let w_cap = T::lit(0.9) * (-T::min_positive_value().ln());
    let f = |w: T| q_one_minus_alpha(a, (-w).exp(), rule);
    let body = quad::integrate(|s: T| f(s.exp()) * s.exp(), w0.ln(), w_cap.ln(), T::lit(1e-13), T::lit(1e-10));
    let ratio = T::lit(0.9);
    let (f_near, f_cap) = (f(w_cap * ratio), f(w_cap));
    let noise = T::lit(64.0) * T::epsilon();
    let far = if f_cap.norm() <= noise {
        czero()
    } else {
        let decay = (f_near.norm() / f_cap.norm()).ln() / -ratio.ln();
        if !(decay > T::one()) || (f_near.re * f_cap.re) < T::zero() {
            return Err(Error::IllPosed(format!("stabilization constant integrand decays like w^-{decay}, not integrable")));
        }
        f_cap * (w_cap / (decay - T::one()))
    };
    Ok((resolved + body + far).exp())
}

/// Result of [`factorization_check`].
#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub c_star_re: f64,
    pub c_star_im: f64,
    /// `sup_r |E/(C*L) − 1| / ∫₀^r Ω²/t dt` over grid radii below 1.
    pub max_ratio: f64,
    pub max_deviation: f64,
    pub rows: Vec<(f64, f64, f64)>,
}

/// Verifies `E(r) = C*·L(r)·(1 + ζ₀(r))` with `|ζ₀(r)| ≤ C∫₀^r Ω²/t dt`.
pub fn factorization_check<T: Real>(b: &SolutionBundle<T>, modulus: &ModulusOmega<T>) -> FactorizationReport {
    let mesh = b.z.mesh();
    let g = &mesh.radial;
    let mut rows = Vec::new();
    let (mut max_ratio, mut max_dev) = (0.0f64, 0.0f64);
    for i in 0..g.inner_break() {
        let r = g.r(i);
        let dev = (b.profiles.e.at(i) / (b.c_star * b.l.at(i)) - cx(T::one())).norm().to_f64_lossy();
        let bound = modulus.dini_from_zero(r).to_f64_lossy();
        let ratio = if dev == 0.0 { 0.0 } else if bound > 0.0 { dev / bound } else { f64::INFINITY };
        max_ratio = max_ratio.max(ratio);
        max_dev = max_dev.max(dev);
        rows.push((r.to_f64_lossy(), dev, bound));
    }
    FactorizationReport {
        c_star_re: b.c_star.re.to_f64_lossy(),
        c_star_im: b.c_star.im.to_f64_lossy(),
        max_ratio,
        max_deviation: max_dev,
        rows,
    }
}

/// `sup_{r<1} M_p(ζ, r)/max(Ω(r), ∫₀^r Ω²/t dt)` over grid nodes.
pub fn zeta_bound_ratio<T: Real>(b: &SolutionBundle<T>, modulus: &ModulusOmega<T>, p: T) -> Vec<(f64, f64, f64)> {
    let mesh = b.zeta.mesh();
    let g = &mesh.radial;
    let mp = mp_profile(&b.zeta, p);
    (0..g.inner_break())
        .filter_map(|i| {
            let r = g.r(i);
            let m = mp[i]?;
            let w = modulus.at(r).max(modulus.dini_from_zero(r));
            Some((r.to_f64_lossy(), m.to_f64_lossy(), w.to_f64_lossy()))
        })
        .collect()
}

/// One of the four asymptotic behaviors at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Bounded,
    Vanishing,
    Unbounded,
    Indeterminate,
}

impl Behavior {
    pub fn as_str(&self) -> &'static str {
        match self {
            Behavior::Bounded => "bounded",
            Behavior::Vanishing => "vanishing",
            Behavior::Unbounded => "unbounded",
            Behavior::Indeterminate => "indeterminate",
        }
    }
}

/// Row of the criterion table; solution columns are filled by [`attach_solution`].
#[derive(Clone, Debug, Serialize)]
pub struct CriterionRow {
    pub r: f64,
    pub criterion: f64,
    pub l: Option<f64>,
    pub mp_z: Option<f64>,
    pub lower_env: Option<f64>,
    pub upper_env: Option<f64>,
}

/// Tabulated criterion and its classification.
#[derive(Clone, Debug, Serialize)]
pub struct BehaviorReport {
    pub rows: Vec<CriterionRow>,
    pub classification: Behavior,
    /// Fitted decay exponent `σ` of the criterion density in `log(e/r)`.
    pub sigma: f64,
    /// Extrapolated `lim_{r→0}` of the criterion when it converges.
    pub extrapolated_limit: Option<f64>,
}

/// Settings of the classification.
#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    /// Half-width of the band around `σ = 1` labeled indeterminate.
    pub sigma_band: f64,
    /// Densities below this are treated as zero.
    pub zero_density: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { sigma_band: 0.1, zero_density: 1e-12 }
    }
}

/// `|∂B₁|·∫_r^1 Re(α₀ − nα) dρ/ρ`, i.e. `∫_{B₁∖B_r} Re(a_ii − n a_ijθiθj) dy/|y|ⁿ`, at each `r`,
/// classified by the decay of its density over the smallest two decades of `r_set`.
pub fn corollary_criterion<T: Real>(
    a: &CoefficientField<T>,
    r_set: &[T],
    rule: &SphereRule<T>,
    opts: ClassifyOptions,
) -> Result<BehaviorReport> {
    if r_set.is_empty() {
        return domain("criterion needs at least one radius");
    }
    if r_set.iter().any(|&r| !(r > T::zero() && r < T::one())) {
        return domain("criterion radii must lie in (0, 1)");
    }
    let area = T::lit(sphere_area(a.dim()));
    let mut order: Vec<usize> = (0..r_set.len()).collect();
    order.sort_by(|&i, &j| r_set[j].partial_cmp(&r_set[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut values = vec![0.0f64; r_set.len()];
    let mut acc = T::zero();
    let mut upper = T::one();
    for &i in &order {
        let r = r_set[i];
        let part = quad::integrate(|u: T| a.stabilization_integrand(u.exp(), rule), r.ln(), upper.ln(), T::lit(1e-14), T::lit(1e-12));
        acc += part.re * area;
        upper = r;
        values[i] = acc.to_f64_lossy();
    }
    let rows = r_set
        .iter()
        .zip(&values)
        .map(|(&r, &c)| CriterionRow { r: r.to_f64_lossy(), criterion: c, l: None, mp_z: None, lower_env: None, upper_env: None })
        .collect();

    // density f(w) = d criterion / d w with w = log(e/r), sampled at the smallest radius and two decades up
    let r_lo = r_set.iter().copied().fold(T::one(), T::min);
    let density = |r: T| (a.stabilization_integrand(r, rule).re * area).to_f64_lossy();
    let r_hi = (r_lo * T::lit(100.0)).min(T::lit(0.25));
    let (f_lo, f_hi) = (density(r_lo), density(r_hi));
    let (w_lo, w_hi) = (1.0 - r_lo.to_f64_lossy().ln(), 1.0 - r_hi.to_f64_lossy().ln());
    let c_lo = values[order[order.len() - 1]];
    let (classification, sigma, limit) = if f_lo.abs() < opts.zero_density && f_hi.abs() < opts.zero_density {
        (Behavior::Bounded, f64::INFINITY, Some(c_lo))
    } else if f_lo.signum() != f_hi.signum() || f_lo == 0.0 || f_hi == 0.0 || w_lo <= w_hi {
        (Behavior::Indeterminate, f64::NAN, None)
    } else {
        let sigma = -(f_lo.abs() / f_hi.abs()).ln() / (w_lo / w_hi).ln();
        if sigma > 1.0 + opts.sigma_band {
            // tail of A·w^{−σ} beyond w_lo
            let tail = f_lo * w_lo / (sigma - 1.0);
            (Behavior::Bounded, sigma, Some(c_lo + tail))
        } else if sigma < 1.0 - opts.sigma_band {
            (if f_lo > 0.0 { Behavior::Vanishing } else { Behavior::Unbounded }, sigma, None)
        } else {
            (Behavior::Indeterminate, sigma, None)
        }
    };
    Ok(BehaviorReport { rows, classification, sigma, extrapolated_limit: limit })
}

/// Fills the `L`, `M_p(Z)` and envelope columns of a criterion table from a solution.
pub fn attach_solution<T: Real>(rep: &mut BehaviorReport, b: &SolutionBundle<T>, modulus: &ModulusOmega<T>, p: T, rule: &SphereRule<T>, a: &CoefficientField<T>) -> Result<()> {
    let n = a.dim();
    for row in &mut rep.rows {
        let r = T::lit(row.r);
        row.l = Some(leading_term_at(a, r, rule)?.norm().to_f64_lossy());
        row.mp_z = crate::meshmeans::p_mean(&b.z, r, p).ok().map(|v| v.to_f64_lossy());
        let (lo, hi) = envelope_pair(modulus, r, n);
        row.lower_env = Some(lo);
        row.upper_env = Some(hi);
    }
    Ok(())
}

fn envelope_pair<T: Real>(modulus: &ModulusOmega<T>, r: T, n: usize) -> (f64, f64) {
    let i = modulus.log_integral(r).to_f64_lossy();
    let c = 2.0 * (n as f64 - 1.0);
    ((-c * i).exp(), (c * i).exp())
}

/// `(exp(−2(n−1)I(r)), exp(2(n−1)I(r)))` with `I(r) = ∫_r^1 Ω ds/s`.
pub fn envelope_bounds<T: Real>(modulus: &ModulusOmega<T>, r_set: &[T], n: usize) -> Vec<(f64, f64)> {
    r_set.iter().map(|&r| envelope_pair(modulus, r, n)).collect()
}

/// Fitted envelope constants `c₁ = min M/lower` and `c₂ = max M/upper`, and the power-law form.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeFit {
    pub c1: f64,
    pub c2: f64,
    /// `γ = 2(n−1)·sup Ω`, so that `lower ≥ r^γ` and `upper ≤ r^{−γ}`.
    pub gamma: f64,
    pub holds: bool,
}

pub fn fit_envelope(mp: &[f64], bounds: &[(f64, f64)], modulus_sup: f64, n: usize) -> EnvelopeFit {
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for (&m, &(lo, hi)) in mp.iter().zip(bounds) {
        c1 = c1.min(m / lo);
        c2 = c2.max(m / hi);
    }
    let holds = mp.iter().zip(bounds).all(|(&m, &(lo, hi))| c1 * lo <= m * (1.0 + 1e-12) && m <= c2 * hi * (1.0 + 1e-12));
    EnvelopeFit { c1, c2, gamma: 2.0 * (n as f64 - 1.0) * modulus_sup, holds: holds && c1 > 0.0 && c2.is_finite() }
}

/// `−2(n−1)‖M‖ ≤ tr M − nθᵀMθ ≤ 2(n−1)‖M‖` for every direction.
pub fn matrix_inequality_check<T: Real>(m: &[[T; 3]; 3], thetas: &[Point<T>]) -> Result<bool> {
    for i in 0..3 {
        for j in 0..3 {
            if m[i][j] != m[j][i] {
                return domain("matrix inequality needs a symmetric matrix");
            }
        }
    }
    let cm = m.map(|row| row.map(cx));
    let norm = linalg::spectral_norm(&cm);
    let tr = m[0][0] + m[1][1] + m[2][2];
    let bound = T::lit(4.0) * norm;
    let slack = T::lit(64.0) * T::epsilon() * (norm + T::one());
    Ok(thetas.iter().all(|th| {
        let nt = norm3(th);
        let u = [th[0] / nt, th[1] / nt, th[2] / nt];
        let mut q = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                q += m[i][j] * u[i] * u[j];
            }
        }
        let v = tr - T::lit(3.0) * q;
        v >= -bound - slack && v <= bound + slack
    }))
}

/// Smooth compactly supported test function with an analytic Hessian.
pub trait TestFunction<T: Real>: Sync {
    fn hessian(&self, x: &Point<T>) -> [[T; 3]; 3];
    /// Quadrature nodes and weights covering the support.
    fn quadrature(&self, order: usize) -> Vec<(Point<T>, T)>;
    /// Radial extent `(min |x|, max |x|)` of the support.
    fn radial_extent(&self) -> (T, T);
    fn describe(&self) -> String;
}

/// `η(x) = Π_k (1 − ((x_k − c_k)/s)²)^6` on the cube `|x_k − c_k| < s`.
#[derive(Clone, Debug)]
pub struct TensorBump<T: Real> {
    pub center: Point<T>,
    pub half_width: T,
}

fn bump1<T: Real>(t: T) -> (T, T, T) {
    if t.abs() >= T::one() {
        return (T::zero(), T::zero(), T::zero());
    }
    let s = T::one() - t * t;
    let s4 = s.powi(4);
    let v = s4 * s * s;
    let d = -T::lit(12.0) * t * s4 * s;
    let dd = -T::lit(12.0) * s4 * s + T::lit(120.0) * t * t * s4;
    (v, d, dd)
}

impl<T: Real> TestFunction<T> for TensorBump<T> {
    fn hessian(&self, x: &Point<T>) -> [[T; 3]; 3] {
        let s = self.half_width;
        let parts: Vec<(T, T, T)> = (0..3).map(|k| bump1((x[k] - self.center[k]) / s)).collect();
        let mut h = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut prod = T::one();
                for k in 0..3 {
                    let (v, d, dd) = parts[k];
                    prod *= if i == j && k == i {
                        dd / (s * s)
                    } else if k == i || k == j {
                        d / s
                    } else {
                        v
                    };
                }
                h[i][j] = prod;
            }
        }
        h
    }

    fn quadrature(&self, order: usize) -> Vec<(Point<T>, T)> {
        let s = self.half_width;
        let axes: Vec<Vec<(T, T)>> = (0..3).map(|k| quad::gauss_legendre_on(order, self.center[k] - s, self.center[k] + s)).collect();
        let mut out = Vec::with_capacity(order * order * order);
        for &(x, wx) in &axes[0] {
            for &(y, wy) in &axes[1] {
                for &(z, wz) in &axes[2] {
                    out.push(([x, y, z], wx * wy * wz));
                }
            }
        }
        out
    }

    fn radial_extent(&self) -> (T, T) {
        let c = norm3(&self.center);
        let d = self.half_width * T::lit(3.0).sqrt();
        ((c - d).max(T::zero()), c + d)
    }

    fn describe(&self) -> String {
        format!(
            "tensor bump at ({:.4}, {:.4}, {:.4}) half-width {:.4}",
            self.center[0].to_f64_lossy(),
            self.center[1].to_f64_lossy(),
            self.center[2].to_f64_lossy(),
            self.half_width.to_f64_lossy()
        )
    }
}

/// `η(x) = b(|x|)·(1 + x₁x₂/|x|²)` with `b` a polynomial bump on `(r₀, r₁)`.
#[derive(Clone, Debug)]
pub struct AnnularBump<T: Real> {
    pub r0: T,
    pub r1: T,
}

impl<T: Real> AnnularBump<T> {
    fn radial(&self, r: T) -> (T, T, T) {
        let mid = (self.r0 + self.r1) / T::lit(2.0);
        let half = (self.r1 - self.r0) / T::lit(2.0);
        let (v, d, dd) = bump1((r - mid) / half);
        (v, d / half, dd / (half * half))
    }
}

impl<T: Real> TestFunction<T> for AnnularBump<T> {
    fn hessian(&self, x: &Point<T>) -> [[T; 3]; 3] {
        // η = b(r)·g(x) with g = 1 + x₁x₂/r²
        let r = norm3(x);
        let (b, db, ddb) = self.radial(r);
        let th = [x[0] / r, x[1] / r, x[2] / r];
        let r2 = r * r;
        let p = x[0] * x[1];
        let g = T::one() + p / r2;
        // ∂g and ∂∂g
        let dp = [x[1], x[0], T::zero()];
        let mut dg = [T::zero(); 3];
        for i in 0..3 {
            dg[i] = dp[i] / r2 - T::lit(2.0) * p * x[i] / (r2 * r2);
        }
        let ddp = |i: usize, j: usize| if (i, j) == (0, 1) || (i, j) == (1, 0) { T::one() } else { T::zero() };
        let mut h = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let d = if i == j { T::one() } else { T::zero() };
                let ddg = ddp(i, j) / r2 - T::lit(2.0) * (dp[i] * x[j] + dp[j] * x[i]) / (r2 * r2) - T::lit(2.0) * p * d / (r2 * r2)
                    + T::lit(8.0) * p * x[i] * x[j] / (r2 * r2 * r2);
                let ddb_ij = ddb * th[i] * th[j] + db * (d - th[i] * th[j]) / r;
                h[i][j] = ddb_ij * g + db * (th[i] * dg[j] + th[j] * dg[i]) + b * ddg;
            }
        }
        h
    }

    fn quadrature(&self, order: usize) -> Vec<(Point<T>, T)> {
        let rule = SphereRule::<T>::gauss_product(2 * order);
        // split at the unit sphere, where the coefficients may jump
        let mut radial = Vec::new();
        if self.r0 < T::one() && self.r1 > T::one() {
            radial.extend(quad::gauss_legendre_on(order, self.r0, T::one()));
            radial.extend(quad::gauss_legendre_on(order, T::one(), self.r1));
        } else {
            radial.extend(quad::gauss_legendre_on(order, self.r0, self.r1));
        }
        let mut out = Vec::with_capacity(radial.len() * rule.len());
        for &(r, wr) in &radial {
            for (th, &w) in rule.nodes().iter().zip(rule.weights()) {
                out.push(([r * th[0], r * th[1], r * th[2]], wr * w * r * r));
            }
        }
        out
    }

    fn radial_extent(&self) -> (T, T) {
        (self.r0, self.r1)
    }

    fn describe(&self) -> String {
        format!("annular bump on ({:.4}, {:.4})", self.r0.to_f64_lossy(), self.r1.to_f64_lossy())
    }
}

/// A residual and its normalization `‖∂²η‖_∞·max|Z|`.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    pub test_function: String,
    pub residual: f64,
    pub hessian_sup: f64,
    pub z_sup: f64,
    /// `residual / (hessian_sup · z_sup)`.
    pub normalized: f64,
}

/// `∫ a_ij Z ∂i∂jη dx` by quadrature over the support of `η`, with `Z` interpolated off the mesh.
pub fn weak_residual<T: Real, E: TestFunction<T>>(
    z: &FieldInterpolator<T>,
    z_sup: T,
    a: &CoefficientField<T>,
    eta: &E,
    mesh: &MeshRef<T>,
    order: usize,
) -> Result<ResidualRow> {
    let (lo, hi) = eta.radial_extent();
    let g = &mesh.radial;
    if !(lo > g.r_min()) || !(hi < g.r_max()) {
        return domain(format!("test function support ({lo}, {hi}) leaves the grid span"));
    }
    let nodes = eta.quadrature(order);
    let mut scratch = Vec::new();
    let mut acc = czero::<T>();
    let mut hsup = T::zero();
    for (x, w) in nodes {
        let h = eta.hessian(&x);
        let mut fro = T::zero();
        for row in &h {
            for v in row {
                fro += *v * *v;
            }
        }
        hsup = hsup.max(fro.sqrt());
        if fro == T::zero() {
            continue;
        }
        let am = a.eval(&x);
        let mut c = czero::<T>();
        for i in 0..3 {
            for j in 0..3 {
                c += am[i][j] * h[i][j];
            }
        }
        acc += c * z.eval(&x, &mut scratch)? * w;
    }
    let residual = acc.norm().to_f64_lossy();
    let hs = hsup.to_f64_lossy();
    let zs = z_sup.to_f64_lossy();
    let normalized = if residual == 0.0 { 0.0 } else { residual / (hs * zs) };
    Ok(ResidualRow { test_function: eta.describe(), residual, hessian_sup: hs, z_sup: zs, normalized })
}

/// The standard battery: tensor bumps at Halton points over three relative sizes plus one
/// annular bump straddling the unit sphere. `seed` offsets the Halton sequence.
pub fn standard_battery<T: Real>(count: usize, seed: u64) -> (Vec<TensorBump<T>>, AnnularBump<T>) {
    let halton = |mut i: u64, b: u64| {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    };
    let scales = [0.25, 0.125, 0.0625];
    let mut bumps = Vec::with_capacity(count);
    for k in 0..count as u64 {
        let i = k + 1 + seed;
        // radius log-uniform in [0.02, 3], direction from two Halton coordinates
        let rr = (0.02f64.ln() + (3.0f64.ln() - 0.02f64.ln()) * halton(i, 2)).exp();
        let z = 2.0 * halton(i, 3) - 1.0;
        let phi = 2.0 * std::f64::consts::PI * halton(i, 5);
        let s = (1.0 - z * z).sqrt();
        let c = [rr * s * phi.cos(), rr * s * phi.sin(), rr * z];
        let hw = rr * scales[(k % 3) as usize];
        bumps.push(TensorBump { center: c.map(T::lit), half_width: T::lit(hw) });
    }
    (bumps, AnnularBump { r0: T::lit(0.7), r1: T::lit(1.4) })
}

/// `L²` projection coefficient `Σ⟨Z, u⟩/Σ⟨Z, Z⟩` over annuli `[r, 2r]` with `r` in `[r_lo, r_hi]`.
pub fn project_onto<T: Real>(u: &AnnularField<T>, z: &AnnularField<T>, r_lo: T, r_hi: T) -> Result<Cx<T>> {
    let mesh = z.mesh();
    let g = &mesh.radial;
    let w = mesh.sphere.weights();
    let nq = mesh.nq();
    let rule = mesh.volume_rule();
    let zu: Vec<Cx<T>> = (0..mesh.nr())
        .map(|i| (0..nq).fold(czero(), |acc, q| acc + z.get(i, q).conj() * u.get(i, q) * w[q]))
        .collect();
    let zz: Vec<Cx<T>> = (0..mesh.nr()).map(|i| (0..nq).fold(czero(), |acc, q| acc + cx(z.get(i, q).norm_sqr() * w[q]))).collect();
    let m = g.per_octave() as i64;
    let (mut num, mut den) = (czero::<T>(), T::zero());
    for i in 0..mesh.nr() {
        let r = g.r(i);
        if r < r_lo || r > r_hi || i == g.outer_break() {
            continue;
        }
        let j = g.level(i);
        let (Some(s), Some(e)) = (g.start_index(j), g.end_index(j + m)) else { continue };
        for k in s..e {
            num += rule.cell(k, &zu);
            den += rule.cell(k, &zz).re;
        }
    }
    if !(den > T::zero()) || !(den.sqrt() > T::lit(1e-300)) {
        return Err(Error::IllPosed("Z has vanishing means on the fit window".into()));
    }
    Ok(num / den)
}

/// Outcome of [`decompose`].
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub c_re: f64,
    pub c_im: f64,
    /// Fitted exponent of `M_p(w, r)` against `r` (`+∞` when `w` vanishes).
    pub slope: f64,
    pub eps1: f64,
    pub slope_tol: f64,
    pub pass: bool,
    pub rows: Vec<(f64, f64)>,
}

/// `u = C·Z + w`: `C` from the annular `L²` projection over the smallest decade of the window,
/// then a least-squares fit of `log M_p(w, r)` against `log r` over the whole window.
pub fn decompose<T: Real>(
    u: &AnnularField<T>,
    z: &AnnularField<T>,
    window: (T, T),
    eps1: f64,
    slope_tol: f64,
    p: T,
) -> Result<(Decomposition, AnnularField<T>)> {
    let (lo, hi) = window;
    let g = &z.mesh().radial;
    if !(lo >= g.r_min() && hi < T::one() && lo < hi) {
        return domain("decomposition window must lie inside (r_min, 1)");
    }
    let c = project_onto(u, z, lo, (lo * T::lit(10.0)).min(hi))?;
    let w = u.sub(&z.scale(c));
    let mp = mp_profile(&w, p);
    let mut pts = Vec::new();
    for i in 0..g.inner_break() {
        let r = g.r(i);
        if r < lo || r > hi {
            continue;
        }
        if let Some(m) = mp[i] {
            pts.push((r.to_f64_lossy(), m.to_f64_lossy()));
        }
    }
    let slope = if pts.iter().all(|&(_, m)| m == 0.0) {
        f64::INFINITY
    } else {
        let xy: Vec<(f64, f64)> = pts.iter().filter(|&&(_, m)| m > 0.0).map(|&(r, m)| (r.ln(), m.ln())).collect();
        least_squares_slope(&xy).ok_or_else(|| Error::IllPosed("too few points for the slope fit".into()))?
    };
    let pass = slope >= 1.0 - eps1 - slope_tol;
    Ok((Decomposition { c_re: c.re.to_f64_lossy(), c_im: c.im.to_f64_lossy(), slope, eps1, slope_tol, pass, rows: pts }, w))
}

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(xy: &[(f64, f64)]) -> Option<f64> {
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Limit at infinity and the decay of `M₁(Z − Z(∞), r)`.
#[derive(Clone, Debug, Serialize)]
pub struct FarField {
    pub z_inf_re: f64,
    pub z_inf_im: f64,
    /// Fitted exponent over the fit window (`−∞` when the deviation is at rounding level).
    pub exponent: f64,
    pub window: (f64, f64),
    pub rows: Vec<(f64, f64)>,
}

/// `Z(∞)` as the volume mean of `Z` over the outermost decade, and the fitted decay exponent
/// of `M₁(Z − Z(∞), r)` over `window`.
pub fn z_infinity<T: Real>(z: &AnnularField<T>, window: (T, T)) -> Result<FarField> {
    let mesh = z.mesh();
    let g = &mesh.radial;
    if g.r_max() < T::lit(4.0) {
        return domain("far-field analysis needs r_max >= 4");
    }
    if window.1 * T::lit(2.0) > g.r_max() || window.0 <= T::one() {
        return domain("far-field window must lie in (1, r_max/2]");
    }
    let means = z.sphere_means();
    let rule = mesh.volume_rule();
    let lo = g.r_max() / T::lit(10.0);
    let (mut num, mut den) = (czero::<T>(), T::zero());
    let ones: Vec<Cx<T>> = vec![cx(T::one()); mesh.nr()];
    for k in 0..g.cells() {
        if g.r(k) >= lo && !g.is_break_cell(k) {
            num += rule.cell(k, means.values());
            den += rule.cell(k, &ones).re;
        }
    }
    let zinf = num / den;
    let dev = z.map(|v| v - zinf);
    let m1 = mp_profile(&dev, T::one());
    let mut rows = Vec::new();
    for i in g.outer_break()..mesh.nr() {
        let r = g.r(i);
        if r < window.0 || r > window.1 {
            continue;
        }
        if let Some(m) = m1[i] {
            rows.push((r.to_f64_lossy(), m.to_f64_lossy()));
        }
    }
    // deviations at rounding level carry no decay information
    let floor = 1e-12 * zinf.norm().to_f64_lossy().max(f64::MIN_POSITIVE);
    let exponent = if rows.iter().all(|&(_, m)| m <= floor) {
        f64::NEG_INFINITY
    } else {
        let xy: Vec<(f64, f64)> = rows.iter().filter(|&&(_, m)| m > 0.0).map(|&(r, m)| (r.ln(), m.ln())).collect();
        least_squares_slope(&xy).unwrap_or(f64::NAN)
    };
    Ok(FarField {
        z_inf_re: zinf.re.to_f64_lossy(),
        z_inf_im: zinf.im.to_f64_lossy(),
        exponent,
        window: (window.0.to_f64_lossy(), window.1.to_f64_lossy()),
        rows,
    })
}
