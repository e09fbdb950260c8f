//! Radial profiles of the coefficients and the operators of the fixed-point equation
//! `V + S₁V + T₂V = −Y₀·T₁(1)`.
//!
//! With `G` the zero-mean solution operator of [`crate::potential`], `S = −G∘B` and
//! `T = −G∘(φ·)`; the conjugated forms are `S₁ = E⁻¹SE`, `T₁ = E⁻¹TE` and `T₂V = T₁(Y₁[V])`
//! where `Y₁[V](ρ) = ∫_0^ρ KV(t) dt/t`.

use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::linalg::{self, PAIRS};
use crate::meshmeans::{mp_profile, x_norm, AnnularField, MatrixField, MeshRef, RadialProfile};
use crate::modulus::ModulusOmega;
use crate::potential::{GreenRef, GreenSolver};
use crate::quad;
use crate::scalar::{cx, Cx, Real};

/// Smallest admissible `|α(r)|`.
pub const ALPHA_MARGIN: f64 = 1e-2;

/// Relative tolerance of the zero-spherical-mean precondition.
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// Absolute floor of the same check, so that fields made of rounding noise pass.
pub const MEAN_FLOOR: f64 = 1e-10;

/// `α₀ = ⨍tr a`, `α = ⨍θᵀaθ`, `Q = n − α₀/α` and `E = exp(∫_r^∞ Q/t dt)` on the mesh.
#[derive(Clone, Debug)]
pub struct ProfileBundle<T: Real> {
    pub alpha0: RadialProfile<T>,
    pub alpha: RadialProfile<T>,
    pub q: RadialProfile<T>,
    pub e: RadialProfile<T>,
}

fn czero<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

/// Samples `a` on the mesh in packed symmetric form.
pub fn sample_coefficients<T: Real>(a: &CoefficientField<T>, mesh: &MeshRef<T>) -> MatrixField<T> {
    MatrixField::from_fn(mesh, |_, r, th| linalg::pack(&a.eval_polar(r, th)))
}

/// `(α₀(r), α(r))` by sphere quadrature at an arbitrary radius.
fn sphere_profiles_at<T: Real>(a: &CoefficientField<T>, mesh: &MeshRef<T>, r: T) -> (Cx<T>, Cx<T>) {
    let (mut a0, mut a1) = (czero::<T>(), czero::<T>());
    for (th, &w) in mesh.sphere.nodes().iter().zip(mesh.sphere.weights()) {
        let m = a.eval_polar(r, th);
        a0 += linalg::trace(&m) * w;
        a1 += linalg::quad_form(&m, th) * w;
    }
    let area = mesh.sphere.area();
    (a0 / area, a1 / area)
}

fn profiles_from_samples<T: Real>(a: &CoefficientField<T>, samples: &MatrixField<T>) -> Result<ProfileBundle<T>> {
    let mesh = samples.mesh();
    let nodes = mesh.sphere.nodes();
    let nq = mesh.nq();
    let mut tr = Vec::with_capacity(mesh.nr() * nq);
    let mut qf = Vec::with_capacity(mesh.nr() * nq);
    for (k, m) in samples.values().iter().enumerate() {
        tr.push(linalg::trace_sym(m));
        qf.push(linalg::quad_form_sym(m, &nodes[k % nq]));
    }
    let alpha0 = AnnularField::from_values(mesh, tr)?.sphere_means();
    let alpha = AnnularField::from_values(mesh, qf)?.sphere_means();
    for i in 0..mesh.nr() {
        let v = alpha.at(i).norm();
        if !(v >= T::lit(ALPHA_MARGIN)) {
            return Err(Error::Degenerate { r: mesh.radial.r(i).to_f64_lossy(), value: v.to_f64_lossy() });
        }
    }
    let n = cx(T::from_usize_lossy(mesh.dim()));
    let q = alpha0.zip_map(&alpha, |a0, a| n - a0 / a);
    let logs = resampled_tail_integral(a, mesh, |a0, a1| n - a0 / a1)?;
    let e = logs.map(|v| v.exp());
    Ok(ProfileBundle { alpha0, alpha, q, e })
}

/// `∫_{r_i}^{r_max} f(α₀(ρ), α(ρ)) dρ/ρ` at every node, with the profiles re-evaluated at
/// Gauss-Legendre points inside each cell rather than interpolated from the nodes.
pub fn resampled_tail_integral<T: Real, F>(a: &CoefficientField<T>, mesh: &MeshRef<T>, f: F) -> Result<RadialProfile<T>>
where
    F: Fn(Cx<T>, Cx<T>) -> Cx<T>,
{
    let g = &mesh.radial;
    let u = g.log_nodes();
    let n = cx(T::from_usize_lossy(mesh.dim()));
    let (gx, gw) = quad::gauss_legendre(8);
    let mut logs = vec![czero::<T>(); mesh.nr()];
    for k in (0..g.cells()).rev() {
        let mut acc = czero::<T>();
        if !g.is_break_cell(k) {
            let (ua, ub) = (u[k], u[k + 1]);
            let half = (ub - ua) / T::lit(2.0);
            let mid = (ua + ub) / T::lit(2.0);
            let inside = g.is_inner(k);
            for (&x, &w) in gx.iter().zip(&gw) {
                let r = (mid + half * T::lit(x)).exp();
                let (a0, a1) = if inside && r < T::one() { sphere_profiles_at(a, mesh, r) } else { (n, cx(T::one())) };
                if !(a1.norm() >= T::lit(ALPHA_MARGIN)) {
                    return Err(Error::Degenerate { r: r.to_f64_lossy(), value: a1.norm().to_f64_lossy() });
                }
                acc += f(a0, a1) * (T::lit(w) * half);
            }
        }
        logs[k] = logs[k + 1] + acc;
    }
    RadialProfile::from_values(mesh, logs)
}

/// Computes the radial profiles of `a` by sphere quadrature and backward log-radial quadrature.
pub fn profiles<T: Real>(a: &CoefficientField<T>, mesh: &MeshRef<T>) -> Result<ProfileBundle<T>> {
    profiles_from_samples(a, &sample_coefficients(a, mesh))
}

/// `φ_ij = (a_ij − δ_ij)/α(r)`.
pub fn phi_matrix<T: Real>(a: &CoefficientField<T>, prof: &ProfileBundle<T>) -> MatrixField<T> {
    let mesh = prof.alpha.mesh().clone();
    phi_from_samples(&sample_coefficients(a, &mesh), prof)
}

fn phi_from_samples<T: Real>(samples: &MatrixField<T>, prof: &ProfileBundle<T>) -> MatrixField<T> {
    let mesh = samples.mesh();
    let nq = mesh.nq();
    let values = samples
        .values()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let inv = prof.alpha.at(k / nq).inv();
            let d = linalg::sub_identity_sym(m);
            d.map(|v| v * inv)
        })
        .collect();
    MatrixField::from_values(mesh, values).expect("shape matches mesh")
}

/// Immutable operator context: sampled coefficients, profiles and the Green solver.
#[derive(Clone)]
pub struct OpContext<T: Real> {
    pub coefficients: CoefficientField<T>,
    pub samples: MatrixField<T>,
    pub profiles: ProfileBundle<T>,
    pub phi: MatrixField<T>,
    green: GreenRef<T>,
    a_minus_i: MatrixField<T>,
    /// `θᵀaθ − 1`
    quad_minus_one: AnnularField<T>,
    /// `a_ii − n`
    trace_minus_n: AnnularField<T>,
    /// `Ω(r_i)`
    omega: Vec<T>,
}

impl<T: Real> OpContext<T> {
    pub fn new(a: &CoefficientField<T>, mesh: &MeshRef<T>) -> Result<Self> {
        Self::with_green(a, Arc::new(GreenSolver::new(mesh)))
    }

    /// Reuses an existing solver (and its mesh).
    pub fn with_green(a: &CoefficientField<T>, green: GreenRef<T>) -> Result<Self> {
        let mesh = green.mesh().clone();
        if a.dim() != mesh.dim() {
            return Err(Error::Unsupported(format!("coefficient dimension {} on a {}-dimensional mesh", a.dim(), mesh.dim())));
        }
        let samples = sample_coefficients(a, &mesh);
        let profiles = profiles_from_samples(a, &samples)?;
        let phi = phi_from_samples(&samples, &profiles);
        let nq = mesh.nq();
        let nodes = mesh.sphere.nodes();
        let a_minus_i = MatrixField::from_values(&mesh, samples.values().iter().map(linalg::sub_identity_sym).collect())?;
        let quad_minus_one = AnnularField::from_values(
            &mesh,
            a_minus_i.values().iter().enumerate().map(|(k, d)| linalg::quad_form_sym(d, &nodes[k % nq])).collect(),
        )?;
        let n = T::from_usize_lossy(mesh.dim());
        let trace_minus_n =
            AnnularField::from_values(&mesh, samples.values().iter().map(|m| linalg::trace_sym(m) - n).collect())?;
        let omega = (0..mesh.nr()).map(|i| a.envelope().at(mesh.radial.r(i))).collect();
        Ok(Self { coefficients: a.clone(), samples, profiles, phi, green, a_minus_i, quad_minus_one, trace_minus_n, omega })
    }

    pub fn mesh(&self) -> &MeshRef<T> {
        self.green.mesh()
    }

    pub fn green(&self) -> &GreenRef<T> {
        &self.green
    }

    pub fn modulus(&self) -> &ModulusOmega<T> {
        self.coefficients.envelope()
    }

    /// `Ω(r_i)` at every radial node.
    pub fn omega_nodes(&self) -> &[T] {
        &self.omega
    }

    fn check_zero_mean(&self, v: &AnnularField<T>, what: &str) -> Result<()> {
        let scale = v.max_abs();
        if scale == T::zero() {
            return Ok(());
        }
        let means = v.sphere_means();
        let worst = means.max_abs();
        // in single precision both limits rise to the rounding level
        let tol = T::lit(MEAN_TOLERANCE).max(T::lit(1e4) * T::epsilon());
        let floor = T::lit(MEAN_FLOOR).max(T::lit(1e3) * T::epsilon());
        if worst > tol * scale + floor {
            return Err(Error::Contract(format!(
                "{what} needs a field with zero spherical means, found {:.3e} relative",
                (worst / scale).to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// `⨍V(a_ii − n) − (α₀/α)⨍V(a − δ)θθ`.
    pub fn apply_k(&self, v: &AnnularField<T>) -> Result<RadialProfile<T>> {
        self.check_zero_mean(v, "K")?;
        Ok(self.k_unchecked(v))
    }

    fn k_unchecked(&self, v: &AnnularField<T>) -> RadialProfile<T> {
        let mesh = self.mesh();
        let nq = mesh.nq();
        let w = mesh.sphere.weights();
        let area = mesh.sphere.area();
        let vals = (0..mesh.nr())
            .map(|i| {
                let (mut s0, mut s1): (Cx<T>, Cx<T>) = (czero(), czero());
                let row = v.row(i);
                let tr = self.trace_minus_n.row(i);
                let qm = self.quad_minus_one.row(i);
                for q in 0..nq {
                    s0 += row[q] * tr[q] * w[q];
                    s1 += row[q] * qm[q] * w[q];
                }
                let ratio = self.profiles.alpha0.at(i) / self.profiles.alpha.at(i);
                (s0 - ratio * s1) / area
            })
            .collect();
        RadialProfile::from_values(mesh, vals).expect("shape matches mesh")
    }

    /// `B_ij(v) = (a_ij − δ_ij)(v − (1/α)⨍v(θᵀaθ − 1))`.
    pub fn b_matrix(&self, v: &AnnularField<T>) -> Result<MatrixField<T>> {
        self.check_zero_mean(v, "B")?;
        Ok(self.b_unchecked(v))
    }

    fn b_unchecked(&self, v: &AnnularField<T>) -> MatrixField<T> {
        let mesh = self.mesh();
        let corr = v
            .zip_mul(&self.quad_minus_one)
            .sphere_means()
            .zip_map(&self.profiles.alpha, |m, a| m / a);
        let nq = mesh.nq();
        let shifted_vals: Vec<Cx<T>> =
            v.values().iter().enumerate().map(|(k, &x)| x - corr.at(k / nq)).collect();
        let values = self
            .a_minus_i
            .values()
            .iter()
            .zip(&shifted_vals)
            .map(|(d, &s)| d.map(|x| x * s))
            .collect();
        MatrixField::from_values(mesh, values).expect("shape matches mesh")
    }

    /// `S₁V = E⁻¹·(−G(B(E·V)))`.
    pub fn apply_s1(&self, v: &AnnularField<T>) -> Result<AnnularField<T>> {
        self.check_zero_mean(v, "S1")?;
        let ev = v.mul_profile(&self.profiles.e);
        let g = self.green.apply(&self.b_unchecked(&ev));
        Ok(self.conjugate_back(&g))
    }

    /// `T₁(y) = E⁻¹·(−G(φ·E·y))` for a radial profile `y`.
    pub fn apply_t1(&self, y: &RadialProfile<T>) -> AnnularField<T> {
        let g = self.green.apply(&self.phi_times(y));
        self.conjugate_back(&g)
    }

    /// `Y₁[V](r) = ∫_{r_min}^r KV(t) dt/t` (the part below `r_min` is budgeted separately).
    pub fn y1(&self, v: &AnnularField<T>) -> Result<RadialProfile<T>> {
        Ok(self.apply_k(v)?.cumulative_log_integral())
    }

    /// `T₂V = T₁(Y₁[V])`.
    pub fn apply_t2(&self, v: &AnnularField<T>) -> Result<AnnularField<T>> {
        let y = self.y1(v)?;
        Ok(self.apply_t1(&y))
    }

    /// `S₁V + T₂V` with a single application of `G`, together with `Y₁[V]`.
    pub fn apply_s1_plus_t2(&self, v: &AnnularField<T>) -> Result<(AnnularField<T>, RadialProfile<T>)> {
        self.check_zero_mean(v, "S1 + T2")?;
        let y = self.k_unchecked(v).cumulative_log_integral();
        let ev = v.mul_profile(&self.profiles.e);
        let f = self.b_unchecked(&ev).add(&self.phi_times(&y));
        let g = self.green.apply(&f);
        Ok((self.conjugate_back(&g), y))
    }

    fn phi_times(&self, y: &RadialProfile<T>) -> MatrixField<T> {
        let nq = self.mesh().nq();
        let ey = y.zip_map(&self.profiles.e, |a, b| a * b);
        let values = self.phi.values().iter().enumerate().map(|(k, m)| m.map(|x| x * ey.at(k / nq))).collect();
        MatrixField::from_values(self.mesh(), values).expect("shape matches mesh")
    }

    fn conjugate_back(&self, g: &AnnularField<T>) -> AnnularField<T> {
        let inv = self.profiles.e.map(|e| -e.inv());
        g.mul_profile(&inv)
    }

    /// Direct quadrature of the first form `⨍V a_ii − (α₀/α)⨍V a_ijθiθj` (no zero-mean reduction).
    pub fn apply_k_direct(&self, v: &AnnularField<T>) -> RadialProfile<T> {
        let mesh = self.mesh();
        let nodes = mesh.sphere.nodes();
        let nq = mesh.nq();
        let tr = AnnularField::from_values(
            mesh,
            self.samples.values().iter().zip(v.values()).map(|(m, &x)| linalg::trace_sym(m) * x).collect(),
        )
        .expect("shape")
        .sphere_means();
        let qf = AnnularField::from_values(
            mesh,
            self.samples
                .values()
                .iter()
                .zip(v.values())
                .enumerate()
                .map(|(k, (m, &x))| linalg::quad_form_sym(m, &nodes[k % nq]) * x)
                .collect(),
        )
        .expect("shape")
        .sphere_means();
        let ratio = self.profiles.alpha0.zip_map(&self.profiles.alpha, |a, b| a / b);
        let t = qf.zip_map(&ratio, |a, b| a * b);
        tr.zip_map(&t, |a, b| a - b)
    }
}

/// Empirical bound constants `sup_{r<1} out/(Ω·in)` and operator-norm estimates.
#[derive(Clone, Debug, Serialize)]
pub struct OperatorDiagnostics {
    pub k_bound: f64,
    pub b_bound: f64,
    pub phi_bound: f64,
    pub q_bound: f64,
    pub alpha0_bound: f64,
    pub alpha_bound: f64,
    pub t1_one_x_norm: f64,
    pub s1_norm: f64,
    pub t2_norm: f64,
    pub probes: usize,
}

fn sup_ratio<T: Real>(num: &[Option<T>], den: &[Option<T>], omega: &[T], inner_break: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..inner_break {
        if let (Some(a), Some(b)) = (num[i], den[i]) {
            let d = (b * omega[i]).to_f64_lossy();
            let a = a.to_f64_lossy();
            if a > 0.0 {
                worst = worst.max(if d > 0.0 { a / d } else { f64::INFINITY });
            }
        }
    }
    worst
}

fn sup_pointwise<T: Real>(vals: impl Iterator<Item = (usize, T)>, omega: &[T], inner_break: usize) -> f64 {
    let mut worst = 0.0f64;
    for (i, v) in vals {
        if i >= inner_break {
            continue;
        }
        let v = v.to_f64_lossy();
        if v > 0.0 {
            let d = omega[i].to_f64_lossy();
            worst = worst.max(if d > 0.0 { v / d } else { f64::INFINITY });
        }
    }
    worst
}

/// Probe fields `Ω(r)·Y(θ)` with `Y ∈ {Y_{l,0}, Y_{l,−l}}`, `l = 1..l_max`.
pub fn probe_fields<T: Real>(ctx: &OpContext<T>) -> Vec<AnnularField<T>> {
    let mesh = ctx.mesh();
    let l_max = mesh.harmonics.l_max();
    let nq = mesh.nq();
    let mut out = Vec::new();
    for l in 1..=l_max {
        let mut ms = vec![0i64];
        ms.push(-(l as i64));
        for m in ms {
            let h = crate::meshmeans::lm_index(l, m);
            let vals = (0..mesh.nr() * nq)
                .map(|k| cx(ctx.omega[k / nq] * mesh.harmonics.y[h * nq + k % nq]))
                .collect();
            out.push(AnnularField::from_values(mesh, vals).expect("shape"));
        }
    }
    out
}

/// Checks the size bounds of `K`, `B`, `φ`, `Q`, `α₀`, `α` and estimates the X-norms of `S₁`, `T₂`
/// on the probe basis.
pub fn operator_diagnostics<T: Real>(ctx: &OpContext<T>, delta: T, p: T, with_norms: bool) -> Result<OperatorDiagnostics> {
    let mesh = ctx.mesh();
    let ib = mesh.radial.inner_break();
    let n = T::from_usize_lossy(mesh.dim());
    let omega = &ctx.omega;
    let pr = &ctx.profiles;
    let q_bound = sup_pointwise(pr.q.values().iter().map(|v| v.norm()).enumerate(), omega, ib);
    let alpha0_bound = sup_pointwise(pr.alpha0.values().iter().map(|v| (v - cx(n)).norm()).enumerate(), omega, ib);
    let alpha_bound = sup_pointwise(pr.alpha.values().iter().map(|v| (v - cx(T::one())).norm()).enumerate(), omega, ib);
    let nq = mesh.nq();
    let phi_bound =
        sup_pointwise(ctx.phi.values().iter().enumerate().map(|(k, m)| (k / nq, linalg::spectral_norm_sym(m))), omega, ib);
    let probes = probe_fields(ctx);
    let (mut k_bound, mut b_bound, mut s1_norm, mut t2_norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for v in &probes {
        let mv = mp_profile(v, p);
        let kv = ctx.k_unchecked(v);
        let kf = AnnularField::from_fn(mesh, |i, _, _| kv.at(i));
        k_bound = k_bound.max(sup_ratio(&mp_profile(&kf, p), &mv, omega, ib));
        let b = ctx.b_unchecked(v);
        let bn = AnnularField::from_values(mesh, b.values().iter().map(|m| cx(linalg::spectral_norm_sym(m))).collect())?;
        b_bound = b_bound.max(sup_ratio(&mp_profile(&bn, p), &mv, omega, ib));
        if with_norms {
            let xv = x_norm(v, ctx.modulus(), delta, p)?.total();
            if xv > 0.0 {
                s1_norm = s1_norm.max(x_norm(&ctx.apply_s1(v)?, ctx.modulus(), delta, p)?.total() / xv);
                t2_norm = t2_norm.max(x_norm(&ctx.apply_t2(v)?, ctx.modulus(), delta, p)?.total() / xv);
            }
        }
    }
    let one = RadialProfile::constant(mesh, cx(T::one()));
    let t1_one_x_norm = x_norm(&ctx.apply_t1(&one), ctx.modulus(), delta, p)?.total();
    Ok(OperatorDiagnostics {
        k_bound,
        b_bound,
        phi_bound,
        q_bound,
        alpha0_bound,
        alpha_bound,
        t1_one_x_norm,
        s1_norm,
        t2_norm,
        probes: probes.len(),
    })
}

/// `sup |Re ∫_ρ^r Q/t dt| / ln(r/ρ)` over node pairs `ρ ≤ r ≤ 1`: the exponent `c√δ` for which
/// `|exp(±∫_ρ^r Q/t)| ∈ [(ρ/r)^{c√δ}, (r/ρ)^{c√δ}]`.
pub fn sandwich_exponent<T: Real>(prof: &ProfileBundle<T>) -> f64 {
    let mesh = prof.q.mesh();
    let g = &mesh.radial;
    let cum = prof.q.cumulative_log_integral();
    let ib = g.inner_break();
    let mut worst = 0.0f64;
    let u = g.log_nodes();
    for j in 0..=ib {
        for i in 0..j {
            let du = (u[j] - u[i]).to_f64_lossy();
            if du <= 0.0 {
                continue;
            }
            let v = (cum.at(j) - cum.at(i)).re.to_f64_lossy().abs();
            worst = worst.max(v / du);
        }
    }
    worst
}

/// Packed component index of the matrix entry `(i, j)`.
pub fn pair_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    PAIRS.iter().position(|&p| p == (i, j)).expect("valid index pair")
}
