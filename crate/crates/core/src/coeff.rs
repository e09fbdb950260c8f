//! Coefficient fields `x ↦ a(x)`: complex symmetric 3×3 matrices equal to the identity outside `B₁`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat3};
use crate::meshmeans::SphereRule;
use crate::modulus::{log_e_over, ModulusOmega};
use crate::scalar::{cx, norm3, Cx, Point, Real};

/// Radial profile `r ↦ value`.
pub type RadialMap<T> = Arc<dyn Fn(T) -> Cx<T> + Send + Sync>;

/// Real symmetric matrix-valued function of the direction `θ`.
pub type AngularPattern<T> = Arc<dyn Fn(&Point<T>) -> [[T; 3]; 3] + Send + Sync>;

/// Arbitrary matrix-valued field.
pub type MatrixMap<T> = Arc<dyn Fn(&Point<T>) -> CMat3<T> + Send + Sync>;

#[derive(Clone)]
enum Kind<T: Real> {
    Identity,
    Equivariant { beta: RadialMap<T>, gamma: RadialMap<T> },
    Angular { base: Box<CoefficientField<T>>, m: RadialMap<T>, pattern: AngularPattern<T> },
    Tabulated(Arc<Table<T>>),
    Custom(MatrixMap<T>),
}

/// Coefficient field together with its stabilization envelope.
#[derive(Clone)]
pub struct CoefficientField<T: Real> {
    dim: usize,
    kind: Kind<T>,
    envelope: ModulusOmega<T>,
    label: String,
}

impl<T: Real> fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("envelope", &self.envelope)
            .finish()
    }
}

/// `C^∞` cutoff equal to 1 on `[0, 1/2]`, 0 on `[1, ∞)` and monotone in between.
pub fn smooth_cutoff<T: Real>(r: T) -> T {
    let half = T::lit(0.5);
    if r <= half {
        return T::one();
    }
    if r >= T::one() {
        return T::zero();
    }
    let t = (r - half) / half;
    let psi = |s: T| if s <= T::zero() { T::zero() } else { (-s.recip()).exp() };
    let a = psi(T::one() - t);
    let b = psi(t);
    a / (a + b)
}

/// `κ·(log(e/r))^{−s}` on `(0, 1)`, zero elsewhere.
pub fn log_profile<T: Real>(kappa: T, s: T, r: T) -> T {
    if r >= T::one() || r <= T::zero() {
        return T::zero();
    }
    kappa * log_e_over(r).powf(-s)
}

fn direction<T: Real>(x: &Point<T>) -> (T, Point<T>) {
    let r = norm3(x);
    if r > T::zero() {
        (r, [x[0] / r, x[1] / r, x[2] / r])
    } else {
        (r, [T::zero(), T::zero(), T::one()])
    }
}

impl<T: Real> CoefficientField<T> {
    /// `a ≡ I`.
    pub fn identity(dim: usize) -> Self {
        Self { dim, kind: Kind::Identity, envelope: ModulusOmega::zero(), label: "identity".into() }
    }

    /// `a(x) = β(|x|)·I + γ(|x|)·θθᵀ`.
    ///
    /// The envelope and the conditions `β = 1, γ = 0` on `r ≥ 1` are checked on a sample plan;
    /// `margin` is the minimum admissible `|β|` and `|β + γ|`.
    pub fn make_equivariant_family(
        beta: RadialMap<T>,
        gamma: RadialMap<T>,
        dim: usize,
        envelope: ModulusOmega<T>,
        margin: T,
    ) -> Result<Self> {
        if dim != 3 {
            return Err(Error::Unsupported(format!("coefficient fields are implemented for n = 3, got n = {dim}")));
        }
        let field = Self { dim, kind: Kind::Equivariant { beta: beta.clone(), gamma: gamma.clone() }, envelope, label: "equivariant".into() };
        let plan = SamplePlan::<T>::standard();
        for &r in &plan.outer_radii() {
            let (b, g) = (beta(r), gamma(r));
            if (b - cx(T::one())).norm() > T::zero() || g.norm() > T::zero() {
                return Err(Error::Validation(format!("equivariant family must equal the identity at r = {r}")));
            }
        }
        for &r in &plan.dense_radii() {
            let (b, g) = (beta(r), gamma(r));
            if !(b.norm() >= margin) || !((b + g).norm() >= margin) {
                return Err(Error::Validation(format!("ellipticity margin violated at r = {r}: |beta| = {}, |beta+gamma| = {}", b.norm(), (b + g).norm())));
            }
        }
        field.require_envelope(&plan)?;
        Ok(field)
    }

    /// `g`-family: `a = g(r)·I` with `g = 1 + κ(log(e/r))^{−s}·χ(r)` and `χ` a smooth cutoff on `[1/2, 1]`.
    pub fn g_family(kappa: T, s: T, epsilon: T) -> Result<Self> {
        let beta: RadialMap<T> = Arc::new(move |r: T| cx(T::one() + log_profile(kappa, s, r) * smooth_cutoff(r)));
        let gamma: RadialMap<T> = Arc::new(|_r: T| cx(T::zero()));
        let env = ModulusOmega::dyadic_log(kappa.abs(), s, epsilon)?;
        let mut f = Self::make_equivariant_family(beta, gamma, 3, env, T::lit(0.1))?;
        f.label = format!("g-family(kappa={kappa}, s={s})");
        Ok(f)
    }

    /// `k`-family: `a = I + k(r)(I − nθθᵀ)` with `k = κ(log(e/r))^{−s}` on `r < 1`.
    ///
    /// The perturbation is not cut off, so `a` jumps to `I` across the unit sphere.
    pub fn k_family(kappa: T, s: T, epsilon: T) -> Result<Self> {
        let n = T::lit(3.0);
        let beta: RadialMap<T> = Arc::new(move |r: T| cx(T::one() + log_profile(kappa, s, r)));
        let gamma: RadialMap<T> = Arc::new(move |r: T| cx(-n * log_profile(kappa, s, r)));
        let env = ModulusOmega::dyadic_log((n - T::one()) * kappa.abs(), s, epsilon)?;
        let mut f = Self::make_equivariant_family(beta, gamma, 3, env, T::lit(0.1))?;
        f.label = format!("k-family(kappa={kappa}, s={s})");
        Ok(f)
    }

    /// `base + m(|x|)·pattern(θ)`; the envelope becomes `base envelope + m_envelope`.
    pub fn make_angular_family(
        base: CoefficientField<T>,
        m: RadialMap<T>,
        m_envelope: ModulusOmega<T>,
        pattern: AngularPattern<T>,
    ) -> Result<Self> {
        let plan = SamplePlan::<T>::standard();
        for th in plan.directions() {
            let p = pattern(th);
            for i in 0..3 {
                for j in 0..3 {
                    if p[i][j] != p[j][i] {
                        return Err(Error::Validation("angular pattern is not symmetric".into()));
                    }
                }
            }
            let pm: CMat3<T> = p.map(|row| row.map(cx));
            if linalg::spectral_norm(&pm) > T::one() + T::lit(1e-12) {
                return Err(Error::Validation("angular pattern exceeds unit norm".into()));
            }
        }
        for &r in &plan.outer_radii() {
            if m(r).norm() > T::zero() {
                return Err(Error::Validation(format!("angular amplitude must vanish at r = {r}")));
            }
        }
        let envelope = ModulusOmega::sum(&base.envelope, &m_envelope);
        let label = format!("angular({})", base.label);
        let field = Self { dim: base.dim, kind: Kind::Angular { base: Box::new(base), m, pattern }, envelope, label };
        field.require_envelope(&plan)?;
        Ok(field)
    }

    /// Identity plus `A(log(e/r))^{−s}·χ(r)·P(θ)` with `P = 2θ₁θ₂(e₁e₂ᵀ + e₂e₁ᵀ)`.
    pub fn angular_family(base: CoefficientField<T>, amplitude: Cx<T>, s: T, epsilon: T) -> Result<Self> {
        let m: RadialMap<T> = Arc::new(move |r: T| amplitude * (log_profile(T::one(), s, r) * smooth_cutoff(r)));
        let env = ModulusOmega::dyadic_log(amplitude.norm(), s, epsilon)?;
        let pattern: AngularPattern<T> = Arc::new(|th: &Point<T>| {
            let v = T::lit(2.0) * th[0] * th[1];
            let z = T::zero();
            [[z, v, z], [v, z, z], [z, z, z]]
        });
        let mut f = Self::make_angular_family(base, m, env, pattern)?;
        f.label = format!("{}+angular(A={amplitude}, s={s})", f.label.trim_start_matches("angular(").trim_end_matches(')'));
        Ok(f)
    }

    /// Arbitrary field; symmetry and the identity outside `B₁` are enforced on evaluation,
    /// the envelope is checked on the standard sample plan.
    pub fn custom(map: MatrixMap<T>, envelope: ModulusOmega<T>, label: impl Into<String>) -> Result<Self> {
        let field = Self { dim: 3, kind: Kind::Custom(map), envelope, label: label.into() };
        let plan = SamplePlan::<T>::standard();
        for &r in &plan.dense_radii() {
            for th in plan.directions() {
                let a = field.eval(&[th[0] * r, th[1] * r, th[2] * r]);
                if !linalg::is_symmetric(&a, T::zero()) {
                    return Err(Error::Validation(format!("custom coefficient is not symmetric at r = {r}")));
                }
            }
        }
        field.require_envelope(&plan)?;
        Ok(field)
    }

    /// Tabulated field read from CSV with nearest-sample evaluation (see [`Table::from_csv`]).
    pub fn tabulated(path: impl AsRef<Path>, envelope: ModulusOmega<T>) -> Result<Self> {
        let table = Table::from_csv(path.as_ref())?;
        let label = format!("tabulated({})", path.as_ref().display());
        Ok(Self { dim: 3, kind: Kind::Tabulated(Arc::new(table)), envelope, label })
    }

    /// Replaces the envelope without re-validation (used to audit deliberately wrong envelopes).
    pub fn with_envelope_unchecked(mut self, envelope: ModulusOmega<T>) -> Self {
        self.envelope = envelope;
        self
    }

    fn require_envelope(&self, plan: &SamplePlan<T>) -> Result<()> {
        // a few ulps of slack: the k-family sits exactly on its envelope
        let slack = T::lit(1e-12).max(T::lit(64.0) * T::epsilon());
        let rep = self.envelope_check(plan, slack);
        if !rep.pass {
            return Err(Error::Validation(format!(
                "coefficient exceeds its envelope: worst margin {:.3e} at r = {:.6e}",
                rep.worst_margin, rep.worst_r
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn envelope(&self) -> &ModulusOmega<T> {
        &self.envelope
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `(β, γ)` for radially equivariant fields.
    pub fn equivariant_parts(&self) -> Option<(RadialMap<T>, RadialMap<T>)> {
        match &self.kind {
            Kind::Identity => {
                let one: RadialMap<T> = Arc::new(|_| cx(T::one()));
                let zero: RadialMap<T> = Arc::new(|_| cx(T::zero()));
                Some((one, zero))
            }
            Kind::Equivariant { beta, gamma } => Some((beta.clone(), gamma.clone())),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    /// `a(x)`; exactly `I` for `|x| ≥ 1`.
    pub fn eval(&self, x: &Point<T>) -> CMat3<T> {
        let (r, th) = direction(x);
        if r >= T::one() {
            return linalg::identity();
        }
        self.eval_polar(r, &th)
    }

    /// `a(rθ)` for a unit direction `θ`.
    pub fn eval_polar(&self, r: T, th: &Point<T>) -> CMat3<T> {
        if r >= T::one() {
            return linalg::identity();
        }
        match &self.kind {
            Kind::Identity => linalg::identity(),
            Kind::Equivariant { beta, gamma } => {
                let (b, g) = (beta(r), gamma(r));
                let mut a = [[Complex::new(T::zero(), T::zero()); 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] = g * (th[i] * th[j]);
                    }
                    a[i][i] += b;
                }
                a
            }
            Kind::Angular { base, m, pattern } => {
                let mut a = base.eval_polar(r, th);
                let mv = m(r);
                let p = pattern(th);
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] += mv * p[i][j];
                    }
                }
                a
            }
            Kind::Tabulated(t) => t.nearest(&[th[0] * r, th[1] * r, th[2] * r]),
            Kind::Custom(f) => {
                let a = f(&[th[0] * r, th[1] * r, th[2] * r]);
                // symmetrize defensively from the upper triangle
                let mut s = a;
                for i in 0..3 {
                    for j in (i + 1)..3 {
                        s[j][i] = s[i][j];
                    }
                }
                s
            }
        }
    }

    /// `a_ii(rθ) − n·θᵀa(rθ)θ`.
    pub fn stabilization_density(&self, r: T, th: &Point<T>) -> Cx<T> {
        let a = self.eval_polar(r, th);
        linalg::trace(&a) - linalg::quad_form(&a, th) * T::from_usize_lossy(self.dim)
    }

    /// Spherical mean of `a_ii − n·a_ijθ_iθ_j` at radius `r`, i.e. `α₀(r) − n·α(r)`.
    pub fn stabilization_integrand(&self, r: T, sphere: &SphereRule<T>) -> Cx<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (th, &w) in sphere.nodes().iter().zip(sphere.weights()) {
            acc += self.stabilization_density(r, th) * w;
        }
        acc / sphere.area()
    }

    /// Samples `sup |a(x) − I|` over each dyadic annulus `r < |x| < 2r` of the plan and compares with `Ω(r)`.
    pub fn envelope_check(&self, plan: &SamplePlan<T>, tolerance: T) -> EnvelopeReport {
        let dirs = plan.directions();
        let mut annuli = Vec::with_capacity(plan.radii.len());
        let mut pass = true;
        let mut worst = f64::INFINITY;
        let mut worst_r = f64::NAN;
        for &r in &plan.radii {
            let mut sup = T::zero();
            for rho in plan.annulus_radii(r) {
                if rho >= T::one() {
                    continue;
                }
                for th in dirs {
                    let d = linalg::sub_identity(&self.eval_polar(rho, th));
                    sup = sup.max(linalg::spectral_norm(&d));
                }
            }
            let omega = self.envelope.at(r);
            let margin = omega - sup;
            if margin < -tolerance {
                pass = false;
            }
            let mf = margin.to_f64_lossy();
            if mf < worst {
                worst = mf;
                worst_r = r.to_f64_lossy();
            }
            annuli.push(AnnulusReport { r: r.to_f64_lossy(), sup_norm: sup.to_f64_lossy(), omega: omega.to_f64_lossy(), margin: mf });
        }
        EnvelopeReport { annuli, pass, tolerance: tolerance.to_f64_lossy(), worst_margin: worst, worst_r }
    }
}

/// Envelope comparison on one annulus.
#[derive(Clone, Debug, Serialize)]
pub struct AnnulusReport {
    pub r: f64,
    pub sup_norm: f64,
    pub omega: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub annuli: Vec<AnnulusReport>,
    pub pass: bool,
    pub tolerance: f64,
    pub worst_margin: f64,
    pub worst_r: f64,
}

/// Radii and directions at which coefficients are sampled.
#[derive(Clone, Debug)]
pub struct SamplePlan<T: Real> {
    /// Inner radii `r` of the dyadic annuli.
    pub radii: Vec<T>,
    /// Interior sample count per annulus (endpoints are added just inside).
    pub per_annulus: usize,
    dirs: Vec<Point<T>>,
}

/// Quasi-uniform unit vectors on a Fibonacci lattice, augmented with the coordinate axes and
/// face diagonals so that patterns with extrema along symmetry directions are resolved.
pub fn fibonacci_sphere<T: Real>(count: usize) -> Vec<Point<T>> {
    let mut out = Vec::with_capacity(count + 18);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for k in 0..count {
        let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
        let rho = (1.0 - z * z).sqrt();
        let phi = golden * k as f64;
        out.push([T::lit(rho * phi.cos()), T::lit(rho * phi.sin()), T::lit(z)]);
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let extra: [[f64; 3]; 18] = [
        [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
        [h, h, 0.0], [h, -h, 0.0], [-h, h, 0.0], [-h, -h, 0.0], [h, 0.0, h], [h, 0.0, -h],
        [-h, 0.0, h], [-h, 0.0, -h], [0.0, h, h], [0.0, h, -h], [0.0, -h, h], [0.0, -h, -h],
    ];
    out.extend(extra.iter().map(|e| e.map(T::lit)));
    out
}

impl<T: Real> SamplePlan<T> {
    /// Log-spaced annuli from `r_min` up to just below 1.
    pub fn new(r_min: T, per_decade: usize, per_annulus: usize, n_dirs: usize) -> Self {
        let decades = -r_min.log10();
        let count = ((decades * T::from_usize_lossy(per_decade)).ceil().to_f64_lossy() as usize).max(1) + 1;
        let top = T::lit(0.999_999);
        let (a, b) = (r_min.ln(), top.ln());
        let radii = (0..count)
            .map(|i| (a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(count - 1)).exp())
            .collect();
        Self { radii, per_annulus, dirs: fibonacci_sphere(n_dirs) }
    }

    pub fn standard() -> Self {
        Self::new(T::lit(1e-5), 10, 8, 96)
    }

    pub fn directions(&self) -> &[Point<T>] {
        &self.dirs
    }

    /// Radii sampled inside `(r, 2r)`, including points just inside both ends.
    pub fn annulus_radii(&self, r: T) -> Vec<T> {
        let m = self.per_annulus.max(1);
        let two = T::lit(2.0);
        let mut out = vec![r * (T::one() + T::lit(1e-12))];
        for k in 0..m {
            let t = (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(m);
            out.push(r * two.powf(t));
        }
        out.push(two * r * (T::one() - T::lit(1e-12)));
        // resolve jumps at the unit sphere from inside
        if r < T::one() && two * r > T::one() {
            out.push(T::one() - T::lit(1e-12));
        }
        out
    }

    fn dense_radii(&self) -> Vec<T> {
        self.radii.iter().flat_map(|&r| self.annulus_radii(r)).filter(|&r| r < T::one()).collect()
    }

    fn outer_radii(&self) -> Vec<T> {
        [1.0, 1.0 + 1e-9, 1.5, 2.0, 5.0, 10.0].iter().map(|&v| T::lit(v)).collect()
    }
}

/// Coefficient samples ingested from CSV, evaluated by nearest sample.
pub struct Table<T: Real> {
    points: Vec<Point<T>>,
    values: Vec<CMat3<T>>,
    cells: usize,
    buckets: Vec<Vec<usize>>,
}

impl<T: Real> Table<T> {
    /// Reads rows `x1, x2, x3, re11, im11, re12, im12, re13, im13, re22, im22, re23, im23, re33, im33`.
    ///
    /// The first row is treated as a header when its first field is not numeric.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if line == 0 && rec.get(0).map(|f| f.parse::<f64>().is_err()).unwrap_or(false) {
                continue;
            }
            if rec.len() != 15 {
                return Err(Error::Validation(format!("coefficient table row {} has {} columns, expected 15", line + 1, rec.len())));
            }
            let mut nums = [0.0f64; 15];
            for (k, f) in rec.iter().enumerate() {
                nums[k] = f
                    .parse()
                    .map_err(|_| Error::Validation(format!("coefficient table row {}: cannot parse '{f}'", line + 1)))?;
            }
            let x = [T::lit(nums[0]), T::lit(nums[1]), T::lit(nums[2])];
            let mut packed = [Complex::new(T::zero(), T::zero()); 6];
            for (c, p) in packed.iter_mut().enumerate() {
                *p = Complex::new(T::lit(nums[3 + 2 * c]), T::lit(nums[4 + 2 * c]));
            }
            points.push(x);
            values.push(linalg::unpack(&packed));
        }
        Self::from_samples(points, values)
    }

    pub fn from_samples(points: Vec<Point<T>>, values: Vec<CMat3<T>>) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::Validation("coefficient table is empty or inconsistent".into()));
        }
        for v in &values {
            if !linalg::is_symmetric(v, T::zero()) {
                return Err(Error::Validation("coefficient table contains a non-symmetric matrix".into()));
            }
        }
        let cells = ((points.len() as f64).cbrt().ceil() as usize).clamp(1, 64);
        let mut buckets = vec![Vec::new(); cells * cells * cells];
        let mut t = Self { points, values, cells, buckets: Vec::new() };
        for (i, p) in t.points.iter().enumerate() {
            buckets[t.bucket_of(p)].push(i);
        }
        t.buckets = buckets;
        Ok(t)
    }

    fn cell_coord(&self, v: T) -> usize {
        let c = ((v + T::one()) / T::lit(2.0) * T::from_usize_lossy(self.cells)).floor().to_f64_lossy();
        (c.max(0.0) as usize).min(self.cells - 1)
    }

    fn bucket_of(&self, p: &Point<T>) -> usize {
        let (i, j, k) = (self.cell_coord(p[0]), self.cell_coord(p[1]), self.cell_coord(p[2]));
        (i * self.cells + j) * self.cells + k
    }

    /// Value at the nearest stored sample (identity outside `B₁`).
    pub fn nearest(&self, x: &Point<T>) -> CMat3<T> {
        if norm3(x) >= T::one() {
            return linalg::identity();
        }
        let c = [self.cell_coord(x[0]) as isize, self.cell_coord(x[1]) as isize, self.cell_coord(x[2]) as isize];
        let n = self.cells as isize;
        let mut best: Option<(T, usize)> = None;
        let cell_w = T::lit(2.0) / T::from_usize_lossy(self.cells);
        for shell in 0..n {
            for di in -shell..=shell {
                for dj in -shell..=shell {
                    for dk in -shell..=shell {
                        if di.abs().max(dj.abs()).max(dk.abs()) != shell {
                            continue;
                        }
                        let (i, j, k) = (c[0] + di, c[1] + dj, c[2] + dk);
                        if i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n {
                            continue;
                        }
                        for &idx in &self.buckets[((i * n + j) * n + k) as usize] {
                            let p = &self.points[idx];
                            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2);
                            if best.map(|b| d < b.0).unwrap_or(true) {
                                best = Some((d, idx));
                            }
                        }
                    }
                }
            }
            // any point in a farther shell is at least `shell` cells away
            if let Some((d, _)) = best {
                let reach = cell_w * T::from_usize_lossy(shell as usize);
                if d <= reach * reach {
                    break;
                }
            }
        }
        best.map(|(_, i)| self.values[i]).unwrap_or_else(linalg::identity)
    }
}
