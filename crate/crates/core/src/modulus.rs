//! Stabilization moduli `Ω(r)` and the admissibility conditions they must satisfy.
//!
//! A modulus bounds `|a(x) − I|` on dyadic annuli `r < |x| < 2r`. It vanishes for `r ≥ 1`
//! and must satisfy the Dini condition `∫₀¹ Ω²(t)/t dt < ∞` together with two monotonicity
//! conditions: `Ω(r)·r^{ε−1}` nonincreasing and `Ω(r)·r^{n−ε}` nondecreasing on `(0, 1)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::quad;
use crate::scalar::Real;

/// User-supplied modulus evaluator.
pub type OmegaFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Built-in modulus families.
#[derive(Clone)]
pub enum OmegaFamily<T: Real> {
    /// `Ω ≡ 0`.
    Zero,
    /// `κ·(log(e/r))^{−s}`.
    Log { kappa: T, s: T },
    /// `κ·r^α`.
    Power { kappa: T, alpha: T },
    /// Dyadic envelope of the log profile: the supremum of `κ·(log(e/ρ))^{−s}` over
    /// `ρ ∈ (r, min(2r, 1))`, raised where needed so that `Ω(r)·r^{ε−1}` is nonincreasing.
    ///
    /// For `r < 1/2` this is `κ·max((log(e/2r))^{−s}, (2r)^{1−ε})`; on `[1/2, 1)` it is `κ`.
    DyadicLog { kappa: T, s: T },
    /// Pointwise sum of moduli.
    Sum(Vec<OmegaFamily<T>>),
    /// Arbitrary evaluator; the caller is responsible for `Ω = 0` on `r ≥ 1` (enforced on evaluation).
    Custom { label: String, f: OmegaFn<T> },
}

impl<T: Real> fmt::Debug for OmegaFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OmegaFamily::Zero => write!(f, "Zero"),
            OmegaFamily::Log { kappa, s } => write!(f, "Log {{ kappa: {kappa}, s: {s} }}"),
            OmegaFamily::Power { kappa, alpha } => write!(f, "Power {{ kappa: {kappa}, alpha: {alpha} }}"),
            OmegaFamily::DyadicLog { kappa, s } => write!(f, "DyadicLog {{ kappa: {kappa}, s: {s} }}"),
            OmegaFamily::Sum(parts) => f.debug_tuple("Sum").field(parts).finish(),
            OmegaFamily::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// An admissible-candidate stabilization modulus with its `ε`.
#[derive(Clone, Debug)]
pub struct ModulusOmega<T: Real> {
    family: OmegaFamily<T>,
    epsilon: T,
}

/// Outcome of [`ModulusOmega::check_conditions`].
#[derive(Clone, Debug, Serialize)]
pub struct OmegaReport {
    /// `∫₀¹ Ω²(t)/t dt`, resolved part plus tail (may be `+∞`).
    pub dini_delta: f64,
    /// Part of `dini_delta` integrated over the grid span.
    pub dini_resolved: f64,
    /// Estimate of `∫₀^{r_lo} Ω²(t)/t dt` below the first grid node.
    pub dini_tail: f64,
    /// Whether the tail estimate is a closed form (`true`) or an extrapolation.
    pub tail_analytic: bool,
    pub om2_holds: bool,
    pub om3_holds: bool,
    pub sup_omega: f64,
    pub sqrt_delta_bound_ok: bool,
    pub c_chk: f64,
    pub delta_threshold: f64,
    pub admissible: bool,
    /// Human-readable reasons for rejection (empty when admissible).
    pub reasons: Vec<String>,
}

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// `log(e/r) = 1 − ln r`.
#[inline]
pub fn log_e_over<T: Real>(r: T) -> T {
    T::one() - r.ln()
}

impl<T: Real> OmegaFamily<T> {
    fn eval_below_one(&self, r: T, eps: T) -> T {
        match self {
            OmegaFamily::Zero => T::zero(),
            OmegaFamily::Log { kappa, s } => *kappa * log_e_over(r).powf(-*s),
            OmegaFamily::Power { kappa, alpha } => *kappa * r.powf(*alpha),
            OmegaFamily::DyadicLog { kappa, s } => {
                let half = lit::<T>(0.5);
                if r >= half {
                    *kappa
                } else {
                    let two_r = r + r;
                    let logpart = log_e_over(two_r).powf(-*s);
                    let powpart = two_r.powf(T::one() - eps);
                    *kappa * logpart.max(powpart)
                }
            }
            OmegaFamily::Sum(parts) => parts.iter().map(|p| p.eval_below_one(r, eps)).sum(),
            OmegaFamily::Custom { f, .. } => f(r),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            OmegaFamily::Zero | OmegaFamily::Custom { .. } => Ok(()),
            OmegaFamily::Log { kappa, s } | OmegaFamily::DyadicLog { kappa, s } => {
                if !(*kappa >= T::zero()) || !kappa.is_finite() {
                    return Err(Error::Validation(format!("modulus amplitude must be finite and nonnegative, got {kappa}")));
                }
                if !(*s > T::zero()) {
                    return Err(Error::Validation(format!("log exponent s must be positive, got {s}")));
                }
                Ok(())
            }
            OmegaFamily::Power { kappa, alpha } => {
                if !(*kappa >= T::zero()) || !kappa.is_finite() {
                    return Err(Error::Validation(format!("modulus amplitude must be finite and nonnegative, got {kappa}")));
                }
                if !(*alpha > T::zero()) {
                    return Err(Error::Validation(format!("power exponent must be positive, got {alpha}")));
                }
                Ok(())
            }
            OmegaFamily::Sum(parts) => parts.iter().try_for_each(|p| p.validate()),
        }
    }

    /// Closed-form `∫_lo^hi Ω²(t)/t dt`, when one exists.
    fn dini_closed(&self, lo: T, hi: T) -> Option<T> {
        match self {
            OmegaFamily::Zero => Some(T::zero()),
            OmegaFamily::Log { kappa, s } => {
                let (wl, wh) = (log_e_over(lo), log_e_over(hi));
                let e = T::one() - lit::<T>(2.0) * *s;
                let k2 = *kappa * *kappa;
                if e.abs() < lit(1e-12) {
                    Some(k2 * (wl / wh).ln())
                } else {
                    Some(k2 * (wl.powf(e) - wh.powf(e)) / e)
                }
            }
            OmegaFamily::Power { kappa, alpha } => {
                let two_a = lit::<T>(2.0) * *alpha;
                Some(*kappa * *kappa * (hi.powf(two_a) - lo.powf(two_a)) / two_a)
            }
            _ => None,
        }
    }

    /// Closed-form `∫₀^r Ω²(t)/t dt` for `r ≤ 1`, when one exists (`+∞` if divergent).
    fn tail_closed(&self, r: T, eps: T) -> Option<T> {
        match self {
            OmegaFamily::Zero => Some(T::zero()),
            OmegaFamily::Log { kappa, s } => {
                let k2 = *kappa * *kappa;
                if k2 == T::zero() {
                    return Some(T::zero());
                }
                let e = lit::<T>(2.0) * *s - T::one();
                if e <= T::zero() {
                    Some(T::infinity())
                } else {
                    Some(k2 * log_e_over(r).powf(-e) / e)
                }
            }
            OmegaFamily::Power { kappa, alpha } => {
                let two_a = lit::<T>(2.0) * *alpha;
                Some(*kappa * *kappa * r.powf(two_a) / two_a)
            }
            OmegaFamily::DyadicLog { kappa, s } => {
                if *kappa == T::zero() {
                    return Some(T::zero());
                }
                if r > lit(0.25) {
                    return None;
                }
                // Below r the integrand is κ²·max(A, B)² with A the log part and B the power part;
                // A² + B² bounds it and both integrate in closed form.
                let e = lit::<T>(2.0) * *s - T::one();
                if e <= T::zero() {
                    return Some(T::infinity());
                }
                let k2 = *kappa * *kappa;
                let two_r = r + r;
                let logpart = log_e_over(two_r).powf(-e) / e;
                let q = lit::<T>(2.0) * (T::one() - eps);
                let powpart = two_r.powf(q) / q;
                Some(k2 * (logpart + powpart))
            }
            OmegaFamily::Sum(_) | OmegaFamily::Custom { .. } => None,
        }
    }
}

impl<T: Real> ModulusOmega<T> {
    /// Builds a modulus, validating parameters and `ε ∈ (0, 1)`.
    pub fn new(family: OmegaFamily<T>, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(Error::Validation(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        family.validate()?;
        Ok(Self { family, epsilon })
    }

    pub fn zero() -> Self {
        Self { family: OmegaFamily::Zero, epsilon: lit(0.2) }
    }

    pub fn log(kappa: T, s: T, epsilon: T) -> Result<Self> {
        Self::new(OmegaFamily::Log { kappa, s }, epsilon)
    }

    pub fn power(kappa: T, alpha: T, epsilon: T) -> Result<Self> {
        Self::new(OmegaFamily::Power { kappa, alpha }, epsilon)
    }

    pub fn dyadic_log(kappa: T, s: T, epsilon: T) -> Result<Self> {
        Self::new(OmegaFamily::DyadicLog { kappa, s }, epsilon)
    }

    pub fn custom(label: impl Into<String>, f: OmegaFn<T>, epsilon: T) -> Result<Self> {
        Self::new(OmegaFamily::Custom { label: label.into(), f }, epsilon)
    }

    /// Pointwise sum of two moduli; keeps the smaller `ε`.
    pub fn sum(a: &Self, b: &Self) -> Self {
        let mut parts = Vec::new();
        for m in [a, b] {
            match &m.family {
                OmegaFamily::Zero => {}
                OmegaFamily::Sum(ps) => parts.extend(ps.iter().cloned()),
                other => parts.push(other.clone()),
            }
        }
        let family = match parts.len() {
            0 => OmegaFamily::Zero,
            1 => parts.pop().expect("one part"),
            _ => OmegaFamily::Sum(parts),
        };
        Self { family, epsilon: a.epsilon.min(b.epsilon) }
    }

    pub fn family(&self) -> &OmegaFamily<T> {
        &self.family
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, OmegaFamily::Zero)
    }

    /// Family parameters as name/value pairs.
    pub fn params(&self) -> Vec<(String, f64)> {
        fn collect<T: Real>(fam: &OmegaFamily<T>, prefix: &str, out: &mut Vec<(String, f64)>) {
            match fam {
                OmegaFamily::Zero => {}
                OmegaFamily::Log { kappa, s } | OmegaFamily::DyadicLog { kappa, s } => {
                    out.push((format!("{prefix}kappa"), kappa.to_f64_lossy()));
                    out.push((format!("{prefix}s"), s.to_f64_lossy()));
                }
                OmegaFamily::Power { kappa, alpha } => {
                    out.push((format!("{prefix}kappa"), kappa.to_f64_lossy()));
                    out.push((format!("{prefix}alpha"), alpha.to_f64_lossy()));
                }
                OmegaFamily::Sum(parts) => {
                    for (i, p) in parts.iter().enumerate() {
                        collect(p, &format!("{prefix}{i}."), out);
                    }
                }
                OmegaFamily::Custom { .. } => {}
            }
        }
        let mut out = vec![("epsilon".to_string(), self.epsilon.to_f64_lossy())];
        collect(&self.family, "", &mut out);
        out
    }

    /// `Ω(r)`; exactly zero for `r ≥ 1`.
    pub fn eval(&self, r: T) -> Result<T> {
        if !(r > T::zero()) {
            return domain(format!("modulus evaluated at nonpositive radius {r}"));
        }
        Ok(self.at(r))
    }

    /// `Ω(r)` without the domain check; `r` must be positive.
    #[inline]
    pub fn at(&self, r: T) -> T {
        if r >= T::one() {
            T::zero()
        } else {
            self.family.eval_below_one(r, self.epsilon).max(T::zero())
        }
    }

    /// `∫_{r_lo}^{r_hi} Ω²(t)/t dt` for `0 < r_lo < r_hi ≤ 1`.
    pub fn dini_integral(&self, r_lo: T, r_hi: T) -> Result<T> {
        if !(r_lo > T::zero()) || r_hi > T::one() {
            return domain(format!("Dini integral bounds must satisfy 0 < r_lo < r_hi <= 1, got [{r_lo}, {r_hi}]"));
        }
        if r_lo > r_hi {
            return domain(format!("reversed Dini integral bounds [{r_lo}, {r_hi}]"));
        }
        if r_lo == r_hi {
            return Ok(T::zero());
        }
        if let Some(v) = self.family.dini_closed(r_lo, r_hi) {
            return Ok(v);
        }
        Ok(self.dini_numeric(r_lo, r_hi))
    }

    fn dini_numeric(&self, r_lo: T, r_hi: T) -> T {
        // integrate in u = ln t so that dt/t = du; split at 1/2 where envelopes have kinks
        let mut cuts = vec![r_lo.ln(), r_hi.ln()];
        let half = lit::<T>(0.5);
        if r_lo < half && half < r_hi {
            cuts.insert(1, half.ln());
        }
        let mut acc = T::zero();
        for w in cuts.windows(2) {
            acc += quad::integrate_real(
                |u: T| {
                    let o = self.at(u.exp());
                    o * o
                },
                w[0],
                w[1],
                lit(1e-15),
                lit(1e-12),
            );
        }
        acc
    }

    /// Estimate of `∫₀^r Ω²(t)/t dt` and whether it is a closed form.
    ///
    /// Without a closed form, `Ω²` is extrapolated below `r` as `C·(log(e/t))^{−2σ}` with `σ`
    /// fitted from `Ω(r)` and `Ω(r/2)`; `σ ≤ 1/2` yields `+∞`.
    pub fn dini_tail(&self, r: T) -> (T, bool) {
        let r = r.min(T::one());
        if let Some(v) = self.family.tail_closed(r, self.epsilon) {
            return (v, true);
        }
        let o1 = self.at(r);
        if o1 == T::zero() {
            let o2 = self.at(r / lit(2.0));
            if o2 == T::zero() {
                return (T::zero(), false);
            }
            return (T::infinity(), false);
        }
        let o2 = self.at(r / lit(2.0));
        let (w1, w2) = (log_e_over(r), log_e_over(r / lit(2.0)));
        let sigma = (o2 / o1).ln() / (w1 / w2).ln();
        let e = lit::<T>(2.0) * sigma - T::one();
        if !(e > T::zero()) || !sigma.is_finite() {
            return (T::infinity(), false);
        }
        (o1 * o1 * w1 / e, false)
    }

    /// `∫₀^r Ω²(t)/t dt` for `0 < r ≤ 1`; used by the ζ bound.
    pub fn dini_from_zero(&self, r: T) -> T {
        let r = r.min(T::one());
        if let Some(v) = self.family.tail_closed(r, self.epsilon) {
            return v;
        }
        let floor = lit::<T>(1e-8).min(r / lit(2.0));
        let resolved = self.dini_numeric(floor, r);
        resolved + self.dini_tail(floor).0
    }

    /// `∫_r^1 Ω(s)/s ds` for `0 < r ≤ 1`.
    pub fn log_integral(&self, r: T) -> T {
        if r >= T::one() {
            return T::zero();
        }
        match &self.family {
            OmegaFamily::Zero => T::zero(),
            OmegaFamily::Log { kappa, s } => {
                let w = log_e_over(r);
                let e = T::one() - *s;
                if e.abs() < lit(1e-12) {
                    *kappa * w.ln()
                } else {
                    *kappa * (w.powf(e) - T::one()) / e
                }
            }
            OmegaFamily::Power { kappa, alpha } => *kappa * (T::one() - r.powf(*alpha)) / *alpha,
            _ => {
                let half = lit::<T>(0.5);
                let mut cuts = vec![r.ln(), T::zero()];
                if r < half {
                    cuts.insert(1, half.ln());
                }
                let mut acc = T::zero();
                for w in cuts.windows(2) {
                    acc += quad::integrate_real(|u: T| self.at(u.exp()), w[0], w[1], lit(1e-15), lit(1e-12));
                }
                acc
            }
        }
    }

    /// `C_chk = (∫_{1/2}^1 t^{1−2ε} dt)^{−1/2}`.
    pub fn c_chk(&self) -> T {
        let q = lit::<T>(2.0) - lit::<T>(2.0) * self.epsilon;
        let integral = (T::one() - lit::<T>(0.5).powf(q)) / q;
        integral.sqrt().recip()
    }

    /// Scans the monotonicity conditions on `grid`, computes `δ` with its tail, and decides admissibility.
    pub fn check_conditions(&self, grid: &[T], n: usize, delta_threshold: T) -> Result<OmegaReport> {
        if grid.is_empty() {
            return domain("modulus check grid is empty");
        }
        if grid.iter().any(|&r| !(r > T::zero() && r < T::one())) {
            return domain("modulus check grid must lie in (0, 1)");
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return domain("modulus check grid must be strictly increasing");
        }
        let eps = self.epsilon;
        let nn = T::from_usize_lossy(n);
        let slack = lit::<T>(1e-12);
        let vals: Vec<T> = grid.iter().map(|&r| self.at(r)).collect();
        let om2: Vec<T> = grid.iter().zip(&vals).map(|(&r, &o)| o * r.powf(eps - T::one())).collect();
        let om3: Vec<T> = grid.iter().zip(&vals).map(|(&r, &o)| o * r.powf(nn - eps)).collect();
        let om2_holds = om2.windows(2).all(|w| w[1] <= w[0] * (T::one() + slack) + T::min_positive_value());
        let om3_holds = om3.windows(2).all(|w| w[1] * (T::one() + slack) >= w[0]);
        let sup_omega = vals.iter().fold(T::zero(), |m, &v| m.max(v));
        let resolved = self.dini_integral(grid[0], T::one())?;
        let (tail, tail_analytic) = self.dini_tail(grid[0]);
        let dini_delta = resolved + tail;
        let c_chk = self.c_chk();
        let sqrt_delta_bound_ok = dini_delta.is_finite() && sup_omega <= c_chk * dini_delta.sqrt() * (T::one() + slack);

        let mut reasons = Vec::new();
        if !dini_delta.is_finite() {
            reasons.push("Dini integral of Omega^2/t diverges at the origin".to_string());
        } else if dini_delta > delta_threshold {
            reasons.push(format!(
                "Dini integral {:.6e} exceeds the smallness threshold {:.6e}",
                dini_delta.to_f64_lossy(),
                delta_threshold.to_f64_lossy()
            ));
        }
        if !om2_holds {
            reasons.push("Omega(r) r^(eps-1) is not nonincreasing on the grid".to_string());
        }
        if !om3_holds {
            reasons.push("Omega(r) r^(n-eps) is not nondecreasing on the grid".to_string());
        }
        Ok(OmegaReport {
            dini_delta: dini_delta.to_f64_lossy(),
            dini_resolved: resolved.to_f64_lossy(),
            dini_tail: tail.to_f64_lossy(),
            tail_analytic,
            om2_holds,
            om3_holds,
            sup_omega: sup_omega.to_f64_lossy(),
            sqrt_delta_bound_ok,
            c_chk: c_chk.to_f64_lossy(),
            delta_threshold: delta_threshold.to_f64_lossy(),
            admissible: reasons.is_empty(),
            reasons,
        })
    }
}

/// Geometric sample of `(0, 1)` with `count` points from `r_lo` up to just below 1.
pub fn log_check_grid<T: Real>(r_lo: T, count: usize) -> Vec<T> {
    let count = count.max(2);
    let top = T::one() - lit::<T>(1e-9).max(lit::<T>(4.0) * T::epsilon());
    let (a, b) = (r_lo.ln(), top.ln());
    (0..count)
        .map(|i| (a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(count - 1)).exp())
        .collect()
}
