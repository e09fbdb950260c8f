use std::collections::BTreeMap;

use num_complex::Complex;

use super::sphere::SphereRule;
use crate::scalar::{Cx, Point, Real};

/// Homogeneous polynomial in `(x, y, z)` with `f64` coefficients, keyed by exponents.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(BTreeMap<[u32; 3], f64>);

impl Poly {
    pub fn zero() -> Self {
        Self(BTreeMap::new())
    }

    pub fn monomial(e: [u32; 3], c: f64) -> Self {
        let mut m = BTreeMap::new();
        if c != 0.0 {
            m.insert(e, c);
        }
        Self(m)
    }

    fn add_scaled(&mut self, other: &Poly, s: f64) {
        for (e, c) in &other.0 {
            let v = self.0.entry(*e).or_insert(0.0);
            *v += s * c;
        }
        self.0.retain(|_, c| *c != 0.0);
    }

    fn mul_monomial(&self, e: [u32; 3], s: f64) -> Poly {
        Poly(self.0.iter().map(|(k, c)| ([k[0] + e[0], k[1] + e[1], k[2] + e[2]], c * s)).collect())
    }

    fn mul_r2(&self) -> Poly {
        let mut out = self.mul_monomial([2, 0, 0], 1.0);
        out.add_scaled(&self.mul_monomial([0, 2, 0], 1.0), 1.0);
        out.add_scaled(&self.mul_monomial([0, 0, 2], 1.0), 1.0);
        out
    }

    /// Partial derivative in coordinate `axis`.
    pub fn diff(&self, axis: usize) -> Poly {
        let mut out = BTreeMap::new();
        for (e, c) in &self.0 {
            if e[axis] > 0 {
                let mut k = *e;
                k[axis] -= 1;
                *out.entry(k).or_insert(0.0) += c * e[axis] as f64;
            }
        }
        Poly(out)
    }

    pub fn eval(&self, p: &[f64; 3]) -> f64 {
        self.0
            .iter()
            .map(|(e, c)| c * p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32) * p[2].powi(e[2] as i32))
            .sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32; 3], &f64)> {
        self.0.iter()
    }
}

/// Index of the real harmonic `(l, m)`, `−l ≤ m ≤ l`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Number of harmonics with degree `≤ l_max`.
pub fn harmonic_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// `(l, m)` pairs in index order.
pub fn lm_pairs(l_max: usize) -> Vec<(usize, i64)> {
    let mut v = Vec::with_capacity(harmonic_count(l_max));
    for l in 0..=l_max {
        for m in -(l as i64)..=(l as i64) {
            v.push((l, m));
        }
    }
    v
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn double_factorial_odd(m: usize) -> f64 {
    // (2m − 1)!!
    (1..=m).map(|k| (2 * k - 1) as f64).product()
}

/// Normalization turning `Re/Im R_l^m` (built from `(x+iy)^m` by the three-term recurrence)
/// into an orthonormal real harmonic on the unit sphere.
pub fn normalization(l: usize, m: usize) -> f64 {
    let lf = (2 * l + 1) as f64;
    if m == 0 {
        (lf / (4.0 * std::f64::consts::PI)).sqrt()
    } else {
        let ratio = (ln_factorial(l + m) - ln_factorial(l - m)).exp();
        double_factorial_odd(m) / (std::f64::consts::PI * 2.0 / lf * ratio).sqrt()
    }
}

/// Orthonormal real solid harmonics `R_lm(x)` (homogeneous of degree `l`) as exact polynomials.
pub fn solid_harmonics(l_max: usize) -> Vec<Poly> {
    let mut out = vec![Poly::zero(); harmonic_count(l_max)];
    for m in 0..=l_max {
        // (x + i y)^m
        let (mut re, mut im) = (Poly::monomial([0, 0, 0], 1.0), Poly::zero());
        for _ in 0..m {
            let nre = {
                let mut a = re.mul_monomial([1, 0, 0], 1.0);
                a.add_scaled(&im.mul_monomial([0, 1, 0], 1.0), -1.0);
                a
            };
            let nim = {
                let mut a = im.mul_monomial([1, 0, 0], 1.0);
                a.add_scaled(&re.mul_monomial([0, 1, 0], 1.0), 1.0);
                a
            };
            re = nre;
            im = nim;
        }
        let (mut prev_re, mut prev_im) = (Poly::zero(), Poly::zero());
        let (mut cur_re, mut cur_im) = (re, im);
        for l in m..=l_max {
            let c = normalization(l, m);
            if m == 0 {
                let mut p = Poly::zero();
                p.add_scaled(&cur_re, c);
                out[lm_index(l, 0)] = p;
            } else {
                let mut pr = Poly::zero();
                pr.add_scaled(&cur_re, c);
                let mut pi = Poly::zero();
                pi.add_scaled(&cur_im, c);
                out[lm_index(l, m as i64)] = pr;
                out[lm_index(l, -(m as i64))] = pi;
            }
            let a = (2 * l + 1) as f64 / (l - m + 1) as f64;
            let b = (l + m) as f64 / (l - m + 1) as f64;
            let mut nre = cur_re.mul_monomial([0, 0, 1], a);
            nre.add_scaled(&prev_re.mul_r2(), -b);
            let mut nim = cur_im.mul_monomial([0, 0, 1], a);
            nim.add_scaled(&prev_im.mul_r2(), -b);
            prev_re = std::mem::replace(&mut cur_re, nre);
            prev_im = std::mem::replace(&mut cur_im, nim);
        }
    }
    out
}

/// Values of all orthonormal real harmonics with degree `≤ l_max` at the unit vector `θ`.
///
/// Uses the same recurrence and normalization as [`solid_harmonics`], evaluated numerically.
pub fn eval_harmonics<T: Real>(l_max: usize, th: &Point<T>, out: &mut Vec<T>) {
    out.clear();
    out.resize(harmonic_count(l_max), T::zero());
    let (x, y, z) = (th[0], th[1], th[2]);
    let r2 = x * x + y * y + z * z;
    let xy = Complex::new(x, y);
    let mut seed = Complex::new(T::one(), T::zero());
    for m in 0..=l_max {
        let mut prev = Complex::new(T::zero(), T::zero());
        let mut cur = seed;
        for l in m..=l_max {
            let c = T::lit(normalization(l, m));
            if m == 0 {
                out[lm_index(l, 0)] = cur.re * c;
            } else {
                out[lm_index(l, m as i64)] = cur.re * c;
                out[lm_index(l, -(m as i64))] = cur.im * c;
            }
            let a = T::lit((2 * l + 1) as f64 / (l - m + 1) as f64);
            let b = T::lit((l + m) as f64 / (l - m + 1) as f64);
            let next = cur * (a * z) - prev * (b * r2);
            prev = cur;
            cur = next;
        }
        seed *= xy;
    }
}

/// Harmonic values, gradients and Hessians tabulated at the nodes of a sphere rule.
#[derive(Clone, Debug)]
pub struct HarmonicTables<T: Real> {
    l_max: usize,
    nq: usize,
    /// `Y[idx·nq + q]`.
    pub y: Vec<T>,
    /// `w_q·Y[idx·nq + q]` (analysis weights).
    pub wy: Vec<T>,
    /// Gradient of the solid harmonic at the node, `[idx·nq + q][axis]`.
    pub grad: Vec<[T; 3]>,
    /// Packed Hessian of the solid harmonic at the node, `[idx·nq + q][pair]`.
    pub hess: Vec<[T; 6]>,
}

impl<T: Real> HarmonicTables<T> {
    pub fn new(l_max: usize, rule: &SphereRule<T>) -> Self {
        let polys = solid_harmonics(l_max);
        let nq = rule.len();
        let nh = polys.len();
        let pts: Vec<[f64; 3]> = rule.nodes().iter().map(|p| p.map(|v| v.to_f64_lossy())).collect();
        let mut y = vec![T::zero(); nh * nq];
        let mut wy = vec![T::zero(); nh * nq];
        let mut grad = vec![[T::zero(); 3]; nh * nq];
        let mut hess = vec![[T::zero(); 6]; nh * nq];
        for (h, p) in polys.iter().enumerate() {
            let d: [Poly; 3] = [p.diff(0), p.diff(1), p.diff(2)];
            let dd: [Poly; 6] = [d[0].diff(0), d[0].diff(1), d[0].diff(2), d[1].diff(1), d[1].diff(2), d[2].diff(2)];
            for (q, pt) in pts.iter().enumerate() {
                let v = p.eval(pt);
                y[h * nq + q] = T::lit(v);
                wy[h * nq + q] = T::lit(v) * rule.weights()[q];
                grad[h * nq + q] = [T::lit(d[0].eval(pt)), T::lit(d[1].eval(pt)), T::lit(d[2].eval(pt))];
                let mut hh = [T::zero(); 6];
                for c in 0..6 {
                    hh[c] = T::lit(dd[c].eval(pt));
                }
                hess[h * nq + q] = hh;
            }
        }
        Self { l_max, nq, y, wy, grad, hess }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn count(&self) -> usize {
        harmonic_count(self.l_max)
    }

    /// Harmonic coefficients of node values on one sphere.
    pub fn analyze(&self, values: &[Cx<T>], out: &mut [Cx<T>]) {
        let nq = self.nq;
        for (h, o) in out.iter_mut().enumerate() {
            let row = &self.wy[h * nq..(h + 1) * nq];
            let mut acc = Complex::new(T::zero(), T::zero());
            for q in 0..nq {
                acc += values[q] * row[q];
            }
            *o = acc;
        }
    }

    /// Node values from harmonic coefficients.
    pub fn synthesize(&self, coeffs: &[Cx<T>], out: &mut [Cx<T>]) {
        let nq = self.nq;
        for o in out.iter_mut() {
            *o = Complex::new(T::zero(), T::zero());
        }
        for (h, c) in coeffs.iter().enumerate() {
            if c.re == T::zero() && c.im == T::zero() {
                continue;
            }
            let row = &self.y[h * nq..(h + 1) * nq];
            for q in 0..nq {
                out[q] += *c * row[q];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout() {
        let pairs = lm_pairs(4);
        for (i, &(l, m)) in pairs.iter().enumerate() {
            assert_eq!(lm_index(l, m), i);
        }
    }

    #[test]
    fn orthonormal_under_exact_rule() {
        let l_max = 6;
        let rule = SphereRule::<f64>::gauss_product(2 * l_max + 2);
        let tab = HarmonicTables::new(l_max, &rule);
        let nh = tab.count();
        let nq = rule.len();
        for a in 0..nh {
            for b in 0..nh {
                let s: f64 = (0..nq).map(|q| tab.wy[a * nq + q] * tab.y[b * nq + q]).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "({a},{b}) -> {s}");
            }
        }
    }

    #[test]
    fn solid_harmonics_are_harmonic() {
        for p in solid_harmonics(7) {
            let lap = {
                let mut a = p.diff(0).diff(0);
                a.add_scaled(&p.diff(1).diff(1), 1.0);
                a.add_scaled(&p.diff(2).diff(2), 1.0);
                a
            };
            assert!(lap.terms().all(|(_, c)| c.abs() < 1e-9));
        }
    }

    #[test]
    fn numeric_evaluation_matches_polynomials() {
        let l_max = 9;
        let polys = solid_harmonics(l_max);
        let th = [0.36f64, -0.48, 0.8];
        let mut vals = Vec::new();
        eval_harmonics(l_max, &th, &mut vals);
        for (h, p) in polys.iter().enumerate() {
            assert!((p.eval(&th) - vals[h]).abs() < 1e-12);
        }
    }

    #[test]
    fn known_low_order_values() {
        let th = [0.6f64, 0.0, 0.8];
        let mut v = Vec::new();
        eval_harmonics(1, &th, &mut v);
        let c0 = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
        let c1 = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        assert!((v[0] - c0).abs() < 1e-15);
        assert!((v[lm_index(1, 0)] - c1 * 0.8).abs() < 1e-15);
        assert!((v[lm_index(1, 1)] - c1 * 0.6).abs() < 1e-15);
        assert!(v[lm_index(1, -1)].abs() < 1e-15);
    }

    #[test]
    fn analysis_synthesis_roundtrip() {
        let l_max = 5;
        let rule = SphereRule::<f64>::gauss_product(2 * l_max + 4);
        let tab = HarmonicTables::new(l_max, &rule);
        let mut c = vec![Complex::new(0.0, 0.0); tab.count()];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
        }
        let mut vals = vec![Complex::new(0.0, 0.0); rule.len()];
        tab.synthesize(&c, &mut vals);
        let mut back = vec![Complex::new(0.0, 0.0); tab.count()];
        tab.analyze(&vals, &mut back);
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
