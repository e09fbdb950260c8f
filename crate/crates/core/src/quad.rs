//! One-dimensional quadrature: Gauss–Legendre nodes and an adaptive Gauss–Kronrod integrator.

use num_complex::Complex;

use crate::scalar::{Cx, Real};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on<T: Real>(n: usize, a: T, b: T) -> Vec<(T, T)> {
    let (x, w) = gauss_legendre(n);
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * T::lit(xi), half * T::lit(wi)))
        .collect()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real, F: Fn(T) -> Cx<T>>(f: &F, a: T, b: T) -> (Cx<T>, T) {
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    let fc = f(mid);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kron += s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += s * T::lit(WG[j / 2]);
        }
    }
    let kron = kron * half;
    let gauss = gauss * half;
    (kron, (kron - gauss).norm())
}

/// Adaptive 15-point Gauss–Kronrod quadrature of a complex integrand on `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed estimate
/// is below `max(abs_tol, rel_tol·|I|)` or the interval budget is spent.
pub fn integrate<T: Real, F: Fn(T) -> Cx<T>>(f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> Cx<T> {
    if a == b {
        return Complex::new(T::zero(), T::zero());
    }
    let mut parts: Vec<(T, T, Cx<T>, T)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    parts.push((a, b, v, e));
    for _ in 0..4000 {
        let total: Cx<T> = parts.iter().fold(Complex::new(T::zero(), T::zero()), |acc, p| acc + p.2);
        let err: T = parts.iter().fold(T::zero(), |acc, p| acc + p.3);
        if err <= abs_tol.max(rel_tol * total.norm()) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, -T::one()), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let m = (lo + hi) / T::lit(2.0);
        let (v1, e1) = gk15(&f, lo, m);
        let (v2, e2) = gk15(&f, m, hi);
        parts.push((lo, m, v1, e1));
        parts.push((m, hi, v2, e2));
    }
    parts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    parts.iter().fold(Complex::new(T::zero(), T::zero()), |acc, p| acc + p.2)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> T {
    integrate(|x| Complex::new(f(x), T::zero()), a, b, abs_tol, rel_tol).re
}

/// `∫_a^∞ f(x) dx` through the substitution `x = a + t/(1−t)`.
pub fn integrate_to_infinity<T: Real, F: Fn(T) -> Cx<T>>(f: F, a: T, abs_tol: T, rel_tol: T) -> Cx<T> {
    let one = T::one();
    integrate(
        |t: T| {
            if t >= one {
                return Complex::new(T::zero(), T::zero());
            }
            let s = one - t;
            f(a + t / s) / (s * s)
        },
        T::zero(),
        one,
        abs_tol,
        rel_tol,
    )
}
