use crate::quad::gauss_legendre;
use crate::scalar::{Point, Real};

/// Product rule on the unit sphere: Gauss–Legendre in `cos ϑ` times a uniform azimuthal rule.
///
/// With `⌊d/2⌋ + 1` polar and `d + 1` azimuthal nodes it integrates all polynomials of
/// degree `≤ d` exactly.
#[derive(Clone, Debug)]
pub struct SphereRule<T: Real> {
    nodes: Vec<Point<T>>,
    weights: Vec<T>,
    degree: usize,
    n_theta: usize,
    n_phi: usize,
}

impl<T: Real> SphereRule<T> {
    pub fn gauss_product(degree: usize) -> Self {
        let n_theta = degree / 2 + 1;
        let n_phi = degree + 1;
        let (z, wz) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        for (zi, wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            for k in 0..n_phi {
                // half-step offset keeps nodes off the coordinate planes
                let phi = dphi * (k as f64 + 0.5);
                nodes.push([T::lit(s * phi.cos()), T::lit(s * phi.sin()), T::lit(*zi)]);
                weights.push(T::lit(wi * dphi));
            }
        }
        Self { nodes, weights, degree, n_theta, n_phi }
    }

    pub fn nodes(&self) -> &[Point<T>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_theta, self.n_phi)
    }

    /// `|∂B₁| = 4π`.
    pub fn area(&self) -> T {
        T::lit(4.0) * T::PI()
    }

    /// Area-normalized mean of node values.
    pub fn mean<V>(&self, values: &[V]) -> V
    where
        V: Copy + std::ops::Mul<T, Output = V> + std::ops::Add<Output = V> + std::ops::Div<T, Output = V>,
    {
        let mut acc = values[0] * self.weights[0];
        for q in 1..self.len() {
            acc = acc + values[q] * self.weights[q];
        }
        acc / self.area()
    }
}

/// Area of the unit sphere in `n` dimensions, `2π^{n/2}/Γ(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_fn(half)
}

/// Gamma function for positive half-integers and integers (exact recursion).
pub fn gamma_fn(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(twice >= 1.0 && (2.0 * x - twice).abs() < 1e-12, "gamma_fn supports positive half-integers, got {x}");
    let mut v = if (twice as i64) % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut t = if (twice as i64) % 2 == 0 { 1.0 } else { 0.5 };
    while t < x - 1e-12 {
        v *= t;
        t += 1.0;
    }
    v
}
