use crate::error::{domain, Error, Result};
use crate::quad::gauss_legendre;
use crate::scalar::Real;

/// Where the exponential weight of a [`CellRule`] is anchored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    /// `e^{αu}`.
    Origin,
    /// `e^{α(u − u_k)}` for the cell `[u_k, u_{k+1}]`.
    Left,
    /// `e^{α(u − u_{k+1})}`.
    Right,
}

/// Per-cell quadrature of `∫ f(u)·e^{α(u − anchor)} du` with `f` interpolated by a cubic
/// through four neighbouring nodes of the same segment.
#[derive(Clone, Debug)]
pub struct CellRule<T: Real> {
    /// First stencil node of each cell.
    pub start: Vec<usize>,
    /// Weights of the four stencil nodes.
    pub w: Vec<[T; 4]>,
}

impl<T: Real> CellRule<T> {
    /// Integral over cell `k` of the interpolant of `values`.
    #[inline]
    pub fn cell<V>(&self, k: usize, values: &[V]) -> V
    where
        V: Copy + std::ops::Mul<T, Output = V> + std::ops::Add<Output = V>,
    {
        let s = self.start[k];
        let w = &self.w[k];
        values[s] * w[0] + values[s + 1] * w[1] + values[s + 2] * w[2] + values[s + 3] * w[3]
    }
}

/// Geometric radial grid `r_j = 2^{j/m}` with the unit radius duplicated as a breakpoint.
///
/// The node just inside the breakpoint carries one-sided limits from `r < 1`, the node at
/// exactly 1 carries the values for `r ≥ 1`; interpolation stencils never straddle it.
/// Because `m` nodes span each octave, `2r` is a node whenever `r` is.
#[derive(Clone, Debug)]
pub struct RadialGrid<T: Real> {
    nodes: Vec<T>,
    u: Vec<T>,
    level: Vec<i64>,
    per_octave: usize,
    j_min: i64,
    j_max: i64,
    inner_break: usize,
}

impl<T: Real> RadialGrid<T> {
    /// Grid covering `[r_min, r_max]` (outward-rounded to whole levels) with roughly
    /// `nodes_per_decade` nodes per decade, snapped so that each octave holds an integer count.
    pub fn new(r_min: T, r_max: T, nodes_per_decade: usize) -> Result<Self> {
        if !(r_min > T::zero()) || !(r_min < T::one()) || !(r_max > T::one()) {
            return Err(Error::Validation(format!("radial grid needs 0 < r_min < 1 < r_max, got [{r_min}, {r_max}]")));
        }
        let m = ((nodes_per_decade as f64) * std::f64::consts::LOG10_2).round().max(4.0) as usize;
        Self::with_per_octave(r_min, r_max, m)
    }

    pub fn with_per_octave(r_min: T, r_max: T, per_octave: usize) -> Result<Self> {
        if per_octave < 4 {
            return Err(Error::Validation("radial grid needs at least 4 nodes per octave".into()));
        }
        let m = per_octave as f64;
        let j_min = (r_min.to_f64_lossy().log2() * m - 1e-9).floor() as i64;
        let j_max = (r_max.to_f64_lossy().log2() * m + 1e-9).ceil() as i64;
        if -j_min < 3 || j_max < 3 {
            return Err(Error::Validation("radial grid segments need at least 4 nodes on each side of r = 1".into()));
        }
        let h = T::LN_2() / T::from_usize_lossy(per_octave);
        let mut nodes = Vec::new();
        let mut u = Vec::new();
        let mut level = Vec::new();
        let mut inner_break = 0;
        for j in j_min..=j_max {
            let uj = h * T::lit(j as f64);
            if j == 0 {
                let inner = T::one() - T::lit(64.0) * T::epsilon();
                inner_break = nodes.len();
                nodes.push(inner);
                u.push(inner.ln());
                level.push(0);
            }
            nodes.push(if j == 0 { T::one() } else { uj.exp() });
            u.push(uj);
            level.push(j);
        }
        Ok(Self { nodes, u, level, per_octave, j_min, j_max, inner_break })
    }

    /// Same span with `2^k` times as many nodes per octave.
    pub fn refined(&self, k: u32) -> Result<Self> {
        let f = 1usize << k;
        Self::with_per_octave(self.nodes[0], *self.nodes.last().expect("nonempty"), self.per_octave * f)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// `ln r` at each node.
    pub fn log_nodes(&self) -> &[T] {
        &self.u
    }

    pub fn r(&self, i: usize) -> T {
        self.nodes[i]
    }

    pub fn per_octave(&self) -> usize {
        self.per_octave
    }

    pub fn r_min(&self) -> T {
        self.nodes[0]
    }

    pub fn r_max(&self) -> T {
        *self.nodes.last().expect("nonempty")
    }

    /// Log-spacing `ln 2 / m`.
    pub fn h(&self) -> T {
        T::LN_2() / T::from_usize_lossy(self.per_octave)
    }

    /// Index of the node just inside `r = 1`.
    pub fn inner_break(&self) -> usize {
        self.inner_break
    }

    /// Index of the node at exactly `r = 1`.
    pub fn outer_break(&self) -> usize {
        self.inner_break + 1
    }

    /// Whether node `i` represents a radius inside the unit ball.
    pub fn is_inner(&self, i: usize) -> bool {
        i <= self.inner_break
    }

    pub fn level(&self, i: usize) -> i64 {
        self.level[i]
    }

    /// Node index where an interval starting at `level` begins (outer copy at the breakpoint).
    pub fn start_index(&self, level: i64) -> Option<usize> {
        if level < self.j_min || level > self.j_max {
            return None;
        }
        Some(if level < 0 { (level - self.j_min) as usize } else { (level - self.j_min) as usize + 1 })
    }

    /// Node index where an interval ending at `level` stops (inner copy at the breakpoint).
    pub fn end_index(&self, level: i64) -> Option<usize> {
        if level < self.j_min || level > self.j_max {
            return None;
        }
        Some(if level <= 0 { (level - self.j_min) as usize } else { (level - self.j_min) as usize + 1 })
    }

    /// Nearest level to `r` and the log-snapping error `|ln(r_snap / r)|`.
    pub fn snap(&self, r: T) -> Result<(i64, T)> {
        if !(r > T::zero()) {
            return domain(format!("radius must be positive, got {r}"));
        }
        let x = r.ln() / self.h();
        let j = x.round().to_f64_lossy() as i64;
        let err = (x - T::lit(j as f64)).abs() * self.h();
        Ok((j, err))
    }

    /// The annulus `[r_j, r_{j+span}]` as a node range, or a domain error outside the grid span.
    pub fn level_range(&self, j: i64, span: i64) -> Result<(usize, usize)> {
        let (a, b) = (j, j + span);
        match (self.start_index(a), self.end_index(b)) {
            (Some(s), Some(e)) if s < e => Ok((s, e)),
            _ => domain(format!(
                "annulus levels [{a}, {b}] lie outside the grid span [{}, {}]",
                self.j_min, self.j_max
            )),
        }
    }

    /// Segment `[first, last]` containing cell `k` (nodes `k`, `k+1`), or `None` for the zero-width breakpoint cell.
    fn segment_of_cell(&self, k: usize) -> Option<(usize, usize)> {
        if k == self.inner_break {
            None
        } else if k < self.inner_break {
            Some((0, self.inner_break))
        } else {
            Some((self.inner_break + 1, self.nodes.len() - 1))
        }
    }

    /// Number of cells (`len − 1`, including the zero-width breakpoint cell).
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Whether cell `k` is the zero-width breakpoint cell.
    pub fn is_break_cell(&self, k: usize) -> bool {
        k == self.inner_break
    }

    /// First stencil node of the cubic used on cell `k`.
    pub fn stencil_start(&self, k: usize) -> usize {
        match self.segment_of_cell(k) {
            Some((a, b)) => ((k as i64 - 1).clamp(a as i64, b as i64 - 3)) as usize,
            None => k.saturating_sub(1),
        }
    }

    /// Cell quadrature for `∫ f(u)·e^{α(u − anchor)} du` using six Gauss points per cell.
    pub fn cell_rule(&self, alpha: T, anchor: Anchor) -> CellRule<T> {
        let (gx, gw) = gauss_legendre(6);
        let nc = self.cells();
        let mut start = Vec::with_capacity(nc);
        let mut w = Vec::with_capacity(nc);
        for k in 0..nc {
            let s = self.stencil_start(k);
            start.push(s);
            if self.is_break_cell(k) {
                w.push([T::zero(); 4]);
                continue;
            }
            let (ua, ub) = (self.u[k], self.u[k + 1]);
            let half = (ub - ua) / T::lit(2.0);
            let mid = (ua + ub) / T::lit(2.0);
            let uref = match anchor {
                Anchor::Origin => T::zero(),
                Anchor::Left => ua,
                Anchor::Right => ub,
            };
            let st = [self.u[s], self.u[s + 1], self.u[s + 2], self.u[s + 3]];
            let mut acc = [T::zero(); 4];
            for (x, wq) in gx.iter().zip(&gw) {
                let uq = mid + half * T::lit(*x);
                let ew = (alpha * (uq - uref)).exp() * half * T::lit(*wq);
                let l = lagrange4(&st, uq);
                for c in 0..4 {
                    acc[c] += l[c] * ew;
                }
            }
            w.push(acc);
        }
        CellRule { start, w }
    }

    /// Node weights for `∫ f(ρ) ρ^{n−1} dρ` over the whole grid.
    pub fn volume_weights(&self, n: usize) -> Vec<T> {
        self.node_weights(&self.cell_rule(T::from_usize_lossy(n), Anchor::Origin))
    }

    /// Node weights for `∫ f(ρ) dρ/ρ` over the whole grid.
    pub fn log_weights(&self) -> Vec<T> {
        self.node_weights(&self.cell_rule(T::zero(), Anchor::Origin))
    }

    fn node_weights(&self, rule: &CellRule<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for k in 0..self.cells() {
            for c in 0..4 {
                out[rule.start[k] + c] += rule.w[k][c];
            }
        }
        out
    }

    /// Stencil and cubic weights for interpolating at radius `r`, respecting the breakpoint side.
    pub fn interp_weights(&self, r: T) -> Result<(usize, [T; 4])> {
        if !(r >= self.nodes[0] && r <= self.r_max()) {
            return domain(format!("radius {r} outside the grid span [{}, {}]", self.nodes[0], self.r_max()));
        }
        let u = r.ln();
        let x = (u / self.h()).to_f64_lossy();
        let j = x.floor() as i64;
        let cell = if r < T::one() {
            let idx = (j - self.j_min) as usize;
            idx.min(self.inner_break.saturating_sub(1))
        } else {
            let idx = (j.max(0) - self.j_min) as usize + 1;
            idx.min(self.len() - 2)
        };
        let s = self.stencil_start(cell);
        let st = [self.u[s], self.u[s + 1], self.u[s + 2], self.u[s + 3]];
        Ok((s, lagrange4(&st, u)))
    }

    /// Stable hash input describing the grid.
    pub fn describe(&self) -> String {
        format!(
            "radial:m={},j=[{},{}],r=[{:.17e},{:.17e}]",
            self.per_octave,
            self.j_min,
            self.j_max,
            self.nodes[0].to_f64_lossy(),
            self.r_max().to_f64_lossy()
        )
    }
}

/// Lagrange basis of the cubic through four abscissae, evaluated at `x`.
pub fn lagrange4<T: Real>(s: &[T; 4], x: T) -> [T; 4] {
    let mut out = [T::one(); 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                out[i] *= (x - s[j]) / (s[i] - s[j]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid<f64> {
        RadialGrid::new(1e-4, 20.0, 60).unwrap()
    }

    #[test]
    fn octave_snapping_contains_unit_and_doubles() {
        let g = grid();
        assert_eq!(g.per_octave(), 18);
        assert_eq!(g.r(g.outer_break()), 1.0);
        assert!(g.r(g.inner_break()) < 1.0 && g.r(g.inner_break()) > 1.0 - 1e-12);
        for i in 0..g.len() {
            let j = g.level(i);
            if let Some(k) = g.start_index(j + 18) {
                if i != g.inner_break() {
                    assert!((g.r(k) / g.r(i) - 2.0).abs() < 1e-12);
                }
            }
        }
        assert!(g.r_min() <= 1e-4 && g.r_max() >= 20.0);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn volume_weights_exact_for_powers() {
        let g = grid();
        let w = g.volume_weights(3);
        assert!(w.iter().all(|&x| x > 0.0));
        let vol: f64 = w.iter().sum();
        let exact = (g.r_max().powi(3) - g.r_min().powi(3)) / 3.0;
        assert!((vol / exact - 1.0).abs() < 1e-12);
        let q: f64 = w.iter().zip(g.nodes()).map(|(w, r)| w * r * r).sum();
        let exact = (g.r_max().powi(5) - g.r_min().powi(5)) / 5.0;
        assert!((q / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_weights_integrate_smooth_logs() {
        let g = grid();
        let w = g.log_weights();
        let q: f64 = w.iter().zip(g.log_nodes()).map(|(w, u)| w * u.cos()).sum();
        let exact = g.r_max().ln().sin() - g.r_min().ln().sin();
        assert!((q - exact).abs() < 1e-6);
    }

    #[test]
    fn anchored_rules_agree() {
        let g = grid();
        let left = g.cell_rule(5.0, Anchor::Left);
        let right = g.cell_rule(5.0, Anchor::Right);
        let f: Vec<f64> = g.log_nodes().iter().map(|u| (0.3 * u).sin()).collect();
        for k in [3usize, 100, 250] {
            let h = g.log_nodes()[k + 1] - g.log_nodes()[k];
            let a = left.cell(k, &f);
            let b = right.cell(k, &f) * (5.0 * h).exp();
            assert!((a - b).abs() < 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let exact = |a: f64, b: f64| (b.powf(3.5) - a.powf(3.5)) / 3.5;
        let mut errs = Vec::new();
        for npd in [30usize, 60, 120] {
            let g = RadialGrid::<f64>::new(1e-3, 8.0, npd).unwrap();
            let w = g.volume_weights(3);
            // f = sqrt(r): smooth in u, integrand r^{2.5}
            let q: f64 = w.iter().zip(g.nodes()).map(|(w, r)| w * r.sqrt()).sum();
            errs.push((q - exact(g.r_min(), g.r_max())).abs() / q);
        }
        assert!(errs[0] / errs[1] > 8.0 && errs[1] / errs[2] > 11.0, "{errs:?}");
    }

    #[test]
    fn interpolation_respects_breakpoint() {
        let g = grid();
        let f: Vec<f64> = (0..g.len()).map(|i| if g.is_inner(i) { 2.0 } else { 5.0 }).collect();
        let at = |r: f64| {
            let (s, w) = g.interp_weights(r).unwrap();
            (0..4).map(|c| w[c] * f[s + c]).sum::<f64>()
        };
        assert!((at(0.99) - 2.0).abs() < 1e-12);
        assert!((at(1.01) - 5.0).abs() < 1e-12);
        assert!((at(1.0) - 5.0).abs() < 1e-12);
        assert!(g.interp_weights(100.0).is_err());
    }

    #[test]
    fn level_ranges() {
        let g = grid();
        let (s, e) = g.level_range(0, 18).unwrap();
        assert_eq!(g.r(s), 1.0);
        assert!((g.r(e) - 2.0).abs() < 1e-12);
        let (s, e) = g.level_range(-18, 18).unwrap();
        assert!((g.r(s) - 0.5).abs() < 1e-12);
        assert_eq!(e, g.inner_break());
        assert!(g.level_range(100, 18).is_err());
    }
}
