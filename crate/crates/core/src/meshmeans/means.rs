use serde::Serialize;

use super::field::AnnularField;
use crate::error::{domain, Result};
use crate::modulus::ModulusOmega;
use crate::scalar::{Cx, Real};

fn sphere_power_sums<T: Real>(field: &AnnularField<T>, p: T) -> Vec<T> {
    let mesh = field.mesh();
    let w = mesh.sphere.weights();
    let two = T::lit(2.0);
    (0..mesh.nr())
        .map(|i| {
            field
                .row(i)
                .iter()
                .zip(w)
                .map(|(v, &wq)| {
                    let a = if p == two { v.norm_sqr() } else { v.norm().powf(p) };
                    a * wq
                })
                .sum()
        })
        .collect()
}

fn annulus_mean<T: Real>(field: &AnnularField<T>, s: usize, e: usize, p: T) -> T {
    let mesh = field.mesh();
    let g = sphere_power_sums(field, p);
    let ones = vec![mesh.sphere.area(); mesh.nr()];
    let rule = mesh.volume_rule();
    let (mut num, mut den) = (T::zero(), T::zero());
    for k in s..e {
        num += rule.cell(k, &g);
        den += rule.cell(k, &ones);
    }
    (num / den).max(T::zero()).powf(p.recip())
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if !(p >= T::one()) || !p.is_finite() {
        return domain(format!("mean exponent must lie in [1, inf), got {p}"));
    }
    Ok(())
}

/// `M_p(w, r)`: the `L^p` mean over `r < |x| < 2r`, with `r` snapped to the nearest grid level.
pub fn p_mean<T: Real>(field: &AnnularField<T>, r: T, p: T) -> Result<T> {
    p_mean_snapped(field, r, p).map(|(v, _)| v)
}

/// [`p_mean`] together with the log-snapping error `|ln(r_snap/r)|`.
pub fn p_mean_snapped<T: Real>(field: &AnnularField<T>, r: T, p: T) -> Result<(T, T)> {
    check_p(p)?;
    let g = &field.mesh().radial;
    let (j, err) = g.snap(r)?;
    let m = g.per_octave() as i64;
    let (s, e) = g.level_range(j, m)?;
    Ok((annulus_mean(field, s, e, p), err))
}

/// `M̃_p(w, r)`: the `L^p` mean over `r/2 < |x| < 4r`.
pub fn tilde_p_mean<T: Real>(field: &AnnularField<T>, r: T, p: T) -> Result<T> {
    check_p(p)?;
    let g = &field.mesh().radial;
    let (j, _) = g.snap(r)?;
    let m = g.per_octave() as i64;
    let (s, e) = g.level_range(j - m, 3 * m)?;
    Ok(annulus_mean(field, s, e, p))
}

/// `M_p(w, r_i)` at every node whose annulus `[r_i, 2r_i]` fits on the grid (`None` otherwise).
///
/// Both copies of the breakpoint report the annulus `[1, 2]`.
pub fn mp_profile<T: Real>(field: &AnnularField<T>, p: T) -> Vec<Option<T>> {
    let mesh = field.mesh();
    let g = &mesh.radial;
    let m = g.per_octave() as i64;
    let gp = sphere_power_sums(field, p);
    let ones = vec![mesh.sphere.area(); mesh.nr()];
    let rule = mesh.volume_rule();
    let mut num = vec![T::zero(); mesh.nr()];
    let mut den = vec![T::zero(); mesh.nr()];
    for k in 0..g.cells() {
        num[k + 1] = num[k] + rule.cell(k, &gp);
        den[k + 1] = den[k] + rule.cell(k, &ones);
    }
    let inv_p = p.recip();
    (0..mesh.nr())
        .map(|i| {
            let j = g.level(i);
            match (g.start_index(j), g.end_index(j + m)) {
                (Some(s), Some(e)) => Some(((num[e] - num[s]) / (den[e] - den[s])).max(T::zero()).powf(inv_p)),
                _ => None,
            }
        })
        .collect()
}

/// Area-normalized spherical mean at radial node `i`.
pub fn sphere_mean<T: Real>(field: &AnnularField<T>, i: usize) -> Result<Cx<T>> {
    let mesh = field.mesh();
    if i >= mesh.nr() {
        return domain(format!("radial node {i} out of range"));
    }
    Ok(mesh.sphere.mean(field.row(i)))
}

/// Spherical mean at an arbitrary radius, by monotone cubic interpolation of the node means.
pub fn sphere_mean_at<T: Real>(field: &AnnularField<T>, r: T) -> Result<Cx<T>> {
    field.sphere_means().interpolate(r)
}

/// The two suprema making up the X-norm.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct XNormParts {
    pub inner: f64,
    pub outer: f64,
}

impl XNormParts {
    pub fn total(&self) -> f64 {
        self.inner + self.outer
    }
}

fn ratio<T: Real>(num: T, den: T) -> T {
    if num == T::zero() {
        T::zero()
    } else if den == T::zero() {
        T::infinity()
    } else {
        num / den
    }
}

/// `sup_{r<1} M_p/Ω(r) + sup_{r>1} M_p/(√δ·r^{−n})` over grid nodes.
///
/// Nodes with a vanishing weight and vanishing mean contribute 0; a vanishing weight with a
/// positive mean yields `+∞`.
pub fn x_norm<T: Real>(field: &AnnularField<T>, modulus: &ModulusOmega<T>, delta: T, p: T) -> Result<XNormParts> {
    check_p(p)?;
    if delta < T::zero() {
        return domain(format!("X-norm needs delta >= 0, got {delta}"));
    }
    let mesh = field.mesh();
    let g = &mesh.radial;
    let prof = mp_profile(field, p);
    let sq = delta.sqrt();
    let n = mesh.dim() as i32;
    let (mut inner, mut outer) = (T::zero(), T::zero());
    for (i, mp) in prof.iter().enumerate() {
        let Some(mp) = *mp else { continue };
        let r = g.r(i);
        if i < g.inner_break() {
            inner = inner.max(ratio(mp, modulus.at(r)));
        } else if i > g.outer_break() {
            outer = outer.max(ratio(mp, sq * r.powi(-n)));
        }
    }
    Ok(XNormParts { inner: inner.to_f64_lossy(), outer: outer.to_f64_lossy() })
}
