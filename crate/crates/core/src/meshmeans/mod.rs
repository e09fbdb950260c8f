//! Product meshes, sphere quadrature, annular `L^p` means, spherical means and the weighted X-norm.

mod field;
mod grid;
mod harmonics;
mod means;
mod sphere;

pub use field::{AnnularField, FieldInterpolator, MatrixField, Mesh, MeshRef, MeshSpec, RadialProfile};
pub use grid::{lagrange4, Anchor, CellRule, RadialGrid};
pub use harmonics::{eval_harmonics, harmonic_count, lm_index, lm_pairs, normalization, solid_harmonics, HarmonicTables, Poly};
pub use means::{mp_profile, p_mean, p_mean_snapped, sphere_mean, sphere_mean_at, tilde_p_mean, x_norm, XNormParts};
pub use sphere::{gamma_fn, sphere_area, SphereRule};
