//! Small dense matrix helpers: 3×3 complex symmetric matrices and real symmetric spectra.

use num_complex::Complex;

use crate::scalar::{Cx, Point, Real};

/// Full 3×3 complex matrix.
pub type CMat3<T> = [[Cx<T>; 3]; 3];

/// Upper triangle of a symmetric 3×3 matrix, ordered 11, 12, 13, 22, 23, 33.
pub type Sym3<T> = [Cx<T>; 6];

/// Index pairs of the packed upper triangle.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Multiplicity of each packed entry in a full contraction `Σ_ij`.
pub const PAIR_MULT: [f64; 6] = [1.0, 2.0, 2.0, 1.0, 2.0, 1.0];

pub fn identity<T: Real>() -> CMat3<T> {
    let mut m = [[Complex::new(T::zero(), T::zero()); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex::new(T::one(), T::zero());
    }
    m
}

pub fn pack<T: Real>(m: &CMat3<T>) -> Sym3<T> {
    PAIRS.map(|(i, j)| m[i][j])
}

pub fn unpack<T: Real>(s: &Sym3<T>) -> CMat3<T> {
    let mut m = [[Complex::new(T::zero(), T::zero()); 3]; 3];
    for (c, &(i, j)) in PAIRS.iter().enumerate() {
        m[i][j] = s[c];
        m[j][i] = s[c];
    }
    m
}

pub fn sub_identity<T: Real>(m: &CMat3<T>) -> CMat3<T> {
    let mut out = *m;
    for (i, row) in out.iter_mut().enumerate() {
        row[i] -= T::one();
    }
    out
}

pub fn trace<T: Real>(m: &CMat3<T>) -> Cx<T> {
    m[0][0] + m[1][1] + m[2][2]
}

/// `θᵀ M θ` for a real direction.
pub fn quad_form<T: Real>(m: &CMat3<T>, th: &Point<T>) -> Cx<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..3 {
        for j in 0..3 {
            acc += m[i][j] * (th[i] * th[j]);
        }
    }
    acc
}

/// Packed `m − I`.
pub fn sub_identity_sym<T: Real>(m: &Sym3<T>) -> Sym3<T> {
    let mut d = *m;
    for c in [0, 3, 5] {
        d[c].re -= T::one();
    }
    d
}

/// `θᵀ S θ` for a packed symmetric matrix.
pub fn quad_form_sym<T: Real>(s: &Sym3<T>, th: &Point<T>) -> Cx<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (c, &(i, j)) in PAIRS.iter().enumerate() {
        acc += s[c] * (th[i] * th[j] * T::lit(PAIR_MULT[c]));
    }
    acc
}

pub fn trace_sym<T: Real>(s: &Sym3<T>) -> Cx<T> {
    s[0] + s[3] + s[5]
}

pub fn is_symmetric<T: Real>(m: &CMat3<T>, tol: T) -> bool {
    (0..3).all(|i| (0..3).all(|j| (m[i][j] - m[j][i]).norm() <= tol))
}

/// Largest eigenvalue of a Hermitian 3×3 matrix via its real 6×6 embedding `[[Re, −Im], [Im, Re]]`.
///
/// The closed-form trigonometric solution loses half the digits at repeated eigenvalues,
/// which is exactly the situation for the projector-like coefficient perturbations.
fn hermitian_lambda_max<T: Real>(h: &CMat3<T>) -> T {
    let mut m = vec![vec![T::zero(); 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = h[i][j].re;
            m[i + 3][j + 3] = h[i][j].re;
            m[i][j + 3] = -h[i][j].im;
            m[i + 3][j] = h[i][j].im;
        }
    }
    *symmetric_eigenvalues(&m).last().expect("nonempty spectrum")
}

/// Spectral norm (largest singular value) of a complex 3×3 matrix.
pub fn spectral_norm<T: Real>(m: &CMat3<T>) -> T {
    let mut h = [[Complex::new(T::zero(), T::zero()); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..3 {
                acc += m[k][i].conj() * m[k][j];
            }
            h[i][j] = acc;
        }
    }
    hermitian_lambda_max(&h).max(T::zero()).sqrt()
}

pub fn spectral_norm_sym<T: Real>(s: &Sym3<T>) -> T {
    spectral_norm(&unpack(s))
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &[Vec<T>]) -> Vec<T> {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += m[i][i] * m[i][i];
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag.max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cx<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let mut m = identity::<f64>();
        m[0][0] = c(-3.0, 0.0);
        m[1][1] = c(0.0, 2.0);
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rank_one_projector() {
        // I - 3θθᵀ has eigenvalues {-2, 1, 1}
        let th = [0.6, 0.0, 0.8];
        let mut m = identity::<f64>();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] -= c(3.0 * th[i] * th[j], 0.0);
            }
        }
        assert!((spectral_norm(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_matches_off_diagonal_pair() {
        let mut m = [[c(0.0, 0.0); 3]; 3];
        m[0][1] = c(0.5, 0.0);
        m[1][0] = c(0.5, 0.0);
        assert!((spectral_norm(&m) - 0.5).abs() < 1e-12, "{}", spectral_norm(&m));
        m[0][1] = c(0.0, 0.5);
        m[1][0] = c(0.0, 0.5);
        assert!((spectral_norm(&m) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a: Vec<Vec<f64>> = vec![vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, -1.0]];
        let ev = symmetric_eigenvalues(&a);
        assert!((ev[0] + 1.0).abs() < 1e-13);
        assert!((ev[1] - 1.0).abs() < 1e-13);
        assert!((ev[2] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn pack_roundtrip_and_quad_form() {
        let mut m = identity::<f64>();
        m[0][2] = c(0.25, -0.1);
        m[2][0] = c(0.25, -0.1);
        let s = pack(&m);
        assert_eq!(unpack(&s), m);
        let th = [0.0, 0.6, 0.8];
        assert!((quad_form(&m, &th) - quad_form_sym(&s, &th)).norm() < 1e-15);
    }
}
