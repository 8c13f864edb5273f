//! Small helpers for dense complex vectors.

pub use num_complex::Complex64 as C64;

/// `f^H h`.
pub fn inner(f: &[C64], h: &[C64]) -> C64 {
    debug_assert_eq!(f.len(), h.len());
    f.iter().zip(h).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sqr(v).sqrt()
}

pub fn scaled(v: &[C64], s: f64) -> Vec<C64> {
    v.iter().map(|c| c * s).collect()
}

/// Unit-modulus phasor `e^{-j angle(z)}`; 1 when `z == 0`.
pub fn conj_phase(z: C64) -> C64 {
    let r = z.norm();
    if r > 0.0 {
        z.conj() / r
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}
