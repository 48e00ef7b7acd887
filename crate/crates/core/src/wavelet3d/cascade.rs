//! Discrete cascade iterates of the refinement equation.
//!
//! Level-`q` profiles are piecewise constant on cells of width `2^-q` and
//! span `[0, L_s + 1)` in lattice units, i.e. `(L_s + 1) 2^q` cells. Shifts
//! at integer lattice units stay exactly orthonormal under the discrete
//! inner product `2^-q sum a_k b_k`.

use super::filter::Filter1D;

/// Convolves `c` with `f` upsampled by `stride`, scaled by sqrt 2.
fn refine_step(c: &[f64], f: &[f64], stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; c.len() + (f.len() - 1) * stride];
    for (l, &fl) in f.iter().enumerate() {
        if fl == 0.0 {
            continue;
        }
        let a = std::f64::consts::SQRT_2 * fl;
        let off = l * stride;
        for (m, &cm) in c.iter().enumerate() {
            out[off + m] += a * cm;
        }
    }
    out
}

/// Profile of the scaling function (`wavelet = false`) or the mother wavelet
/// at refinement depth `q`, normalised to unit L2 norm on the real line.
pub fn cascade_profile(filter: &Filter1D, q: u32, wavelet: bool) -> Vec<f64> {
    assert!(!wavelet || q >= 1, "wavelet profile needs at least one refinement");
    let h = &filter.lowpass_taps;
    let g = filter.highpass_taps();
    // cell values of the level-0 box are 1; each step halves cell width
    let mut c = vec![1.0];
    for k in 0..q {
        let f = if wavelet && k == q - 1 { &g } else { h };
        c = refine_step(&c, f, 1 << k);
    }
    let full = filter.len() << q;
    c.resize(full, 0.0);
    c
}

/// Discrete inner product of two profiles at depth `q` shifted by `shift`
/// lattice units: `2^-q sum a_k b_{k - shift 2^q}`.
pub fn profile_inner(a: &[f64], b: &[f64], q: u32, shift: i64) -> f64 {
    let off = shift * (1i64 << q);
    let mut s = 0.0;
    for (k, &av) in a.iter().enumerate() {
        let kb = k as i64 - off;
        if kb >= 0 && (kb as usize) < b.len() {
            s += av * b[kb as usize];
        }
    }
    s / (1u64 << q) as f64
}
