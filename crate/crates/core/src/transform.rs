//! Type-I discrete sine transforms on tensor grids.
//!
//! The DST-I of a length-`m` sequence is
//! `X_k = sum_{j=1}^{m} x_j sin(pi j k / (m+1))`, `k = 1..m`.
//! It is computed by embedding the odd extension of the input into a
//! complex FFT of length `2(m+1)`. All lengths are supported (rustfft
//! falls back to Bluestein for awkward sizes); powers of two are fastest.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex, OnceLock};

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

fn plan(len: usize) -> Arc<dyn Fft<f64>> {
    let mut planner = PLANNER
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .expect("fft planner poisoned");
    planner.plan_fft_forward(len)
}

/// Unnormalized DST-I. Input and output have the same length.
pub fn dst1(input: &[f64]) -> Vec<f64> {
    let m = input.len();
    if m == 0 {
        return Vec::new();
    }
    let n_fft = 2 * (m + 1);
    let fft = plan(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for (j, &x) in input.iter().enumerate() {
        buf[j + 1].re = x;
        buf[n_fft - 1 - j].re = -x;
    }
    fft.process(&mut buf);
    // FFT of the odd extension has purely imaginary entries -2i X_k.
    (1..=m).map(|k| -0.5 * buf[k].im).collect()
}

/// Shape of a rank-<=3 tensor; unused trailing axes are 1.
pub type Shape = [usize; 3];

pub fn total_len(shape: &Shape) -> usize {
    shape[0] * shape[1] * shape[2]
}

/// Applies `line_op` to every line of `data` along `axis`, resizing that
/// axis from `shape[axis]` to `out_len`. Layout is row-major (last axis
/// contiguous). Returns the transformed tensor and its shape.
pub fn transform_axis<F>(
    data: &[f64],
    shape: &Shape,
    axis: usize,
    out_len: usize,
    mut line_op: F,
) -> (Vec<f64>, Shape)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let in_len = shape[axis];
    debug_assert_eq!(total_len(shape), data.len());

    let mut out_shape = *shape;
    out_shape[axis] = out_len;

    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();

    let mut out = vec![0.0; total_len(&out_shape)];
    let mut in_line = vec![0.0; in_len];
    let mut out_line = vec![0.0; out_len];

    for o in 0..outer {
        for i in 0..inner {
            let in_base = o * in_len * inner + i;
            let out_base = o * out_len * inner + i;
            for (j, slot) in in_line.iter_mut().enumerate() {
                *slot = data[in_base + j * inner];
            }
            line_op(&in_line, &mut out_line);
            for (j, &v) in out_line.iter().enumerate() {
                out[out_base + j * inner] = v;
            }
        }
    }
    (out, out_shape)
}

/// DST-I synthesis of a zero-padded coefficient line onto `out.len()` grid
/// points: `out_j = sum_k line_k sin(pi (j+1)(k+1) / (out.len()+1))`.
pub fn synth_line(line: &[f64], out: &mut [f64]) {
    let m = out.len();
    debug_assert!(line.len() <= m);
    let mut padded = vec![0.0; m];
    padded[..line.len()].copy_from_slice(line);
    out.copy_from_slice(&dst1(&padded));
}

/// DST-I analysis of a grid line, keeping the first `out.len()` modes.
/// The caller applies the `2/(m+1)` orthogonality factor.
pub fn analyze_line(line: &[f64], out: &mut [f64]) {
    let t = dst1(line);
    out.copy_from_slice(&t[..out.len()]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dst1_naive(input: &[f64]) -> Vec<f64> {
        let m = input.len();
        (1..=m)
            .map(|k| {
                input
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        x * (std::f64::consts::PI * ((j + 1) * k) as f64 / (m + 1) as f64).sin()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_transform() {
        for m in [1, 2, 3, 4, 7, 8, 15, 16, 31, 48] {
            let input: Vec<f64> = (0..m).map(|j| ((j * 37 + 11) % 19) as f64 - 9.0).collect();
            let fast = dst1(&input);
            let naive = dst1_naive(&input);
            for (a, b) in fast.iter().zip(&naive) {
                assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn involution_up_to_scale() {
        // DST-I is its own inverse up to 2/(m+1).
        let input = vec![0.3, -1.2, 2.5, 0.0, 4.1, -0.7, 1.0];
        let m = input.len();
        let twice = dst1(&dst1(&input));
        for (a, b) in twice.iter().zip(&input) {
            assert_relative_eq!(a * 2.0 / (m as f64 + 1.0), b, epsilon = 1e-12);
        }
    }

    #[test]
    fn axis_transform_matches_manual_2d() {
        // 2x3 tensor, expand axis 1 from 3 to 5 via synthesis.
        let data = vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0];
        let shape = [2, 3, 1];
        let (out, out_shape) = transform_axis(&data, &shape, 1, 5, synth_line);
        assert_eq!(out_shape, [2, 5, 1]);
        for row in 0..2 {
            let line = &data[row * 3..row * 3 + 3];
            let mut expect = vec![0.0; 5];
            synth_line(line, &mut expect);
            for j in 0..5 {
                assert_relative_eq!(out[row * 5 + j], expect[j], epsilon = 1e-12);
            }
        }
    }
}
