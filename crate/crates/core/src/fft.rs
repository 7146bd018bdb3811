//! Exact-size 2-D discrete Fourier transforms.
//!
//! `fft2` is unnormalized, `ifft2` carries the `1/(rows*cols)` factor. The DC
//! bin sits at index (0, 0); bin `k` along an axis of length `n` corresponds
//! to the signed frequency returned by [`signed_frequency`].

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::image::ComplexImage;

/// Signed integer frequency of bin `k` on an axis of length `n`
/// (`0, 1, .., ceil(n/2)-1, -floor(n/2), .., -1`).
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

pub fn fft2(img: &ComplexImage) -> ComplexImage {
    transform(img, FftDirection::Forward)
}

pub fn ifft2(img: &ComplexImage) -> ComplexImage {
    let mut out = transform(img, FftDirection::Inverse);
    let scale = 1.0 / (img.rows() * img.cols()) as f64;
    out.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    out
}

fn transform(img: &ComplexImage, direction: FftDirection) -> ComplexImage {
    let (rows, cols) = img.dims();
    let mut planner = FftPlanner::<f64>::new();
    let mut data = img.as_slice().to_vec();

    let row_fft = planner.plan_fft(cols, direction);
    run(&*row_fft, &mut data);

    let col_fft = planner.plan_fft(rows, direction);
    let mut column = vec![Complex64::default(); rows];
    let mut scratch = vec![Complex64::default(); col_fft.get_inplace_scratch_len()];
    for x in 0..cols {
        for y in 0..rows {
            column[y] = data[y * cols + x];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for y in 0..rows {
            data[y * cols + x] = column[y];
        }
    }
    ComplexImage::from_raw(rows, cols, data)
}

fn run(fft: &dyn Fft<f64>, rows_data: &mut [Complex64]) {
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(rows_data, &mut scratch);
}
