//! Layer kernels on channel-major `(C, H, W)` activations.
//!
//! Convolutions use "same" zero padding and run as `k*k` shifted GEMMs over a
//! padded input laid out with row pitch `W + 2p`. The output is produced on
//! the same pitch and cropped, which avoids materializing an im2col buffer.

/// A `(channels, height, width)` activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Act {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// Strided view of a matrix inside a slice.
#[derive(Clone, Copy)]
struct View {
    offset: usize,
    rs: usize,
    cs: usize,
}

impl View {
    fn last(&self, rows: usize, cols: usize) -> usize {
        self.offset + (rows - 1) * self.rs + (cols - 1) * self.cs
    }
}

/// `C = A (m x k) * B (k x n) + beta * C` on strided views.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], av: View, b: &[f64], bv: View, beta: f64, c: &mut [f64], cv: View) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(av.last(m, k) < a.len(), "A view out of bounds");
    assert!(bv.last(k, n) < b.len(), "B view out of bounds");
    assert!(cv.last(m, n) < c.len(), "C view out of bounds");
    // SAFETY: every element addressed by the three views was bounds-checked
    // above, and the C view addresses distinct elements (positive strides
    // with cs = 1 and rs >= n in all call sites, or transposed equivalents).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr().add(av.offset),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr().add(bv.offset),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr().add(cv.offset),
            cv.rs as isize,
            cv.cs as isize,
        );
    }
}

/// Zero-padded copy of `x` with pitch `w + 2p`, plus `k` slack elements so
/// the last shifted view stays in bounds.
fn pad(x: &Act, k: usize) -> Vec<f64> {
    let p = k / 2;
    let (hp, wp) = (x.h + 2 * p, x.w + 2 * p);
    let mut out = vec![0.0; x.c * hp * wp + k];
    for c in 0..x.c {
        for y in 0..x.h {
            let src = &x.data[c * x.plane() + y * x.w..][..x.w];
            let dst = c * hp * wp + (y + p) * wp + p;
            out[dst..dst + x.w].copy_from_slice(src);
        }
    }
    out
}

/// Same-padded convolution. `weight` is `[c_out, c_in, k, k]`, `bias` is `[c_out]`.
pub fn conv_forward(x: &Act, weight: &[f64], bias: &[f64], c_out: usize, k: usize) -> Act {
    let c_in = x.c;
    debug_assert_eq!(weight.len(), c_out * c_in * k * k);
    let p = k / 2;
    let wp = x.w + 2 * p;
    let plane_p = (x.h + 2 * p) * wp;
    let n = x.h * wp;
    let xpad = pad(x, k);
    let mut out_p = vec![0.0; c_out * n];
    for ky in 0..k {
        for kx in 0..k {
            gemm(
                c_out,
                c_in,
                n,
                weight,
                View { offset: ky * k + kx, rs: c_in * k * k, cs: k * k },
                &xpad,
                View { offset: ky * wp + kx, rs: plane_p, cs: 1 },
                1.0,
                &mut out_p,
                View { offset: 0, rs: n, cs: 1 },
            );
        }
    }
    let mut out = Act::zeros(c_out, x.h, x.w);
    for co in 0..c_out {
        for y in 0..x.h {
            let src = &out_p[co * n + y * wp..][..x.w];
            let dst = &mut out.data[co * x.h * x.w + y * x.w..][..x.w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s + bias[co];
            }
        }
    }
    out
}

/// Gradients of [`conv_forward`]: accumulates into `d_weight` and `d_bias`
/// and returns the input gradient when `need_input_grad` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    x: &Act,
    weight: &[f64],
    d_out: &Act,
    k: usize,
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    need_input_grad: bool,
) -> Option<Act> {
    let (c_in, c_out) = (x.c, d_out.c);
    let p = k / 2;
    let wp = x.w + 2 * p;
    let plane_p = (x.h + 2 * p) * wp;
    let n = x.h * wp;

    let mut dout_p = vec![0.0; c_out * n];
    for co in 0..c_out {
        let mut sum = 0.0;
        for y in 0..x.h {
            let src = &d_out.data[co * x.h * x.w + y * x.w..][..x.w];
            dout_p[co * n + y * wp..][..x.w].copy_from_slice(src);
            sum += src.iter().sum::<f64>();
        }
        d_bias[co] += sum;
    }

    let xpad = pad(x, k);
    for ky in 0..k {
        for kx in 0..k {
            gemm(
                c_out,
                n,
                c_in,
                &dout_p,
                View { offset: 0, rs: n, cs: 1 },
                &xpad,
                View { offset: ky * wp + kx, rs: 1, cs: plane_p },
                1.0,
                d_weight,
                View { offset: ky * k + kx, rs: c_in * k * k, cs: k * k },
            );
        }
    }

    if !need_input_grad {
        return None;
    }
    let mut dx_p = vec![0.0; xpad.len()];
    for ky in 0..k {
        for kx in 0..k {
            gemm(
                c_in,
                c_out,
                n,
                weight,
                View { offset: ky * k + kx, rs: k * k, cs: c_in * k * k },
                &dout_p,
                View { offset: 0, rs: n, cs: 1 },
                1.0,
                &mut dx_p,
                View { offset: ky * wp + kx, rs: plane_p, cs: 1 },
            );
        }
    }
    let mut dx = Act::zeros(c_in, x.h, x.w);
    for c in 0..c_in {
        for y in 0..x.h {
            let src = &dx_p[c * plane_p + (y + p) * wp + p..][..x.w];
            dx.data[c * x.plane() + y * x.w..][..x.w].copy_from_slice(src);
        }
    }
    Some(dx)
}

pub fn relu(x: &Act) -> Act {
    Act {
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
        ..*x
    }
}

/// Gradient through ReLU given its pre-activation.
pub fn relu_backward(pre: &Act, d_out: &mut Act) {
    for (d, &z) in d_out.data.iter_mut().zip(&pre.data) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
}

/// 2x2 stride-2 max pooling; returns the output and, per output element, the
/// flat index of the winning input element (first maximum in scan order).
pub fn maxpool_forward(x: &Act) -> (Act, Vec<usize>) {
    let (h, w) = (x.h / 2, x.w / 2);
    let mut out = Act::zeros(x.c, h, w);
    let mut arg = Vec::with_capacity(x.c * h * w);
    for c in 0..x.c {
        for y in 0..h {
            for xx in 0..w {
                let mut best = usize::MAX;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = c * x.plane() + (2 * y + dy) * x.w + 2 * xx + dx;
                    if best == usize::MAX || x.data[i] > x.data[best] {
                        best = i;
                    }
                }
                out.data[c * h * w + y * w + xx] = x.data[best];
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward(input_shape: (usize, usize, usize), arg: &[usize], d_out: &Act) -> Act {
    let (c, h, w) = input_shape;
    let mut dx = Act::zeros(c, h, w);
    for (&i, &g) in arg.iter().zip(&d_out.data) {
        dx.data[i] += g;
    }
    dx
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample_forward(x: &Act, factor: usize) -> Act {
    if factor == 1 {
        return x.clone();
    }
    let (h, w) = (x.h * factor, x.w * factor);
    let mut out = Act::zeros(x.c, h, w);
    for c in 0..x.c {
        for y in 0..h {
            for xx in 0..w {
                out.data[c * h * w + y * w + xx] = x.data[c * x.plane() + (y / factor) * x.w + xx / factor];
            }
        }
    }
    out
}

/// Block sums: the adjoint of [`upsample_forward`].
pub fn upsample_backward(d_out: &Act, factor: usize) -> Act {
    if factor == 1 {
        return d_out.clone();
    }
    let (h, w) = (d_out.h / factor, d_out.w / factor);
    let mut dx = Act::zeros(d_out.c, h, w);
    for c in 0..d_out.c {
        for y in 0..d_out.h {
            for xx in 0..d_out.w {
                dx.data[c * h * w + (y / factor) * w + xx / factor] += d_out.data[c * d_out.plane() + y * d_out.w + xx];
            }
        }
    }
    dx
}
