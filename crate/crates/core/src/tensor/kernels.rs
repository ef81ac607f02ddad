//! Raw slice kernels behind the graph operations. Shapes are validated by
//! callers; these functions only index.

/// `c[m,n] = a[m,k] · b[k,n]`
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in row.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// `c[m,k] = g[m,n] · b[k,n]ᵀ`
pub fn matmul_bt(g: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * k];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            c[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// `c[k,n] = a[m,k]ᵀ · g[m,n]`
pub fn matmul_at(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, gv) in crow.iter_mut().zip(grow) {
                *cv += av * gv;
            }
        }
    }
    c
}

pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

/// Geometry of a replicate-padded, centered 2-D convolution.
#[derive(Clone, Debug)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub out_h: usize,
    pub out_w: usize,
    /// `rows[oy * kh + ky]` = clamped source row for output row `oy`, tap `ky`.
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl ConvGeometry {
    pub fn new(c_in: usize, h: usize, w: usize, c_out: usize, kh: usize, kw: usize, stride: usize) -> Self {
        let out_h = (h - 1) / stride + 1;
        let out_w = (w - 1) / stride + 1;
        let taps = |out: usize, k: usize, limit: usize| -> Vec<usize> {
            let half = (k / 2) as isize;
            let mut idx = Vec::with_capacity(out * k);
            for o in 0..out {
                for t in 0..k {
                    let src = (o * stride) as isize + t as isize - half;
                    idx.push(src.clamp(0, limit as isize - 1) as usize);
                }
            }
            idx
        };
        Self {
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            out_h,
            out_w,
            rows: taps(out_h, kh, h),
            cols: taps(out_w, kw, w),
        }
    }

    pub fn conv(&self, input: &[f64], kernel: &[f64]) -> Vec<f64> {
        let (oh, ow) = (self.out_h, self.out_w);
        let mut out = vec![0.0; self.c_out * oh * ow];
        for co in 0..self.c_out {
            let plane = &mut out[co * oh * ow..(co + 1) * oh * ow];
            for ci in 0..self.c_in {
                let src = &input[ci * self.h * self.w..(ci + 1) * self.h * self.w];
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let wv = kernel[((co * self.c_in + ci) * self.kh + ky) * self.kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let srow = &src[self.rows[oy * self.kh + ky] * self.w..];
                            let orow = &mut plane[oy * ow..(oy + 1) * ow];
                            for (ox, o) in orow.iter_mut().enumerate() {
                                *o += wv * srow[self.cols[ox * self.kw + kx]];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns `(d_input, d_kernel)` for upstream gradient `g`.
    pub fn conv_backward(
        &self,
        input: &[f64],
        kernel: &[f64],
        g: &[f64],
        want_input: bool,
        want_kernel: bool,
    ) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let (oh, ow) = (self.out_h, self.out_w);
        let mut d_in = want_input.then(|| vec![0.0; input.len()]);
        let mut d_k = want_kernel.then(|| vec![0.0; kernel.len()]);
        for co in 0..self.c_out {
            let gplane = &g[co * oh * ow..(co + 1) * oh * ow];
            for ci in 0..self.c_in {
                let base = ci * self.h * self.w;
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let kidx = ((co * self.c_in + ci) * self.kh + ky) * self.kw + kx;
                        let wv = kernel[kidx];
                        let mut acc = 0.0;
                        for oy in 0..oh {
                            let row = base + self.rows[oy * self.kh + ky] * self.w;
                            for ox in 0..ow {
                                let gv = gplane[oy * ow + ox];
                                let src = row + self.cols[ox * self.kw + kx];
                                acc += gv * input[src];
                                if let Some(d) = d_in.as_mut() {
                                    d[src] += wv * gv;
                                }
                            }
                        }
                        if let Some(d) = d_k.as_mut() {
                            d[kidx] += acc;
                        }
                    }
                }
            }
        }
        (d_in, d_k)
    }
}

/// Logistic function kept strictly inside (0, 1) in floating point.
pub fn sigmoid(x: f64) -> f64 {
    const HI: f64 = 1.0 - f64::EPSILON / 2.0;
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, HI)
}

/// Row-wise softmax over the last axis with max subtraction.
pub fn softmax_rows(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (src, dst) in x.chunks(n).zip(out.chunks_mut(n)) {
        let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - max).exp();
            total += *d;
        }
        dst.iter_mut().for_each(|d| *d /= total);
    }
    out
}

pub fn upsample_nearest2x(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                out[(ch * oh + y) * ow + xx] = x[(ch * h + y / 2) * w + xx / 2];
            }
        }
    }
    out
}

/// 2×2 max pooling; also returns the flat source index of each maximum
/// (first occurrence wins ties).
pub fn maxpool2x(x: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let first = (ch * h + 2 * y) * w + 2 * xx;
                let mut best = (x[first], first);
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (ch * h + 2 * y + dy) * w + 2 * xx + dx;
                    if x[idx] > best.0 {
                        best = (x[idx], idx);
                    }
                }
                out.push(best.0);
                arg.push(best.1);
            }
        }
    }
    (out, arg)
}

pub fn avgpool2x(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let at = |dy: usize, dx: usize| x[(ch * h + 2 * y + dy) * w + 2 * xx + dx];
                out.push((at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1)) / 4.0);
            }
        }
    }
    out
}
