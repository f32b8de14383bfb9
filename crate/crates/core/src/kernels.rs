//! Slice-level kernels shared by the forward and backward passes.

use crate::scalar::Real;

/// Geometry of a square-kernel convolution over one `c x h x w` image
/// producing an `oh x ow` grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    /// `None` when the kernel does not fit the padded input.
    pub fn new(c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Option<Self> {
        if stride == 0 || h + 2 * pad < k || w + 2 * pad < k {
            return None;
        }
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        Some(ConvGeom { c, h, w, k, stride, pad, oh, ow })
    }

    pub fn col_rows(&self) -> usize {
        self.c * self.k * self.k
    }

    pub fn col_cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Input coordinate hit by output position `o` and kernel tap `t`, if
    /// it falls inside the unpadded image.
    #[inline]
    fn tap(o: usize, t: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let p = o * stride + t;
        if p < pad || p - pad >= extent {
            None
        } else {
            Some(p - pad)
        }
    }
}

/// Unfolds `src` (`c x h x w`) into `cols` (`c*k*k x oh*ow`).
pub(crate) fn im2col<T: Real>(src: &[T], g: &ConvGeom, cols: &mut [T]) {
    let p = g.col_cols();
    debug_assert_eq!(src.len(), g.c * g.h * g.w);
    debug_assert_eq!(cols.len(), g.col_rows() * p);
    for c in 0..g.c {
        let plane = &src[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = ((c * g.k + ki) * g.k + kj) * p;
                let dst = &mut cols[row..row + p];
                for oi in 0..g.oh {
                    let line = &mut dst[oi * g.ow..(oi + 1) * g.ow];
                    match ConvGeom::tap(oi, ki, g.stride, g.pad, g.h) {
                        None => line.fill(T::zero()),
                        Some(ih) => {
                            let srow = &plane[ih * g.w..(ih + 1) * g.w];
                            for (oj, v) in line.iter_mut().enumerate() {
                                *v = match ConvGeom::tap(oj, kj, g.stride, g.pad, g.w) {
                                    Some(iw) => srow[iw],
                                    None => T::zero(),
                                };
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `cols` back and accumulates into `dst`.
pub(crate) fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dst: &mut [T]) {
    let p = g.col_cols();
    debug_assert_eq!(dst.len(), g.c * g.h * g.w);
    debug_assert_eq!(cols.len(), g.col_rows() * p);
    for c in 0..g.c {
        let plane = &mut dst[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = ((c * g.k + ki) * g.k + kj) * p;
                let src = &cols[row..row + p];
                for oi in 0..g.oh {
                    let Some(ih) = ConvGeom::tap(oi, ki, g.stride, g.pad, g.h) else {
                        continue;
                    };
                    let line = &src[oi * g.ow..(oi + 1) * g.ow];
                    let drow = &mut plane[ih * g.w..(ih + 1) * g.w];
                    for (oj, &v) in line.iter().enumerate() {
                        if let Some(iw) = ConvGeom::tap(oj, kj, g.stride, g.pad, g.w) {
                            drow[iw] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Reflection (mirror without edge repeat) of an index into `[0, n)`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

/// Per-plane statistics for instance normalization: writes the normalized
/// values into `xhat` and returns `1 / sqrt(var + eps)`.
pub(crate) fn normalize_plane<T: Real>(x: &[T], eps: T, xhat: &mut [T]) -> T {
    let m = T::of(x.len() as f64);
    let mean = x.iter().copied().sum::<T>() / m;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / m;
    let inv = T::one() / (var + eps).sqrt();
    for (o, &v) in xhat.iter_mut().zip(x) {
        *o = (v - mean) * inv;
    }
    inv
}

/// Gradient of instance normalization w.r.t. the input plane, given the
/// gradient `gxhat` w.r.t. the normalized values.
pub(crate) fn normalize_plane_backward<T: Real>(gxhat: &[T], xhat: &[T], inv: T, dx: &mut [T]) {
    let m = T::of(xhat.len() as f64);
    let sum_g = gxhat.iter().copied().sum::<T>();
    let sum_gx = gxhat.iter().zip(xhat).map(|(&g, &x)| g * x).sum::<T>();
    for ((d, &g), &x) in dx.iter_mut().zip(gxhat).zip(xhat) {
        *d += inv / m * (m * g - sum_g - x * sum_gx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn direct_conv(x: &[f64], wt: &[f64], g: &ConvGeom, o: usize) -> Vec<f64> {
        let mut out = vec![0.0; o * g.oh * g.ow];
        for oc in 0..o {
            for oi in 0..g.oh {
                for oj in 0..g.ow {
                    let mut acc = 0.0;
                    for c in 0..g.c {
                        for ki in 0..g.k {
                            for kj in 0..g.k {
                                let ih = (oi * g.stride + ki) as isize - g.pad as isize;
                                let iw = (oj * g.stride + kj) as isize - g.pad as isize;
                                if ih < 0 || iw < 0 || ih >= g.h as isize || iw >= g.w as isize {
                                    continue;
                                }
                                acc += x[(c * g.h + ih as usize) * g.w + iw as usize]
                                    * wt[((oc * g.c + c) * g.k + ki) * g.k + kj];
                            }
                        }
                    }
                    out[(oc * g.oh + oi) * g.ow + oj] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn im2col_gemm_matches_direct_convolution() {
        for &(h, w, k, s, p) in &[(5, 7, 3, 1, 1), (8, 8, 4, 2, 1), (6, 5, 3, 2, 0), (4, 4, 4, 1, 1)] {
            let c = 2;
            let o = 3;
            let g = ConvGeom::new(c, h, w, k, s, p).unwrap();
            let x: Vec<f64> = (0..c * h * w).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
            let wt: Vec<f64> = (0..o * c * k * k).map(|i| ((i * 13 % 7) as f64) * 0.25 - 0.7).collect();
            let mut cols = vec![0.0; g.col_rows() * g.col_cols()];
            im2col(&x, &g, &mut cols);
            let mut out = vec![0.0; o * g.col_cols()];
            crate::scalar::gemm(
                crate::scalar::Mat::new(&wt, o, g.col_rows()),
                crate::scalar::Mat::new(&cols, g.col_rows(), g.col_cols()),
                0.0,
                &mut out,
            );
            let want = direct_conv(&x, &wt, &g, o);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeom::new(2, 6, 5, 3, 2, 1).unwrap();
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..g.col_rows() * g.col_cols()).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut cols = vec![0.0; y.len()];
        im2col(&x, &g, &mut cols);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; x.len()];
        col2im(&y, &g, &mut back);
        let rhs: f64 = back.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-3, 5), 3);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(7, 5), 1);
        assert_eq!(reflect(2, 5), 2);
    }

    #[test]
    fn discriminator_grid_size() {
        // 256 -> 128 -> 64 -> 32 -> 31 -> 30 with kernel 4, pad 1.
        let mut size = 256;
        for s in [2, 2, 2, 1, 1] {
            size = ConvGeom::new(1, size, size, 4, s, 1).unwrap().oh;
        }
        assert_eq!(size, 30);
    }
}
