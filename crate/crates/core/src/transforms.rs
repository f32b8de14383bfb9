//! The predefined geometric transformations `f` and their inverses.
//!
//! Every transform is an exact permutation of pixel indices, so applying
//! one never changes a value, only where it lives. The set is the dihedral
//! group of the square: the four clockwise rotations, and each of them
//! composed with a vertical flip. That is the smallest set that contains
//! vertical flipping and 90° clockwise rotation and is closed under
//! composition.
//!
//! Orientation convention: row index grows downward, so `Rot90Cw` maps
//! `out[i][j] = in[H - 1 - j][i]`.

use core::fmt;
use core::str::FromStr;

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GeoTransform {
    Identity,
    /// Upside-down flip: `out[i][j] = in[H - 1 - i][j]`.
    VFlip,
    Rot90Cw,
    Rot180,
    Rot270Cw,
    /// Mirror left-right, `Rot180 ∘ VFlip`.
    HFlip,
    /// `out[i][j] = in[j][i]`, `Rot90Cw ∘ VFlip`.
    Transpose,
    /// `out[i][j] = in[H - 1 - j][W - 1 - i]`, `Rot270Cw ∘ VFlip`.
    AntiTranspose,
}

impl GeoTransform {
    pub const ALL: [GeoTransform; 8] = [
        GeoTransform::Identity,
        GeoTransform::VFlip,
        GeoTransform::Rot90Cw,
        GeoTransform::Rot180,
        GeoTransform::Rot270Cw,
        GeoTransform::HFlip,
        GeoTransform::Transpose,
        GeoTransform::AntiTranspose,
    ];

    /// `(k, flip)` such that `self = Rot90Cw^k ∘ VFlip^flip`.
    fn decompose(self) -> (u8, bool) {
        use GeoTransform::*;
        match self {
            Identity => (0, false),
            Rot90Cw => (1, false),
            Rot180 => (2, false),
            Rot270Cw => (3, false),
            VFlip => (0, true),
            Transpose => (1, true),
            HFlip => (2, true),
            AntiTranspose => (3, true),
        }
    }

    fn recompose(k: u8, flip: bool) -> Self {
        use GeoTransform::*;
        match (k % 4, flip) {
            (0, false) => Identity,
            (1, false) => Rot90Cw,
            (2, false) => Rot180,
            (3, false) => Rot270Cw,
            (0, true) => VFlip,
            (1, true) => Transpose,
            (2, true) => HFlip,
            _ => AntiTranspose,
        }
    }

    pub fn inverse(self) -> Self {
        let (k, flip) = self.decompose();
        if flip {
            // Every reflection is an involution.
            self
        } else {
            Self::recompose((4 - k) % 4, false)
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(self, other: Self) -> Self {
        let (k1, f1) = self.decompose();
        let (k2, f2) = other.decompose();
        // VFlip ∘ Rot^k = Rot^-k ∘ VFlip
        let k2 = if f1 { (4 - k2) % 4 } else { k2 };
        Self::recompose((k1 + k2) % 4, f1 ^ f2)
    }

    /// Whether the output has height and width exchanged.
    pub fn swaps_axes(self) -> bool {
        self.decompose().0 % 2 == 1
    }

    pub fn output_hw(self, h: usize, w: usize) -> (usize, usize) {
        if self.swaps_axes() {
            (w, h)
        } else {
            (h, w)
        }
    }

    /// Source coordinate for output pixel `(i, j)` of an `h x w` input.
    #[inline]
    fn source(self, h: usize, w: usize, i: usize, j: usize) -> (usize, usize) {
        use GeoTransform::*;
        match self {
            Identity => (i, j),
            VFlip => (h - 1 - i, j),
            HFlip => (i, w - 1 - j),
            Rot180 => (h - 1 - i, w - 1 - j),
            Rot90Cw => (h - 1 - j, i),
            Rot270Cw => (j, w - 1 - i),
            Transpose => (j, i),
            AntiTranspose => (h - 1 - j, w - 1 - i),
        }
    }

    /// Permutes one `h x w` plane into `dst`.
    pub(crate) fn apply_plane<T: Copy>(self, src: &[T], h: usize, w: usize, dst: &mut [T]) {
        let (oh, ow) = self.output_hw(h, w);
        debug_assert_eq!(src.len(), h * w);
        debug_assert_eq!(dst.len(), oh * ow);
        if self == GeoTransform::Identity {
            dst.copy_from_slice(src);
            return;
        }
        for i in 0..oh {
            let row = &mut dst[i * ow..(i + 1) * ow];
            for (j, out) in row.iter_mut().enumerate() {
                let (si, sj) = self.source(h, w, i, j);
                *out = src[si * w + sj];
            }
        }
    }

    /// Applies the transform to every `(n, c)` plane. Odd rotations and the
    /// transposes of a non-square image produce an `(N, C, W, H)` tensor.
    pub fn apply<T: Real>(self, x: &Tensor<T>) -> Tensor<T> {
        let [n, c, h, w] = x.shape();
        let (oh, ow) = self.output_hw(h, w);
        let mut out = vec![T::zero(); x.len()];
        let plane = h * w;
        for p in 0..n * c {
            self.apply_plane(&x.data()[p * plane..(p + 1) * plane], h, w, &mut out[p * plane..(p + 1) * plane]);
        }
        Tensor::from_vec([n, c, oh, ow], out).expect("permutation preserves length")
    }

    /// Like [`apply`](Self::apply) but refuses to change the spatial shape.
    pub fn apply_strict<T: Real>(self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [_, _, h, w] = x.shape();
        if self.swaps_axes() && h != w {
            return Err(Error::NonSquare(self.name(), h, w));
        }
        Ok(self.apply(x))
    }

    pub fn name(self) -> &'static str {
        use GeoTransform::*;
        match self {
            Identity => "identity",
            VFlip => "vflip",
            Rot90Cw => "rot90",
            Rot180 => "rot180",
            Rot270Cw => "rot270",
            HFlip => "hflip",
            Transpose => "transpose",
            AntiTranspose => "antitranspose",
        }
    }

    /// Parses a comma-separated pool. `rot` and `vf` are accepted as the
    /// short names, and `mix` expands to `rot,vf`.
    pub fn parse_pool(s: &str) -> Result<Vec<GeoTransform>> {
        let mut pool = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("mix") {
                pool.extend([GeoTransform::Rot90Cw, GeoTransform::VFlip]);
            } else {
                pool.push(part.parse()?);
            }
        }
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        Ok(pool)
    }
}

impl fmt::Display for GeoTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeoTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use GeoTransform::*;
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "id" | "none" => Identity,
            "vflip" | "vf" => VFlip,
            "hflip" | "hf" => HFlip,
            "rot" | "rot90" | "rot90cw" => Rot90Cw,
            "rot180" => Rot180,
            "rot270" | "rot270cw" => Rot270Cw,
            "transpose" => Transpose,
            "antitranspose" => AntiTranspose,
            _ => return Err(Error::Unknown { kind: "transform", value: s.to_string() }),
        })
    }
}

/// Draws one transform uniformly from `pool`.
pub fn sample_transform<R: Rng + ?Sized>(pool: &[GeoTransform], rng: &mut R) -> Result<GeoTransform> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(pool[rng.random_range(0..pool.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use GeoTransform::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn([1, 1, h, w], |_, _, i, j| (i * w + j) as f64)
    }

    fn rows(t: &Tensor<f64>) -> Vec<Vec<f64>> {
        let [_, _, h, w] = t.shape();
        (0..h).map(|i| (0..w).map(|j| t.at(0, 0, i, j)).collect()).collect()
    }

    #[test]
    fn vflip_reverses_rows() {
        // [[a,b],[c,d]] -> [[c,d],[a,b]]
        assert_eq!(rows(&VFlip.apply(&grid(2, 2))), vec![vec![2.0, 3.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn rot90cw_two_by_two() {
        // [[a,b],[c,d]] -> [[c,a],[d,b]]
        assert_eq!(rows(&Rot90Cw.apply(&grid(2, 2))), vec![vec![2.0, 0.0], vec![3.0, 1.0]]);
    }

    #[test]
    fn rot90cw_matches_index_oracle_on_rectangles() {
        let x = Tensor::<f64>::from_fn([2, 3, 3, 5], |n, c, i, j| (n * 100 + c * 30 + i * 5 + j) as f64);
        let y = Rot90Cw.apply(&x);
        assert_eq!(y.shape(), [2, 3, 5, 3]);
        let h = 3;
        for n in 0..2 {
            for c in 0..3 {
                for i in 0..5 {
                    for j in 0..3 {
                        assert_eq!(y.at(n, c, i, j), x.at(n, c, h - 1 - j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn identity_is_bit_exact() {
        let x = Tensor::<f32>::from_fn([1, 3, 4, 6], |_, c, i, j| (c as f32).sin() + (i * j) as f32 * 0.1);
        assert_eq!(Identity.apply(&x), x);
    }

    #[test]
    fn inverses() {
        assert_eq!(VFlip.inverse(), VFlip);
        assert_eq!(Rot90Cw.inverse(), Rot270Cw);
        assert_eq!(Identity.inverse(), Identity);
        for t in GeoTransform::ALL {
            assert_eq!(t.compose(t.inverse()), Identity);
            assert_eq!(t.inverse().compose(t), Identity);
        }
    }

    #[test]
    fn composition_table_examples() {
        assert_eq!(Rot90Cw.compose(Rot90Cw), Rot180);
        assert_eq!(VFlip.compose(VFlip), Identity);
        assert_eq!(Rot90Cw.compose(Rot270Cw), Identity);
        assert_eq!(Rot180.compose(VFlip), HFlip);
    }

    #[test]
    fn strict_mode_rejects_non_square_rotation() {
        let x = Tensor::<f32>::zeros([1, 1, 2, 3]);
        assert!(matches!(Rot90Cw.apply_strict(&x), Err(Error::NonSquare(..))));
        assert!(VFlip.apply_strict(&x).is_ok());
        assert!(Rot180.apply_strict(&x).is_ok());
    }

    #[test]
    fn parse_names_and_pools() {
        assert_eq!("rot".parse::<GeoTransform>().unwrap(), Rot90Cw);
        assert_eq!("vf".parse::<GeoTransform>().unwrap(), VFlip);
        assert_eq!(GeoTransform::parse_pool("mix").unwrap(), vec![Rot90Cw, VFlip]);
        assert!(GeoTransform::parse_pool("").is_err());
        assert!("shear".parse::<GeoTransform>().is_err());
        for t in GeoTransform::ALL {
            assert_eq!(t.name().parse::<GeoTransform>().unwrap(), t);
        }
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_transform(&[Rot90Cw], &mut rng).unwrap(), Rot90Cw);
        assert_eq!(sample_transform(&[], &mut rng), Err(Error::EmptyPool));
        let pool = [Rot90Cw, VFlip];
        let rot = (0..10_000).filter(|_| sample_transform(&pool, &mut rng).unwrap() == Rot90Cw).count();
        // 0.5 +/- 0.02 is ~8 standard deviations of a fair binomial at n = 10k.
        assert!((rot as f64 / 10_000.0 - 0.5).abs() <= 0.02, "rot frequency {rot}");
    }

    fn any_transform() -> impl Strategy<Value = GeoTransform> {
        (0..8usize).prop_map(|i| GeoTransform::ALL[i])
    }

    fn any_image() -> impl Strategy<Value = Tensor<f64>> {
        (1..4usize, 1..7usize, 1..7usize).prop_flat_map(|(c, h, w)| {
            proptest::collection::vec(-1.0f64..1.0, c * h * w)
                .prop_map(move |v| Tensor::from_vec([1, c, h, w], v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn compose_agrees_with_sequential_application(a in any_transform(), b in any_transform(), x in any_image()) {
            prop_assert_eq!(a.compose(b).apply(&x), a.apply(&b.apply(&x)));
        }

        #[test]
        fn inverse_round_trips(t in any_transform(), x in any_image()) {
            prop_assert_eq!(t.inverse().apply(&t.apply(&x)), x.clone());
            prop_assert_eq!(t.apply(&t.inverse().apply(&x)), x);
        }

        #[test]
        fn preserves_value_multiset(t in any_transform(), x in any_image()) {
            let y = t.apply(&x);
            let mut a = x.data().to_vec();
            let mut b = y.data().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            let [n, c, h, w] = x.shape();
            let (oh, ow) = t.output_hw(h, w);
            prop_assert_eq!(y.shape(), [n, c, oh, ow]);
        }

        #[test]
        fn l1_distance_is_invariant(t in any_transform(), x in any_image(), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = x.data().iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
            let z = Tensor::from_vec(x.shape(), noisy).unwrap();
            let before: f64 = x.data().iter().zip(z.data()).map(|(a, b)| (a - b).abs()).sum();
            let (tx, tz) = (t.apply(&x), t.apply(&z));
            let after: f64 = tx.data().iter().zip(tz.data()).map(|(a, b)| (a - b).abs()).sum();
            // Same terms, possibly a different summation order.
            prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        }
    }
}
