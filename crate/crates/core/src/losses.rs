//! Training objectives.
//!
//! Every reconstruction-style term is a mean absolute difference over all
//! elements (batch, channel, spatial), which keeps the weights independent
//! of resolution. Adversarial terms use least squares with real → 1 and
//! fake → 0.

use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::models::Network;
use crate::scalar::Real;
use crate::tensor::Tensor;
use crate::transforms::GeoTransform;

/// Default floor applied to the distance standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Anything that maps an image batch to an image batch on a tape.
pub trait Translator<T: Real> {
    fn translate(&self, tape: &mut Tape<T>, x: Var) -> Result<Var>;
}

impl<T: Real, F: Fn(&mut Tape<T>, Var) -> Var> Translator<T> for F {
    fn translate(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        Ok(self(tape, x))
    }
}

/// A network bound to its parameter namespace on the tape.
#[derive(Clone, Copy)]
pub struct Bound<'a, T> {
    pub net: &'a Network<T>,
    pub id: usize,
    pub trainable: bool,
}

impl<T: Real> Translator<T> for Bound<'_, T> {
    fn translate(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        self.net.forward(tape, self.id, x, self.trainable)
    }
}

/// Least-squares generator loss: `mean((D(G(x)) - 1)^2)`.
pub fn adversarial_loss_g<T: Real>(tape: &mut Tape<T>, scores_fake: Var) -> Var {
    tape.mse_to(scores_fake, T::one())
}

/// Least-squares discriminator loss:
/// `0.5 * (mean((D(y) - 1)^2) + mean(D(G(x))^2))`.
pub fn adversarial_loss_d<T: Real>(tape: &mut Tape<T>, scores_real: Var, scores_fake: Var) -> Var {
    let real = tape.mse_to(scores_real, T::one());
    let fake = tape.mse_to(scores_fake, T::zero());
    let sum = tape.add(real, fake);
    tape.scale(sum, T::of(0.5))
}

/// Both directions of the geometry-consistency constraint.
#[derive(Clone, Copy, Debug)]
pub struct GeometryTerms {
    /// `mean|G_XY(x) - f⁻¹(G_X̃Ỹ(f(x)))|`
    pub inverse: Var,
    /// `mean|G_X̃Ỹ(f(x)) - f(G_XY(x))|`
    pub forward: Var,
    /// `inverse + forward`
    pub loss: Var,
}

/// Geometry terms from already translated images: `fake = G_XY(x)` and
/// `fake_t = G_X̃Ỹ(f(x))`.
pub fn geometry_terms<T: Real>(tape: &mut Tape<T>, fake: Var, fake_t: Var, f: GeoTransform) -> GeometryTerms {
    let back = tape.transform(fake_t, f.inverse());
    let inverse = tape.l1(fake, back);
    let moved = tape.transform(fake, f);
    let forward = tape.l1(fake_t, moved);
    let loss = tape.add(inverse, forward);
    GeometryTerms { inverse, forward, loss }
}

/// Translations produced while evaluating the geometry loss, kept so the
/// adversarial terms can reuse them.
#[derive(Clone, Copy, Debug)]
pub struct GeometryPass {
    pub fake: Var,
    pub fake_t: Var,
    pub terms: GeometryTerms,
}

/// Runs both translators and evaluates the geometry-consistency loss.
pub fn geometry_consistency_loss<T: Real>(
    tape: &mut Tape<T>,
    g_xy: &dyn Translator<T>,
    g_xtyt: &dyn Translator<T>,
    x: Var,
    f: GeoTransform,
) -> Result<GeometryPass> {
    let fake = g_xy.translate(tape, x)?;
    let xt = tape.transform(x, f);
    let fake_t = g_xtyt.translate(tape, xt)?;
    if tape.shape(fake_t) != f.apply(tape.value(fake)).shape() {
        return Err(Error::ShapeMismatch { expected: f.apply(tape.value(fake)).shape(), actual: tape.shape(fake_t) });
    }
    let terms = geometry_terms(tape, fake, fake_t, f);
    Ok(GeometryPass { fake, fake_t, terms })
}

/// `mean|G_YX(G_XY(x)) - x| + mean|G_XY(G_YX(y)) - y|`.
pub fn cycle_consistency_loss<T: Real>(
    tape: &mut Tape<T>,
    g_xy: &dyn Translator<T>,
    g_yx: Option<&dyn Translator<T>>,
    x: Var,
    y: Var,
) -> Result<Var> {
    let g_yx = g_yx.ok_or_else(|| Error::InvalidConfig("cycle consistency requires a G_YX translator".into()))?;
    let fake_y = g_xy.translate(tape, x)?;
    let fake_x = g_yx.translate(tape, y)?;
    cycle_from_translations(tape, g_xy, g_yx, x, y, fake_y, fake_x)
}

/// Cycle loss reusing `fake_y = G_XY(x)` and `fake_x = G_YX(y)`.
pub fn cycle_from_translations<T: Real>(
    tape: &mut Tape<T>,
    g_xy: &dyn Translator<T>,
    g_yx: &dyn Translator<T>,
    x: Var,
    y: Var,
    fake_y: Var,
    fake_x: Var,
) -> Result<Var> {
    let rec_x = g_yx.translate(tape, fake_y)?;
    let rec_y = g_xy.translate(tape, fake_x)?;
    let a = tape.l1(rec_x, x);
    let b = tape.l1(rec_y, y);
    Ok(tape.add(a, b))
}

/// Means and standard deviations of pairwise image distances in each
/// domain, used to standardize distances before comparing them.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceStats {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu_y: f64,
    pub sigma_y: f64,
    /// Lower bound applied to both sigmas; `None` turns a degenerate sigma
    /// into an error instead.
    pub sigma_floor: Option<f64>,
}

impl DistanceStats {
    pub fn new(mu_x: f64, sigma_x: f64, mu_y: f64, sigma_y: f64) -> Self {
        DistanceStats { mu_x, sigma_x, mu_y, sigma_y, sigma_floor: Some(SIGMA_FLOOR) }
    }

    fn effective(sigma: f64, floor: Option<f64>) -> Result<f64> {
        match floor {
            Some(eps) => Ok(sigma.max(eps)),
            None if sigma > 0.0 && sigma.is_finite() => Ok(sigma),
            None => Err(Error::DegenerateSigma(sigma)),
        }
    }

    pub fn effective_sigma_x(&self) -> Result<f64> {
        Self::effective(self.sigma_x, self.sigma_floor)
    }

    pub fn effective_sigma_y(&self) -> Result<f64> {
        Self::effective(self.sigma_y, self.sigma_floor)
    }

    /// `(d - mu_x) / sigma_x` for a source-domain distance.
    pub fn standardize_x(&self, d: f64) -> Result<f64> {
        Ok((d - self.mu_x) / self.effective_sigma_x()?)
    }
}

/// Mean absolute difference between two images, the distance `d` used by
/// the distance constraint and its statistics.
pub fn image_distance<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    a.mean_abs_diff(b).as_f64()
}

/// `mean over pairs |φ(x_i, x_j) - ψ(x_i, x_j)|` where pairs are the
/// aligned items of the `x_i` and `x_j` batches.
pub fn distance_loss<T: Real>(
    tape: &mut Tape<T>,
    g_xy: &dyn Translator<T>,
    x_i: Var,
    x_j: Var,
    stats: &DistanceStats,
) -> Result<Var> {
    let gi = g_xy.translate(tape, x_i)?;
    let gj = g_xy.translate(tape, x_j)?;
    distance_from_translations(tape, x_i, x_j, gi, gj, stats)
}

/// Distance loss reusing the translations `gi = G_XY(x_i)`, `gj = G_XY(x_j)`.
pub fn distance_from_translations<T: Real>(
    tape: &mut Tape<T>,
    x_i: Var,
    x_j: Var,
    gi: Var,
    gj: Var,
    stats: &DistanceStats,
) -> Result<Var> {
    if tape.shape(x_i) != tape.shape(x_j) {
        return Err(Error::ShapeMismatch { expected: tape.shape(x_i), actual: tape.shape(x_j) });
    }
    let sigma_y = stats.effective_sigma_y()?;
    let (xi, xj) = (tape.value(x_i), tape.value(x_j));
    let phi = (0..xi.batch())
        .map(|n| stats.standardize_x(image_distance(&xi.sample(n), &xj.sample(n))).map(T::of))
        .collect::<Result<Vec<T>>>()?;
    let phi = tape.constant(Tensor::from_vec([phi.len(), 1, 1, 1], phi)?);
    let d = tape.pairwise_l1(gi, gj);
    let centered = tape.offset(d, T::of(-stats.mu_y));
    let psi = tape.scale(centered, T::of(1.0 / sigma_y));
    Ok(tape.l1(phi, psi))
}

/// `mean|G_XY(y) - y|` on target-domain images.
pub fn identity_loss<T: Real>(tape: &mut Tape<T>, g_xy: &dyn Translator<T>, y: Var) -> Result<Var> {
    let out = g_xy.translate(tape, y)?;
    if tape.shape(out) != tape.shape(y) {
        return Err(Error::ShapeMismatch { expected: tape.shape(y), actual: tape.shape(out) });
    }
    Ok(tape.l1(out, y))
}

/// Loss values of one training step. Optional terms are `None` when their
/// constraint is disabled; `geo` is exactly zero when it is.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossReport {
    /// Sum of the generator adversarial terms of every translator.
    pub gan_g: f64,
    /// Sum of the discriminator losses.
    pub gan_d: f64,
    pub geo: f64,
    pub cycle: Option<f64>,
    pub distance: Option<f64>,
    pub identity: Option<f64>,
    pub total_g: f64,
}

/// Trade-off weights of the full objective.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub geo: f64,
    pub cycle: f64,
    pub distance: f64,
    pub identity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { geo: 20.0, cycle: 10.0, distance: 1.0, identity: 5.0 }
    }
}

/// `(generator total, discriminator total)`. Disabled terms contribute
/// exactly zero.
pub fn total_objective(report: &LossReport, weights: &LossWeights) -> (f64, f64) {
    let g = report.gan_g
        + weights.geo * report.geo
        + weights.cycle * report.cycle.unwrap_or(0.0)
        + weights.distance * report.distance.unwrap_or(0.0)
        + weights.identity * report.identity.unwrap_or(0.0);
    (g, report.gan_d)
}
