//! Configuration, optimizer state and the alternating update.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{ParamKey, Tape, Var};
use crate::data::{EpochPlan, PlanSpec, UnpairedData};
use crate::error::{Error, Result};
use crate::losses::{
    adversarial_loss_d, adversarial_loss_g, cycle_from_translations, distance_from_translations,
    geometry_consistency_loss, identity_loss, Bound, DistanceStats, LossReport, LossWeights, Translator,
};
use crate::models::{DiscriminatorSpec, GeneratorSpec, Role, SharingMode, TranslationModel};
use crate::optim::{Adam, AdamConfig};
use crate::scalar::Real;
use crate::tensor::Tensor;
use crate::transforms::GeoTransform;

/// Which constraints are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constraints {
    pub geo: bool,
    pub cycle: bool,
    pub distance: bool,
    pub identity: bool,
}

impl Constraints {
    pub const GEO: Constraints = Constraints { geo: true, cycle: false, distance: false, identity: false };
    pub const NONE: Constraints = Constraints { geo: false, cycle: false, distance: false, identity: false };

    /// Parses a list such as `geo,cycle` or `none`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut c = Constraints::NONE;
        for part in s.split([',', '+', ' ']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "geo" | "gc" | "geometry" => c.geo = true,
                "cycle" | "cyc" => c.cycle = true,
                "distance" | "dist" => c.distance = true,
                "identity" | "idt" => c.identity = true,
                "none" | "gan" => {}
                _ => return Err(Error::Unknown { kind: "constraint", value: part.to_string() }),
            }
        }
        Ok(c)
    }
}

impl core::fmt::Display for Constraints {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let names: Vec<&str> = [(self.geo, "geo"), (self.cycle, "cycle"), (self.distance, "distance"), (self.identity, "identity")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

/// Every knob of a training run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub constraints: Constraints,
    pub transforms: Vec<GeoTransform>,
    pub sharing: SharingMode,
    pub weights: LossWeights,
    pub lr: f64,
    pub adam: AdamConfig,
    pub epochs_const: usize,
    pub epochs_decay: usize,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Training crop `(H, W)`.
    pub resolution: (usize, usize),
    pub seed: u64,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    /// Stop after this many steps in total.
    pub max_steps: Option<usize>,
    pub distance_max_pairs: usize,
    /// Random crop from a larger stored image plus a left-right mirror.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            constraints: Constraints::GEO,
            transforms: alloc::vec![GeoTransform::Rot90Cw],
            sharing: SharingMode::Shared,
            weights: LossWeights::default(),
            lr: 2e-4,
            adam: AdamConfig::default(),
            epochs_const: 100,
            epochs_decay: 100,
            buffer_capacity: 50,
            batch_size: 1,
            resolution: (256, 256),
            seed: 0,
            generator: GeneratorSpec::for_resolution(256),
            discriminator: DiscriminatorSpec::default(),
            max_steps: None,
            distance_max_pairs: 10_000,
            augment: false,
        }
    }
}

impl TrainConfig {
    pub fn total_epochs(&self) -> usize {
        self.epochs_const + self.epochs_decay
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: alloc::string::String| Err(Error::InvalidConfig(why));
        let w = &self.weights;
        for (name, v) in [("geo", w.geo), ("cycle", w.cycle), ("distance", w.distance), ("identity", w.identity)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("weight `{name}` must be a non-negative number, got {v}"));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.total_epochs() == 0 {
            return bad("at least one epoch is required".into());
        }
        let (h, wd) = self.resolution;
        if self.constraints.geo {
            if self.transforms.is_empty() {
                return Err(Error::EmptyPool);
            }
            if h != wd {
                if let Some(t) = self.transforms.iter().find(|t| t.swaps_axes()) {
                    return bad(format!("`{}` needs a square resolution, got {h}x{wd}", t.name()));
                }
            }
        }
        if self.constraints.identity && self.generator.in_channels != self.generator.out_channels {
            return bad("identity loss needs equal input and output channel counts".into());
        }
        if self.constraints.distance && self.distance_max_pairs == 0 {
            return bad("distance statistics need at least one pair".into());
        }
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.generator.check_hw(h, wd)?;
        match self.discriminator.output_hw(h, wd) {
            Some((oh, ow)) if oh > 0 && ow > 0 => Ok(()),
            _ => bad(format!("discriminator input {h}x{wd} is too small")),
        }
    }
}

/// Learning rate of `epoch` (0-based): constant for `epochs_const` epochs,
/// then linear decay reaching zero in the last epoch.
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    let total = cfg.total_epochs();
    if epoch >= total {
        return Err(Error::EpochOutOfRange { epoch, total });
    }
    if epoch < cfg.epochs_const {
        return Ok(cfg.lr);
    }
    let k = (epoch - cfg.epochs_const + 1) as f64;
    Ok(cfg.lr * (1.0 - k / cfg.epochs_decay as f64))
}

/// Position of a ChaCha8 generator, enough to rebuild it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// History of generated images shown to a discriminator. Until full it
/// passes images through and keeps them; afterwards each image is, with
/// probability one half, swapped for a random stored one.
#[derive(Clone, Debug)]
pub struct ImageBuffer<T> {
    capacity: usize,
    images: Vec<Tensor<T>>,
    rng: ChaCha8Rng,
}

impl<T: Real> ImageBuffer<T> {
    pub fn new(capacity: usize, rng: ChaCha8Rng) -> Self {
        ImageBuffer { capacity, images: Vec::new(), rng }
    }

    pub fn from_parts(capacity: usize, images: Vec<Tensor<T>>, rng: RngState) -> Result<Self> {
        if images.len() > capacity {
            return Err(Error::InvalidConfig(format!("buffer holds {} images, capacity {capacity}", images.len())));
        }
        Ok(ImageBuffer { capacity, images, rng: rng.restore() })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn images(&self) -> &[Tensor<T>] {
        &self.images
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    /// Passes a batch through the buffer item by item.
    pub fn query(&mut self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        if self.capacity == 0 {
            return Ok(batch.clone());
        }
        let out = (0..batch.batch())
            .map(|n| {
                let img = batch.sample(n);
                if self.images.len() < self.capacity {
                    self.images.push(img.clone());
                    img
                } else if self.rng.random_bool(0.5) {
                    let k = self.rng.random_range(0..self.capacity);
                    core::mem::replace(&mut self.images[k], img)
                } else {
                    img
                }
            })
            .collect::<Vec<_>>();
        Tensor::stack(&out)
    }
}

/// One step's worth of inputs, already cropped and stacked.
#[derive(Clone, Debug)]
pub struct StepBatch<T> {
    pub x: Tensor<T>,
    pub y: Tensor<T>,
    /// Second source batch for the distance constraint.
    pub x_partner: Option<Tensor<T>>,
    pub transform: GeoTransform,
}

/// Model plus everything that evolves with it.
#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub model: TranslationModel<T>,
    /// One optimizer per distinct network, indexed by network id.
    pub optimizers: Vec<Adam<T>>,
    /// Fake-image history of each discriminator.
    pub buffers: Vec<(Role, ImageBuffer<T>)>,
}

fn buffer_rng(seed: u64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x3000 + role as u64);
    rng
}

const DISCRIMINATORS: [Role; 3] = [Role::Dy, Role::DyT, Role::Dx];

impl<T: Real> TrainState<T> {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let model = TranslationModel::build(cfg.generator, cfg.discriminator, cfg.sharing, cfg.constraints.cycle, cfg.seed)?;
        Ok(Self::from_model(model, cfg))
    }

    /// Fresh optimizer and buffer state around an existing model.
    pub fn from_model(model: TranslationModel<T>, cfg: &TrainConfig) -> Self {
        let mut ids: Vec<usize> = model.distinct().into_iter().map(|(_, id)| id).collect();
        ids.sort_unstable();
        let optimizers = ids.into_iter().map(|id| Adam::new(cfg.adam, model.by_id(id).params())).collect();
        let buffers = DISCRIMINATORS
            .into_iter()
            .filter(|&r| model.id(r).is_some())
            .map(|r| (r, ImageBuffer::new(cfg.buffer_capacity, buffer_rng(cfg.seed, r))))
            .collect();
        TrainState { model, optimizers, buffers }
    }

    fn bound(&self, role: Role, trainable: bool) -> Option<Bound<'_, T>> {
        let id = self.model.id(role)?;
        Some(Bound { net: self.model.by_id(id), id, trainable })
    }

    fn apply_grads(&mut self, id: usize, grads: &crate::autograd::Gradients<T>, lr: f64) {
        let net = self.model.by_id_mut(id);
        let n = net.params().len();
        let g: Vec<Option<&Tensor<T>>> = (0..n).map(|index| grads.param(ParamKey { net: id, index })).collect();
        self.optimizers[id].step(net.params_mut(), &g, lr);
    }

    /// One alternating update: the generators with every discriminator
    /// frozen, then each discriminator on real images and buffered fakes.
    pub fn train_step(
        &mut self,
        batch: &StepBatch<T>,
        cfg: &TrainConfig,
        stats: Option<&DistanceStats>,
        lr: f64,
    ) -> Result<LossReport> {
        let c = cfg.constraints;
        let w = cfg.weights;
        let f = batch.transform;
        let mut report = LossReport::default();
        let mut tape = Tape::new();
        let (fake_y, fake_yt, fake_x, g_total);
        {
            let g_xy = self.bound(Role::Gxy, true).expect("model without G_XY");
            let g_t = self.bound(Role::GxyT, true).expect("model without G_X̃Ỹ");
            let d_y = self.bound(Role::Dy, false).expect("model without D_Y");
            let d_yt = self.bound(Role::DyT, false).expect("model without D_Ỹ");
            let x = tape.constant(batch.x.clone());
            let y = tape.constant(batch.y.clone());
            let mut gan: Vec<(Var, T)> = Vec::new();
            let mut terms: Vec<(&'static str, Var, f64)> = Vec::new();

            let (fy, fyt) = if c.geo {
                let pass = geometry_consistency_loss(&mut tape, &g_xy, &g_t, x, f)?;
                terms.push(("geo", pass.terms.loss, w.geo));
                (pass.fake, Some(pass.fake_t))
            } else {
                (g_xy.translate(&mut tape, x)?, None)
            };
            let s = d_y.translate(&mut tape, fy)?;
            gan.push((adversarial_loss_g(&mut tape, s), T::one()));
            if let Some(fyt) = fyt {
                let s = d_yt.translate(&mut tape, fyt)?;
                gan.push((adversarial_loss_g(&mut tape, s), T::one()));
            }

            let mut fx = None;
            if c.cycle {
                let g_yx = self
                    .bound(Role::Gyx, true)
                    .ok_or_else(|| Error::InvalidConfig("cycle constraint needs G_YX".into()))?;
                let d_x = self.bound(Role::Dx, false).expect("cycle model without D_X");
                let back = g_yx.translate(&mut tape, y)?;
                let cyc = cycle_from_translations(&mut tape, &g_xy, &g_yx, x, y, fy, back)?;
                terms.push(("cycle", cyc, w.cycle));
                let s = d_x.translate(&mut tape, back)?;
                gan.push((adversarial_loss_g(&mut tape, s), T::one()));
                fx = Some(back);
            }

            if c.distance {
                let stats = stats.ok_or_else(|| Error::InvalidConfig("distance constraint needs statistics".into()))?;
                let partner = batch
                    .x_partner
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("distance constraint needs a partner batch".into()))?;
                let xj = tape.constant(partner);
                let gj = g_xy.translate(&mut tape, xj)?;
                let d = distance_from_translations(&mut tape, x, xj, fy, gj, stats)?;
                terms.push(("distance", d, w.distance));
            }

            if c.identity {
                let mut idt = identity_loss(&mut tape, &g_xy, y)?;
                if self.model.sharing() == SharingMode::Separate && c.geo {
                    let yt = tape.transform(y, f);
                    let other = identity_loss(&mut tape, &g_t, yt)?;
                    idt = tape.add(idt, other);
                }
                terms.push(("identity", idt, w.identity));
            }

            let gan_g = tape.weighted_sum(&gan).expect("at least one adversarial term");
            check_finite(&tape, "gan_g", gan_g)?;
            report.gan_g = tape.value(gan_g).item().as_f64();
            let mut weighted = alloc::vec![(gan_g, T::one())];
            for &(name, v, weight) in &terms {
                check_finite(&tape, name, v)?;
                let value = tape.value(v).item().as_f64();
                match name {
                    "geo" => report.geo = value,
                    "cycle" => report.cycle = Some(value),
                    "distance" => report.distance = Some(value),
                    _ => report.identity = Some(value),
                }
                weighted.push((v, T::of(weight)));
            }
            let total = tape.weighted_sum(&weighted).expect("non-empty objective");
            report.total_g = tape.value(total).item().as_f64();
            g_total = total;
            fake_y = tape.value(fy).clone();
            fake_yt = fyt.map(|v| tape.value(v).clone());
            fake_x = fx.map(|v| tape.value(v).clone());
        }
        let grads = tape.backward(g_total);
        drop(tape);
        let generators: Vec<usize> = self
            .model
            .distinct()
            .into_iter()
            .filter(|(r, _)| r.is_generator())
            .map(|(_, id)| id)
            .collect();
        for id in generators {
            self.apply_grads(id, &grads, lr);
        }
        drop(grads);

        let real_yt = fake_yt.as_ref().map(|_| f.apply(&batch.y));
        let rounds: [(Role, Option<&Tensor<T>>, Option<Tensor<T>>); 3] = [
            (Role::Dy, Some(&batch.y), Some(fake_y)),
            (Role::DyT, real_yt.as_ref(), fake_yt),
            (Role::Dx, fake_x.as_ref().map(|_| &batch.x), fake_x.clone()),
        ];
        for (role, real, fake) in rounds {
            let (Some(real), Some(fake)) = (real, fake) else { continue };
            let id = self.model.id(role).expect("discriminator present");
            let slot = self.buffers.iter().position(|(r, _)| *r == role).expect("buffer per discriminator");
            let fake = self.buffers[slot].1.query(&fake)?;
            let mut tape = Tape::new();
            let d = self.bound(role, true).expect("discriminator present");
            let real = tape.constant(real.clone());
            let fake = tape.constant(fake);
            let sr = d.translate(&mut tape, real)?;
            let sf = d.translate(&mut tape, fake)?;
            let loss = adversarial_loss_d(&mut tape, sr, sf);
            check_finite(&tape, role.name(), loss)?;
            report.gan_d += tape.value(loss).item().as_f64();
            let grads = tape.backward(loss);
            self.apply_grads(id, &grads, lr);
        }
        Ok(report)
    }
}

fn check_finite<T: Real>(tape: &Tape<T>, term: &'static str, v: Var) -> Result<()> {
    if tape.value(v).all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { term, indices: Vec::new() })
    }
}

/// One logged step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based count of steps taken so far in the run.
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub report: LossReport,
}

/// Drives whole epochs over in-memory data.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub cfg: TrainConfig,
    pub state: TrainState<T>,
    /// Next epoch to run.
    pub epoch: usize,
    /// Steps taken so far.
    pub step: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        let state = TrainState::new(&cfg)?;
        Ok(Trainer { cfg, state, epoch: 0, step: 0 })
    }

    /// Whether the schedule or the step budget is used up.
    pub fn finished(&self) -> bool {
        self.epoch >= self.cfg.total_epochs() || self.cfg.max_steps.is_some_and(|m| self.step >= m)
    }

    /// Runs the next epoch (or what the step budget leaves of it), calling
    /// `on_step` after each step. Source indices of the batch are passed
    /// along for diagnostics.
    pub fn run_epoch<E: From<Error>>(
        &mut self,
        data: &UnpairedData<T>,
        stats: Option<&DistanceStats>,
        mut on_step: impl FnMut(&StepRecord, &[usize]) -> Result<(), E>,
    ) -> Result<(), E> {
        if self.finished() {
            return Ok(());
        }
        let first = data.x.first().ok_or(Error::TooFewImages { needed: 1, got: 0 })?;
        let stored = (first.shape()[2], first.shape()[3]);
        let spec = PlanSpec {
            n_x: data.x.len(),
            n_y: data.y.len(),
            batch_size: self.cfg.batch_size,
            transforms: &self.cfg.transforms,
            stored_hw: stored,
            crop_hw: self.cfg.resolution,
            augment: self.cfg.augment,
        };
        let plan = EpochPlan::new(&spec, self.cfg.seed, self.epoch)?;
        let lr = lr_at(&self.cfg, self.epoch)?;
        let crop = self.cfg.resolution;
        for s in &plan.steps {
            if self.cfg.max_steps.is_some_and(|m| self.step >= m) {
                return Ok(());
            }
            let batch = StepBatch {
                x: UnpairedData::gather(&data.x, &s.x, &s.augment_x, crop)?,
                y: UnpairedData::gather(&data.y, &s.y, &s.augment_y, crop)?,
                x_partner: if self.cfg.constraints.distance {
                    Some(UnpairedData::gather(&data.x, &s.x_partner, &s.augment_partner, crop)?)
                } else {
                    None
                },
                transform: s.transform,
            };
            let report = match self.state.train_step(&batch, &self.cfg, stats, lr) {
                Err(Error::NonFinite { term, .. }) => return Err(Error::NonFinite { term, indices: s.x.clone() }.into()),
                other => other?,
            };
            self.step += 1;
            on_step(&StepRecord { step: self.step, epoch: self.epoch, lr, report }, &s.x)?;
        }
        self.epoch += 1;
        Ok(())
    }
}
