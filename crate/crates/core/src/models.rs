//! Generator and discriminator networks, and the set of networks that make
//! up one translation model.
//!
//! Layer layouts:
//!
//! * ResNet generator: 7×7 stem, two stride-2 3×3 downsampling convs, `n`
//!   residual blocks at 4× base width, two stride-2 transposed convs back up,
//!   7×7 head and `tanh`. Instance norm + ReLU after every conv but the head.
//! * Compact generator (32×32 digits): two stride-2 4×4 convs, two 3×3
//!   convs, two stride-2 4×4 transposed convs, `tanh`; LeakyReLU throughout.
//! * Patch discriminator: 4×4 convs with widths `b, 2b, 4b, 8b` and strides
//!   `2, 2, 2, 1`, then a 4×4 stride-1 conv to a single score channel. All
//!   use padding 1, so a 256×256 input yields a 30×30 score map.
//!
//! Convs directly followed by instance norm carry no bias: the norm removes
//! any per-channel constant, so such a bias would never receive gradient.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{ParamKey, Tape, Var};
use crate::error::{Error, Result};
use crate::kernels::ConvGeom;
use crate::scalar::Real;
use crate::tensor::{Shape, Tensor};

/// LeakyReLU negative slope.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Instance-norm variance epsilon.
pub const NORM_EPS: f64 = 1e-5;
/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GeneratorArch {
    Resnet { blocks: usize },
    /// The four-conv encoder-decoder used for 32×32 digit translation.
    Compact,
    /// Returns its input unchanged. Has no parameters; used to debug the
    /// inference pipeline.
    Passthrough,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Padding {
    Reflect,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorSpec {
    pub arch: GeneratorArch,
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_width: usize,
    /// Learned per-channel scale and shift after each instance norm.
    pub affine_norm: bool,
    /// Padding of the 7×7 stem of the ResNet generator.
    pub stem_padding: Padding,
}

impl GeneratorSpec {
    pub fn resnet(blocks: usize) -> Self {
        GeneratorSpec {
            arch: GeneratorArch::Resnet { blocks },
            in_channels: 3,
            out_channels: 3,
            base_width: 64,
            affine_norm: false,
            stem_padding: Padding::Reflect,
        }
    }

    /// The published layout for a square input of the given size: 9 blocks
    /// from 256 up, 6 blocks below that, and the compact net at 32 or less.
    pub fn for_resolution(size: usize) -> Self {
        match size {
            0..=32 => GeneratorSpec { arch: GeneratorArch::Compact, ..Self::resnet(0) },
            33..=255 => Self::resnet(6),
            _ => Self::resnet(9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidSpec("channel counts must be positive".into()));
        }
        match self.arch {
            GeneratorArch::Passthrough if self.in_channels != self.out_channels => {
                Err(Error::InvalidSpec("passthrough generator needs equal in/out channels".into()))
            }
            GeneratorArch::Passthrough => Ok(()),
            _ if self.base_width == 0 => Err(Error::InvalidSpec("base width must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Checks that an `h x w` input survives the two stride-2 stages and
    /// comes back at the same size.
    pub fn check_hw(&self, h: usize, w: usize) -> Result<()> {
        let ok = match self.arch {
            GeneratorArch::Passthrough => true,
            GeneratorArch::Resnet { .. } => h.is_multiple_of(4) && w.is_multiple_of(4) && h >= 8 && w >= 8,
            GeneratorArch::Compact => h.is_multiple_of(4) && w.is_multiple_of(4) && h >= 4 && w >= 4,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("generator input {h}x{w} must be at least 8 and divisible by 4")))
        }
    }

    /// Mirror image of this spec (out → in), used for the backward
    /// translator of a cycle.
    pub fn reversed(&self) -> Self {
        GeneratorSpec { in_channels: self.out_channels, out_channels: self.in_channels, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscriminatorSpec {
    pub in_channels: usize,
    pub base_width: usize,
    pub affine_norm: bool,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        DiscriminatorSpec { in_channels: 3, base_width: 64, affine_norm: false }
    }
}

impl DiscriminatorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_width == 0 {
            return Err(Error::InvalidSpec("discriminator widths must be positive".into()));
        }
        Ok(())
    }

    /// Spatial size of the score map for an `h x w` input, if the input is
    /// large enough to produce one.
    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (mut h, mut w) = (h, w);
        for stride in [2, 2, 2, 1, 1] {
            let g = ConvGeom::new(1, h, w, 4, stride, 1)?;
            h = g.oh;
            w = g.ow;
        }
        Some((h, w))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NetSpec {
    Generator(GeneratorSpec),
    Discriminator(DiscriminatorSpec),
}

impl NetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NetSpec::Generator(g) => g.validate(),
            NetSpec::Discriminator(d) => d.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Gaussian,
    Zeros,
    Ones,
}

#[derive(Clone, Debug)]
enum Layer {
    Conv { w: usize, b: Option<usize>, stride: usize, pad: usize, reflect: usize },
    ConvTranspose { w: usize, b: Option<usize>, stride: usize, pad: usize, output_pad: usize },
    Norm { affine: Option<(usize, usize)> },
    Relu,
    LeakyRelu,
    Tanh,
    Residual(Vec<Layer>),
}

/// Collects parameter declarations while a layer list is laid out.
struct Builder {
    decls: Vec<(String, Shape, Init)>,
    affine: bool,
}

impl Builder {
    fn declare(&mut self, name: String, shape: Shape, init: Init) -> usize {
        self.decls.push((name, shape, init));
        self.decls.len() - 1
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, bias: bool) -> Layer {
        let w = self.declare(format!("{name}.weight"), [cout, cin, k, k], Init::Gaussian);
        let b = bias.then(|| self.declare(format!("{name}.bias"), [1, cout, 1, 1], Init::Zeros));
        Layer::Conv { w, b, stride, pad, reflect: 0 }
    }

    fn conv_t(&mut self, name: &str, cin: usize, cout: usize, k: usize, pad: usize, output_pad: usize, bias: bool) -> Layer {
        let w = self.declare(format!("{name}.weight"), [cin, cout, k, k], Init::Gaussian);
        let b = bias.then(|| self.declare(format!("{name}.bias"), [1, cout, 1, 1], Init::Zeros));
        Layer::ConvTranspose { w, b, stride: 2, pad, output_pad }
    }

    fn norm(&mut self, name: &str, c: usize) -> Layer {
        let affine = self.affine.then(|| {
            let g = self.declare(format!("{name}.norm.weight"), [1, c, 1, 1], Init::Ones);
            let b = self.declare(format!("{name}.norm.bias"), [1, c, 1, 1], Init::Zeros);
            (g, b)
        });
        Layer::Norm { affine }
    }
}

fn layout(spec: &NetSpec) -> (Vec<Layer>, Vec<(String, Shape, Init)>) {
    let affine = match spec {
        NetSpec::Generator(g) => g.affine_norm,
        NetSpec::Discriminator(d) => d.affine_norm,
    };
    let mut b = Builder { decls: Vec::new(), affine };
    let mut layers = Vec::new();
    match *spec {
        NetSpec::Generator(g) => match g.arch {
            GeneratorArch::Passthrough => {}
            GeneratorArch::Resnet { blocks } => {
                let w = g.base_width;
                let stem = match g.stem_padding {
                    Padding::Reflect => match b.conv("stem", g.in_channels, w, 7, 1, 0, false) {
                        Layer::Conv { w, b, stride, pad, .. } => Layer::Conv { w, b, stride, pad, reflect: 3 },
                        _ => unreachable!(),
                    },
                    Padding::Zero => b.conv("stem", g.in_channels, w, 7, 1, 3, false),
                };
                layers.push(stem);
                layers.push(b.norm("stem", w));
                layers.push(Layer::Relu);
                for (i, (cin, cout)) in [(w, 2 * w), (2 * w, 4 * w)].into_iter().enumerate() {
                    let name = format!("down{}", i + 1);
                    layers.push(b.conv(&name, cin, cout, 3, 2, 1, false));
                    layers.push(b.norm(&name, cout));
                    layers.push(Layer::Relu);
                }
                for i in 0..blocks {
                    let c = 4 * w;
                    let body = vec![
                        b.conv(&format!("res{i}.conv1"), c, c, 3, 1, 1, false),
                        b.norm(&format!("res{i}.conv1"), c),
                        Layer::Relu,
                        b.conv(&format!("res{i}.conv2"), c, c, 3, 1, 1, false),
                        b.norm(&format!("res{i}.conv2"), c),
                    ];
                    layers.push(Layer::Residual(body));
                }
                for (i, (cin, cout)) in [(4 * w, 2 * w), (2 * w, w)].into_iter().enumerate() {
                    let name = format!("up{}", i + 1);
                    layers.push(b.conv_t(&name, cin, cout, 3, 1, 1, false));
                    layers.push(b.norm(&name, cout));
                    layers.push(Layer::Relu);
                }
                layers.push(b.conv("head", w, g.out_channels, 7, 1, 3, true));
                layers.push(Layer::Tanh);
            }
            GeneratorArch::Compact => {
                let w = g.base_width;
                layers.push(b.conv("enc1", g.in_channels, w, 4, 2, 1, true));
                layers.push(Layer::LeakyRelu);
                layers.push(b.conv("enc2", w, 2 * w, 4, 2, 1, false));
                layers.push(b.norm("enc2", 2 * w));
                layers.push(Layer::LeakyRelu);
                for name in ["mid1", "mid2"] {
                    layers.push(b.conv(name, 2 * w, 2 * w, 3, 1, 1, false));
                    layers.push(b.norm(name, 2 * w));
                    layers.push(Layer::LeakyRelu);
                }
                layers.push(b.conv_t("dec1", 2 * w, w, 4, 1, 0, false));
                layers.push(b.norm("dec1", w));
                layers.push(Layer::LeakyRelu);
                layers.push(b.conv_t("dec2", w, g.out_channels, 4, 1, 0, true));
                layers.push(Layer::Tanh);
            }
        },
        NetSpec::Discriminator(d) => {
            let w = d.base_width;
            layers.push(b.conv("conv1", d.in_channels, w, 4, 2, 1, true));
            layers.push(Layer::LeakyRelu);
            for (i, (cin, cout, stride)) in [(w, 2 * w, 2), (2 * w, 4 * w, 2), (4 * w, 8 * w, 1)].into_iter().enumerate() {
                let name = format!("conv{}", i + 2);
                layers.push(b.conv(&name, cin, cout, 4, stride, 1, false));
                layers.push(b.norm(&name, cout));
                layers.push(Layer::LeakyRelu);
            }
            layers.push(b.conv("score", 8 * w, 1, 4, 1, 1, true));
        }
    }
    (layers, b.decls)
}

fn gaussian<R: Rng>(rng: &mut R, std: f64) -> f64 {
    // Box-Muller; `1 - u` keeps the logarithm finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    std * num_traits::Float::sqrt(-2.0 * num_traits::Float::ln(u1)) * num_traits::Float::cos(2.0 * core::f64::consts::PI * u2)
}

/// One network: its spec, its flat list of named parameters, and the layer
/// program that interprets them.
#[derive(Clone, Debug)]
pub struct Network<T> {
    spec: NetSpec,
    params: Vec<Param<T>>,
    layers: Vec<Layer>,
}

impl<T: Real> Network<T> {
    /// Builds and initializes a network: Gaussian weights (std 0.02),
    /// zero biases, unit norm scales. Deterministic in `seed`.
    pub fn new(spec: NetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let (layers, decls) = layout(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = decls
            .into_iter()
            .map(|(name, shape, init)| {
                let value = match init {
                    Init::Zeros => Tensor::zeros(shape),
                    Init::Ones => Tensor::full(shape, T::one()),
                    Init::Gaussian => Tensor::from_fn(shape, |_, _, _, _| T::of(gaussian(&mut rng, INIT_STD))),
                };
                Param { name, value }
            })
            .collect();
        Ok(Network { spec, params, layers })
    }

    pub fn generator(spec: GeneratorSpec, seed: u64) -> Result<Self> {
        Self::new(NetSpec::Generator(spec), seed)
    }

    pub fn discriminator(spec: DiscriminatorSpec, seed: u64) -> Result<Self> {
        Self::new(NetSpec::Discriminator(spec), seed)
    }

    /// Rebuilds a network from stored parameters, checking that names and
    /// shapes match the layout of `spec` exactly.
    pub fn from_params(spec: NetSpec, params: Vec<Param<T>>) -> Result<Self> {
        spec.validate()?;
        let (layers, decls) = layout(&spec);
        if decls.len() != params.len() {
            return Err(Error::InvalidSpec(format!("expected {} parameters, found {}", decls.len(), params.len())));
        }
        for ((name, shape, _), p) in decls.iter().zip(&params) {
            if *name != p.name || *shape != p.value.shape() {
                return Err(Error::InvalidSpec(format!(
                    "parameter `{}` {:?} does not match `{name}` {shape:?}",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        Ok(Network { spec, params, layers })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    /// Number of residual blocks in the layer program.
    pub fn residual_blocks(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Residual(_))).count()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec,
            params: self.params.iter().map(|p| Param { name: p.name.clone(), value: p.value.cast() }).collect(),
            layers: self.layers.clone(),
        }
    }

    /// Checks that `shape` is a valid input batch.
    pub fn check_input(&self, shape: Shape) -> Result<()> {
        let [n, c, h, w] = shape;
        let bad = |why: String| Err(Error::InvalidSpec(why));
        match self.spec {
            NetSpec::Generator(g) => {
                if c != g.in_channels || n == 0 {
                    return Err(Error::ShapeMismatch { expected: [n.max(1), g.in_channels, h, w], actual: shape });
                }
                g.check_hw(h, w)
            }
            NetSpec::Discriminator(d) => {
                if c != d.in_channels || n == 0 {
                    return Err(Error::ShapeMismatch { expected: [n.max(1), d.in_channels, h, w], actual: shape });
                }
                match d.output_hw(h, w) {
                    Some((oh, ow)) if oh > 0 && ow > 0 => Ok(()),
                    _ => bad(format!("discriminator input {h}x{w} is too small")),
                }
            }
        }
    }

    /// Records the forward pass on `tape`. `id` namespaces this network's
    /// parameters; `trainable = false` freezes them (no parameter
    /// gradients, but gradients still flow to the input).
    pub fn forward(&self, tape: &mut Tape<T>, id: usize, x: Var, trainable: bool) -> Result<Var> {
        self.check_input(tape.shape(x))?;
        let mut ctx = Ctx { net: self, tape, id, trainable };
        Ok(ctx.run(&self.layers, x))
    }

    /// Forward pass without gradient bookkeeping.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let out = self.forward(&mut tape, 0, v, false)?;
        Ok(tape.value(out).clone())
    }
}

struct Ctx<'a, 't, T: Real> {
    net: &'a Network<T>,
    tape: &'t mut Tape<T>,
    id: usize,
    trainable: bool,
}

impl<T: Real> Ctx<'_, '_, T> {
    fn p(&mut self, index: usize) -> Var {
        let key = ParamKey { net: self.id, index };
        self.tape.param(key, &self.net.params[index].value, self.trainable)
    }

    fn run(&mut self, layers: &[Layer], mut x: Var) -> Var {
        for layer in layers {
            x = match layer {
                Layer::Conv { w, b, stride, pad, reflect } => {
                    let input = if *reflect > 0 { self.tape.reflect_pad(x, *reflect) } else { x };
                    let wv = self.p(*w);
                    let bv = b.map(|b| self.p(b));
                    self.tape.conv2d(input, wv, bv, *stride, *pad)
                }
                Layer::ConvTranspose { w, b, stride, pad, output_pad } => {
                    let wv = self.p(*w);
                    let bv = b.map(|b| self.p(b));
                    self.tape.conv_transpose2d(x, wv, bv, *stride, *pad, *output_pad)
                }
                Layer::Norm { affine } => {
                    let aff = affine.map(|(g, b)| (self.p(g), self.p(b)));
                    self.tape.instance_norm(x, aff, T::of(NORM_EPS))
                }
                Layer::Relu => self.tape.relu(x),
                Layer::LeakyRelu => self.tape.leaky_relu(x, T::of(LEAKY_SLOPE)),
                Layer::Tanh => self.tape.tanh(x),
                Layer::Residual(body) => {
                    let y = self.run(body, x);
                    self.tape.add(x, y)
                }
            };
        }
        x
    }
}

/// Whether the transformed-domain translator shares parameters with `G_XY`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SharingMode {
    Shared,
    Separate,
}

impl core::str::FromStr for SharingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shared" | "share" => Ok(SharingMode::Shared),
            "separate" => Ok(SharingMode::Separate),
            _ => Err(Error::Unknown { kind: "sharing mode", value: s.to_string() }),
        }
    }
}

impl core::fmt::Display for SharingMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            SharingMode::Shared => "shared",
            SharingMode::Separate => "separate",
        })
    }
}

/// The networks of one translation model, by role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    /// `G_XY`, the deliverable translator.
    Gxy,
    /// `G_X̃Ỹ`, the translator of the transformed domains.
    GxyT,
    /// `D_Y`.
    Dy,
    /// `D_Ỹ`.
    DyT,
    /// `G_YX`, only with the cycle constraint.
    Gyx,
    /// `D_X`, only with the cycle constraint.
    Dx,
}

impl Role {
    pub const ALL: [Role; 6] = [Role::Gxy, Role::GxyT, Role::Dy, Role::DyT, Role::Gyx, Role::Dx];

    pub fn name(self) -> &'static str {
        match self {
            Role::Gxy => "g_xy",
            Role::GxyT => "g_xtyt",
            Role::Dy => "d_y",
            Role::DyT => "d_yt",
            Role::Gyx => "g_yx",
            Role::Dx => "d_x",
        }
    }

    pub fn from_name(name: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn is_generator(self) -> bool {
        matches!(self, Role::Gxy | Role::GxyT | Role::Gyx)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// All networks of a run. In shared mode `G_XY` and `G_X̃Ỹ` resolve to the
/// same storage, so a write through one is visible through the other.
#[derive(Clone, Debug)]
pub struct TranslationModel<T> {
    nets: Vec<Network<T>>,
    slots: [Option<usize>; 6],
    sharing: SharingMode,
}

impl<T: Real> TranslationModel<T> {
    /// Builds `G_XY`, `G_X̃Ỹ`, `D_Y`, `D_Ỹ` and, with `cycle`, `G_YX` and
    /// `D_X`. Each role is seeded from its own stream of `seed`.
    pub fn build(
        generator: GeneratorSpec,
        discriminator: DiscriminatorSpec,
        sharing: SharingMode,
        cycle: bool,
        seed: u64,
    ) -> Result<Self> {
        let role_seed = |r: Role| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64 + 1);
        let mut model = TranslationModel { nets: Vec::new(), slots: [None; 6], sharing: SharingMode::Shared };
        model.insert(Role::Gxy, Network::generator(generator, role_seed(Role::Gxy))?);
        model.slots[Role::GxyT.slot()] = model.slots[Role::Gxy.slot()];
        let d_y = DiscriminatorSpec { in_channels: generator.out_channels, ..discriminator };
        model.insert(Role::Dy, Network::discriminator(d_y, role_seed(Role::Dy))?);
        model.insert(Role::DyT, Network::discriminator(d_y, role_seed(Role::DyT))?);
        if cycle {
            model.insert(Role::Gyx, Network::generator(generator.reversed(), role_seed(Role::Gyx))?);
            let d_x = DiscriminatorSpec { in_channels: generator.in_channels, ..discriminator };
            model.insert(Role::Dx, Network::discriminator(d_x, role_seed(Role::Dx))?);
        }
        Ok(model.bind_translators(sharing))
    }

    /// Assembles a model from already built networks (checkpoint loading).
    /// In shared mode `GxyT` must be absent.
    pub fn from_parts(sharing: SharingMode, parts: Vec<(Role, Network<T>)>) -> Result<Self> {
        let mut model = TranslationModel { nets: Vec::new(), slots: [None; 6], sharing };
        for (role, net) in parts {
            if model.slots[role.slot()].is_some() {
                return Err(Error::InvalidSpec(format!("duplicate network `{}`", role.name())));
            }
            model.insert(role, net);
        }
        for role in [Role::Gxy, Role::Dy, Role::DyT] {
            if model.slots[role.slot()].is_none() {
                return Err(Error::InvalidSpec(format!("missing network `{}`", role.name())));
            }
        }
        match (sharing, model.slots[Role::GxyT.slot()]) {
            (SharingMode::Shared, Some(_)) => {
                return Err(Error::InvalidSpec("shared model cannot carry a separate g_xtyt".into()))
            }
            (SharingMode::Shared, None) => model.slots[Role::GxyT.slot()] = model.slots[Role::Gxy.slot()],
            (SharingMode::Separate, None) => return Err(Error::InvalidSpec("missing network `g_xtyt`".into())),
            (SharingMode::Separate, Some(_)) => {}
        }
        if model.slots[Role::Gyx.slot()].is_some() != model.slots[Role::Dx.slot()].is_some() {
            return Err(Error::InvalidSpec("g_yx and d_x must be present together".into()));
        }
        Ok(model)
    }

    fn insert(&mut self, role: Role, net: Network<T>) {
        self.nets.push(net);
        self.slots[role.slot()] = Some(self.nets.len() - 1);
    }

    pub fn sharing(&self) -> SharingMode {
        self.sharing
    }

    pub fn has_cycle(&self) -> bool {
        self.slots[Role::Gyx.slot()].is_some()
    }

    /// Storage index behind `role`; also the namespace used for its
    /// parameters on a tape.
    pub fn id(&self, role: Role) -> Option<usize> {
        self.slots[role.slot()]
    }

    pub fn net(&self, role: Role) -> Option<&Network<T>> {
        self.id(role).map(|i| &self.nets[i])
    }

    pub fn net_mut(&mut self, role: Role) -> Option<&mut Network<T>> {
        self.id(role).map(move |i| &mut self.nets[i])
    }

    /// Each distinct network once, under the first role that names it.
    pub fn distinct(&self) -> Vec<(Role, usize)> {
        let mut seen = Vec::new();
        for role in Role::ALL {
            if let Some(id) = self.id(role) {
                if !seen.iter().any(|&(_, i)| i == id) {
                    seen.push((role, id));
                }
            }
        }
        seen
    }

    pub fn by_id(&self, id: usize) -> &Network<T> {
        &self.nets[id]
    }

    pub fn by_id_mut(&mut self, id: usize) -> &mut Network<T> {
        &mut self.nets[id]
    }

    /// Re-binds `G_X̃Ỹ`: shared mode aliases it to `G_XY`; separate mode
    /// gives it a deep copy of `G_XY`'s current parameters.
    pub fn bind_translators(mut self, mode: SharingMode) -> Self {
        let gxy = self.slots[Role::Gxy.slot()].expect("model without G_XY");
        let current = self.slots[Role::GxyT.slot()];
        match mode {
            SharingMode::Shared => {
                if let Some(old) = current.filter(|&i| i != gxy) {
                    self.nets.remove(old);
                    for slot in self.slots.iter_mut().flatten() {
                        if *slot > old {
                            *slot -= 1;
                        }
                    }
                }
                self.slots[Role::GxyT.slot()] = self.slots[Role::Gxy.slot()];
            }
            SharingMode::Separate => {
                if current.is_none_or(|i| i == gxy) {
                    let copy = self.nets[gxy].clone();
                    self.insert(Role::GxyT, copy);
                }
            }
        }
        self.sharing = mode;
        self
    }
}
