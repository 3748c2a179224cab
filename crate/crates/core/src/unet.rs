//! Reti-UNet1 / Reti-UNet2 assembled from the primitives in [`crate::nn`].
//!
//! Topology for a config with depth `D = encoder_channels.len()`:
//!
//! * encoder stage `i`: two 3×3 conv + ReLU to `encoder_channels[i]`; the
//!   result is kept as skip `i`, then 2×2 max-pooled;
//! * bridge: 3×3 conv + ReLU to `bridge.0`, then to `bridge.1`;
//! * decoder stage `i`: 2×2 stride-2 up-conv to `decoder_channels[i]`,
//!   concatenation with skip `D − 1 − i`, two 3×3 conv + ReLU back to
//!   `decoder_channels[i]`;
//! * head: 1×1 conv to one channel, sigmoid.
//!
//! Parameters are stored in one ordered list whose names and shapes come
//! from [`shape_table`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, conv2d, conv2d_backward, maxpool2, maxpool2_backward, relu, relu_backward, sigmoid,
    sigmoid_backward, split_channels, upconv2, upconv2_backward, AffineGrads, PoolIndices,
};
use crate::tensor::{Element, Tensor4};

/// Channel layout of a U-Net. Channel counts are divided by `width_scale`
/// (1 = full width) to get the built network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub encoder_channels: Vec<usize>,
    pub bridge_channels: (usize, usize),
    pub decoder_channels: Vec<usize>,
    #[serde(default = "one")]
    pub in_channels: usize,
    #[serde(default = "one")]
    pub width_scale: usize,
}

fn one() -> usize {
    1
}

impl UNetConfig {
    /// Four encoders `{64,128,256,512}`, bridge `[512,1024]`, decoders `{512,256,128,64}`.
    pub fn reti_unet1() -> Self {
        Self {
            encoder_channels: vec![64, 128, 256, 512],
            bridge_channels: (512, 1024),
            decoder_channels: vec![512, 256, 128, 64],
            in_channels: 1,
            width_scale: 1,
        }
    }

    /// Five encoders `{64,128,256,512,512}`, bridge `[512,1024]`, decoders `{512,512,256,128,64}`.
    pub fn reti_unet2() -> Self {
        Self {
            encoder_channels: vec![64, 128, 256, 512, 512],
            bridge_channels: (512, 1024),
            decoder_channels: vec![512, 512, 256, 128, 64],
            in_channels: 1,
            width_scale: 1,
        }
    }

    pub fn with_width_scale(mut self, width_scale: usize) -> Self {
        self.width_scale = width_scale;
        self
    }

    pub fn depth(&self) -> usize {
        self.encoder_channels.len()
    }

    fn scaled(&self, c: usize) -> usize {
        c / self.width_scale
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.encoder_channels.is_empty() {
            return bad("at least one encoder stage is required".into());
        }
        if self.encoder_channels.len() != self.decoder_channels.len() {
            return bad(format!(
                "{} encoder stages but {} decoder stages",
                self.encoder_channels.len(),
                self.decoder_channels.len()
            ));
        }
        if self.in_channels == 0 || self.width_scale == 0 {
            return bad("in_channels and width_scale must be >= 1".into());
        }
        let all = self
            .encoder_channels
            .iter()
            .chain(&self.decoder_channels)
            .chain([&self.bridge_channels.0, &self.bridge_channels.1]);
        for &c in all {
            if c % self.width_scale != 0 || c / self.width_scale == 0 {
                return bad(format!("width_scale {} does not divide channel count {c} to >= 1", self.width_scale));
            }
        }
        Ok(())
    }

    /// Errors unless both spatial dims are divisible by `2^depth`.
    pub fn check_spatial(&self, h: usize, w: usize) -> Result<()> {
        let f = 1usize << self.depth();
        if h == 0 || w == 0 || h % f != 0 || w % f != 0 {
            return Err(Error::IndivisibleSpatialDim { h, w, depth: self.depth() });
        }
        Ok(())
    }
}

/// The two architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "reti-unet1")]
    RetiUNet1,
    #[serde(rename = "reti-unet2")]
    RetiUNet2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::RetiUNet1, ModelKind::RetiUNet2];

    pub fn config(self) -> UNetConfig {
        match self {
            ModelKind::RetiUNet1 => UNetConfig::reti_unet1(),
            ModelKind::RetiUNet2 => UNetConfig::reti_unet2(),
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::RetiUNet1 => "reti-unet1",
            ModelKind::RetiUNet2 => "reti-unet2",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::RetiUNet1 => "Reti-UNet1",
            ModelKind::RetiUNet2 => "Reti-UNet2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reti-unet1" | "retiunet1" => Ok(ModelKind::RetiUNet1),
            "reti-unet2" | "retiunet2" => Ok(ModelKind::RetiUNet2),
            other => Err(Error::ConfigInvalid(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: [usize; 4],
    /// He-uniform fan-in; zero marks a bias.
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Every parameter's name and shape, in canonical order.
pub fn shape_table(cfg: &UNetConfig) -> Result<Vec<ParamSpec>> {
    cfg.validate()?;
    let mut t = Vec::new();
    let conv = |t: &mut Vec<ParamSpec>, name: String, out: usize, inp: usize, k: usize| {
        t.push(ParamSpec { name: format!("{name}.w"), shape: [out, inp, k, k], fan_in: inp * k * k });
        t.push(ParamSpec { name: format!("{name}.b"), shape: [out, 1, 1, 1], fan_in: 0 });
    };
    let enc: Vec<usize> = cfg.encoder_channels.iter().map(|&c| cfg.scaled(c)).collect();
    let dec: Vec<usize> = cfg.decoder_channels.iter().map(|&c| cfg.scaled(c)).collect();
    let (b0, b1) = (cfg.scaled(cfg.bridge_channels.0), cfg.scaled(cfg.bridge_channels.1));
    let depth = enc.len();

    let mut prev = cfg.in_channels;
    for (i, &c) in enc.iter().enumerate() {
        conv(&mut t, format!("enc{i}.conv1"), c, prev, 3);
        conv(&mut t, format!("enc{i}.conv2"), c, c, 3);
        prev = c;
    }
    conv(&mut t, "bridge.conv1".into(), b0, prev, 3);
    conv(&mut t, "bridge.conv2".into(), b1, b0, 3);
    prev = b1;
    for (i, &c) in dec.iter().enumerate() {
        let skip = enc[depth - 1 - i];
        // each output pixel of a stride-2 2x2 transposed conv receives one tap per input channel
        t.push(ParamSpec { name: format!("dec{i}.up.w"), shape: [prev, c, 2, 2], fan_in: prev });
        t.push(ParamSpec { name: format!("dec{i}.up.b"), shape: [c, 1, 1, 1], fan_in: 0 });
        conv(&mut t, format!("dec{i}.conv1"), c, c + skip, 3);
        conv(&mut t, format!("dec{i}.conv2"), c, c, 3);
        prev = c;
    }
    conv(&mut t, "head".into(), 1, prev, 1);
    Ok(t)
}

/// Index layout of the parameter list.
#[derive(Debug, Clone, Copy)]
struct Layout {
    depth: usize,
}

impl Layout {
    fn enc(&self, i: usize) -> usize {
        4 * i
    }
    fn bridge(&self) -> usize {
        4 * self.depth
    }
    fn dec(&self, i: usize) -> usize {
        4 * self.depth + 4 + 6 * i
    }
    fn head(&self) -> usize {
        4 * self.depth + 4 + 6 * self.depth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    config: UNetConfig,
    seed: u64,
    specs: Vec<ParamSpec>,
    params: Vec<Tensor4<T>>,
}

/// Builds a model with He-uniform weights (`U(−√(6/fan_in), √(6/fan_in))`)
/// drawn from a ChaCha8 stream keyed by `seed`, and zero biases.
pub fn build_unet<T: Element>(cfg: &UNetConfig, seed: u64) -> Result<Model<T>> {
    let specs = shape_table(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = specs
        .iter()
        .map(|s| {
            if s.fan_in == 0 {
                return Tensor4::zeros(s.shape);
            }
            let bound = (6.0 / s.fan_in as f64).sqrt();
            let data = (0..s.numel()).map(|_| T::from_f64_lossy((2.0 * rng.gen::<f64>() - 1.0) * bound)).collect();
            Tensor4::from_vec(s.shape, data).expect("shape from table")
        })
        .collect();
    Ok(Model { config: cfg.clone(), seed, specs, params })
}

impl<T: Element> Model<T> {
    /// Reassembles a model from tensors listed in shape-table order.
    pub fn from_params(config: UNetConfig, seed: u64, params: Vec<Tensor4<T>>) -> Result<Self> {
        let specs = shape_table(&config)?;
        if specs.len() != params.len() {
            return Err(Error::ShapeMismatch(format!("{} tensors for {} parameters", params.len(), specs.len())));
        }
        for (s, p) in specs.iter().zip(&params) {
            if s.shape != p.shape() {
                return Err(Error::ShapeHeaderMismatch { name: s.name.clone(), expected: s.shape, found: p.shape() });
            }
        }
        Ok(Self { config, seed, specs, params })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.config.depth()
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor4::len).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &Tensor4<T>)> {
        self.specs.iter().map(|s| s.name.as_str()).zip(&self.params)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor4<T>> {
        self.specs.iter().position(|s| s.name == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor4<T>> {
        self.specs.iter().position(|s| s.name == name).map(move |i| &mut self.params[i])
    }

    pub fn cast<U: Element>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            seed: self.seed,
            specs: self.specs.clone(),
            params: self.params.iter().map(Tensor4::cast).collect(),
        }
    }

    fn layout(&self) -> Layout {
        Layout { depth: self.depth() }
    }

    fn wb(&self, idx: usize) -> (&Tensor4<T>, &[T]) {
        (&self.params[idx], self.params[idx + 1].data())
    }

    /// Zips parameters with their gradients for an optimizer step.
    pub fn updates<'a>(&'a mut self, grads: &'a LayerGrads<T>) -> Result<Vec<(&'a str, &'a mut Tensor4<T>, &'a Tensor4<T>)>> {
        if grads.names != self.specs.iter().map(|s| s.name.clone()).collect::<Vec<_>>() {
            return Err(Error::ShapeMismatch("gradient set does not match model parameters".into()));
        }
        Ok(self
            .specs
            .iter()
            .map(|s| s.name.as_str())
            .zip(self.params.iter_mut())
            .zip(&grads.grads)
            .map(|((n, p), g)| (n, p, g))
            .collect())
    }
}

/// One gradient per parameter, in the model's canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T = f32> {
    names: Vec<String>,
    grads: Vec<Tensor4<T>>,
}

impl<T: Element> LayerGrads<T> {
    pub fn get(&self, name: &str) -> Option<&Tensor4<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.grads[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor4<T>)> {
        self.names.iter().map(String::as_str).zip(&self.grads)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

#[derive(Debug, Clone)]
struct StageCache<T> {
    input: Tensor4<T>,
    a1: Tensor4<T>,
    a2: Tensor4<T>,
}

#[derive(Debug, Clone)]
struct DecoderCache<T> {
    up_input: Tensor4<T>,
    up_channels: usize,
    stage: StageCache<T>,
}

/// Intermediates saved by a forward pass for [`unet_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    encoders: Vec<StageCache<T>>,
    pools: Vec<PoolIndices>,
    bridge: StageCache<T>,
    decoders: Vec<DecoderCache<T>>,
    probs: Tensor4<T>,
}

impl<T: Element> ForwardCache<T> {
    /// Output probabilities of the cached pass.
    pub fn probs(&self) -> &Tensor4<T> {
        &self.probs
    }

    /// Which side of every ReLU and max-pool kink the pass landed on. Two
    /// passes with equal signatures lie on one smooth piece of the network.
    pub fn kink_signature(&self) -> Vec<u8> {
        let stages = self.encoders.iter().chain(std::iter::once(&self.bridge)).chain(self.decoders.iter().map(|d| &d.stage));
        let mut sig: Vec<u8> = stages
            .flat_map(|s| s.a1.data().iter().chain(s.a2.data()))
            .map(|v| u8::from(*v > T::zero()))
            .collect();
        for p in &self.pools {
            sig.extend_from_slice(p.argmax());
        }
        sig
    }
}

fn double_conv<T: Element>(model: &Model<T>, base: usize, input: &Tensor4<T>) -> Result<(Tensor4<T>, Tensor4<T>)> {
    let (w1, b1) = model.wb(base);
    let a1 = relu(&conv2d(input, w1, b1)?);
    let (w2, b2) = model.wb(base + 2);
    let a2 = relu(&conv2d(&a1, w2, b2)?);
    Ok((a1, a2))
}

/// Runs the network. Returns sigmoid probabilities of shape `(n, 1, h, w)`
/// and, when `keep_cache`, everything [`unet_backward`] needs.
pub fn unet_forward<T: Element>(
    model: &Model<T>,
    x: &Tensor4<T>,
    keep_cache: bool,
) -> Result<(Tensor4<T>, Option<ForwardCache<T>>)> {
    let cfg = model.config();
    if x.c() != cfg.in_channels {
        return Err(Error::ShapeMismatch(format!("input has {} channels, model expects {}", x.c(), cfg.in_channels)));
    }
    cfg.check_spatial(x.h(), x.w())?;
    let layout = model.layout();
    let depth = model.depth();

    let mut encoders = Vec::with_capacity(depth);
    let mut pools = Vec::with_capacity(depth);
    let mut cur = x.clone();
    for i in 0..depth {
        let (a1, a2) = double_conv(model, layout.enc(i), &cur)?;
        let (pooled, idx) = maxpool2(&a2)?;
        encoders.push(StageCache { input: if keep_cache { cur } else { Tensor4::zeros([0; 4]) }, a1, a2 });
        pools.push(idx);
        cur = pooled;
    }
    let (a1, a2) = double_conv(model, layout.bridge(), &cur)?;
    let bridge = StageCache { input: cur, a1, a2 };
    let mut decoders: Vec<DecoderCache<T>> = Vec::with_capacity(depth);
    for i in 0..depth {
        let prev = decoders.last().map_or(&bridge.a2, |d| &d.stage.a2);
        let (uw, ub) = model.wb(layout.dec(i));
        let up = upconv2(prev, uw, ub)?;
        let up_channels = up.c();
        let cat = concat_channels(&up, &encoders[depth - 1 - i].a2)?;
        let (a1, a2) = double_conv(model, layout.dec(i) + 2, &cat)?;
        let up_input = if keep_cache { prev.clone() } else { Tensor4::zeros([0; 4]) };
        decoders.push(DecoderCache { up_input, up_channels, stage: StageCache { input: cat, a1, a2 } });
        if !keep_cache && i > 0 {
            // only the newest decoder output feeds the next stage
            let d = &mut decoders[i - 1].stage;
            d.a1 = Tensor4::zeros([0; 4]);
            d.a2 = Tensor4::zeros([0; 4]);
            d.input = Tensor4::zeros([0; 4]);
        }
    }
    let last = &decoders.last().expect("depth >= 1").stage.a2;
    let (hw, hb) = model.wb(layout.head());
    let probs = sigmoid(&conv2d(last, hw, hb)?)?;
    if !keep_cache {
        return Ok((probs, None));
    }
    Ok((probs.clone(), Some(ForwardCache { encoders, pools, bridge, decoders, probs })))
}

fn put<T: Element>(grads: &mut [Option<Tensor4<T>>], base: usize, g: AffineGrads<T>) -> Tensor4<T> {
    let nb = g.dbias.len();
    grads[base] = Some(g.dweight);
    grads[base + 1] = Some(Tensor4::from_vec([nb, 1, 1, 1], g.dbias).expect("bias shape"));
    g.dx
}

fn double_conv_backward<T: Element>(
    model: &Model<T>,
    base: usize,
    cache: &StageCache<T>,
    d_a2: &Tensor4<T>,
    grads: &mut [Option<Tensor4<T>>],
) -> Result<Tensor4<T>> {
    let dz2 = relu_backward(&cache.a2, d_a2)?;
    let d_a1 = put(grads, base + 2, conv2d_backward(&cache.a1, &model.params[base + 2], &dz2)?);
    let dz1 = relu_backward(&cache.a1, &d_a1)?;
    Ok(put(grads, base, conv2d_backward(&cache.input, &model.params[base], &dz1)?))
}

/// Reverse pass: gradients of every parameter given `dprobs = ∂L/∂probs`.
pub fn unet_backward<T: Element>(
    model: &Model<T>,
    cache: Option<&ForwardCache<T>>,
    dprobs: &Tensor4<T>,
) -> Result<LayerGrads<T>> {
    let cache = cache.ok_or(Error::MissingCache)?;
    cache.probs.same_shape(dprobs, "dprobs")?;
    let layout = model.layout();
    let depth = model.depth();
    let mut grads: Vec<Option<Tensor4<T>>> = vec![None; model.params.len()];

    let dz = sigmoid_backward(&cache.probs, dprobs)?;
    let last = &cache.decoders[depth - 1].stage.a2;
    let mut d = put(&mut grads, layout.head(), conv2d_backward(last, &model.params[layout.head()], &dz)?);

    let mut d_skips: Vec<Option<Tensor4<T>>> = vec![None; depth];
    for i in (0..depth).rev() {
        let dc = &cache.decoders[i];
        let d_cat = double_conv_backward(model, layout.dec(i) + 2, &dc.stage, &d, &mut grads)?;
        let (d_up, d_skip) = split_channels(&d_cat, dc.up_channels)?;
        d_skips[depth - 1 - i] = Some(d_skip);
        d = put(&mut grads, layout.dec(i), upconv2_backward(&dc.up_input, &model.params[layout.dec(i)], &d_up)?);
    }
    d = double_conv_backward(model, layout.bridge(), &cache.bridge, &d, &mut grads)?;
    for i in (0..depth).rev() {
        let mut d_a2 = maxpool2_backward(&d, &cache.pools[i])?;
        d_a2.add_assign(d_skips[i].as_ref().expect("every skip receives a gradient"))?;
        d = double_conv_backward(model, layout.enc(i), &cache.encoders[i], &d_a2, &mut grads)?;
    }

    let grads: Vec<Tensor4<T>> = grads.into_iter().map(|g| g.expect("every parameter has a gradient")).collect();
    for g in &grads {
        g.ensure_finite("unet backward")?;
    }
    Ok(LayerGrads { names: model.specs.iter().map(|s| s.name.clone()).collect(), grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reti_unet1_shapes_at_full_width() {
        let cfg = UNetConfig::reti_unet1();
        let t = shape_table(&cfg).unwrap();
        assert_eq!(t.len(), 4 * 4 + 4 + 6 * 4 + 2);
        assert_eq!(cfg.depth(), 4);
        // 512 / 2^4
        assert_eq!(512 >> cfg.depth(), 32);
        assert_eq!(t.iter().find(|s| s.name == "bridge.conv2.w").unwrap().shape, [1024, 512, 3, 3]);
        assert_eq!(t.iter().find(|s| s.name == "dec0.up.w").unwrap().shape, [1024, 512, 2, 2]);
        assert_eq!(t.iter().find(|s| s.name == "dec0.conv1.w").unwrap().shape, [512, 1024, 3, 3]);
        assert_eq!(t.last().unwrap().name, "head.b");
    }

    #[test]
    fn reti_unet2_depth_five() {
        let cfg = UNetConfig::reti_unet2();
        assert_eq!(cfg.depth(), 5);
        assert_eq!(512 >> cfg.depth(), 16);
        let t = shape_table(&cfg).unwrap();
        // first decoder pairs with the fifth (512-channel) encoder
        assert_eq!(t.iter().find(|s| s.name == "dec0.conv1.w").unwrap().shape, [512, 1024, 3, 3]);
        assert_eq!(t.iter().find(|s| s.name == "dec1.conv1.w").unwrap().shape, [512, 1024, 3, 3]);
        assert_eq!(t.iter().find(|s| s.name == "dec4.conv1.w").unwrap().shape, [64, 128, 3, 3]);
    }

    #[test]
    fn config_validation() {
        assert!(UNetConfig::reti_unet1().with_width_scale(3).validate().is_err());
        assert!(UNetConfig::reti_unet1().with_width_scale(128).validate().is_err());
        assert!(UNetConfig::reti_unet1().with_width_scale(64).validate().is_ok());
        let mut c = UNetConfig::reti_unet1();
        c.decoder_channels.pop();
        assert!(matches!(c.validate(), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("Reti-UNet2".parse::<ModelKind>().unwrap(), ModelKind::RetiUNet2);
        assert!("unet3".parse::<ModelKind>().is_err());
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        let cfg = UNetConfig::reti_unet1().with_width_scale(16);
        let a: Model = build_unet(&cfg, 5).unwrap();
        let b: Model = build_unet(&cfg, 5).unwrap();
        let c: Model = build_unet(&cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let cfg = UNetConfig::reti_unet1().with_width_scale(16);
        let m: Model = build_unet(&cfg, 0).unwrap();
        let x = Tensor4::zeros([1, 1, 24, 24]);
        assert!(matches!(unet_forward(&m, &x, false), Err(Error::IndivisibleSpatialDim { .. })));
        let x = Tensor4::zeros([1, 2, 32, 32]);
        assert!(matches!(unet_forward(&m, &x, false), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn backward_without_cache() {
        let cfg = UNetConfig::reti_unet1().with_width_scale(16);
        let m: Model = build_unet(&cfg, 0).unwrap();
        let (p, cache) = unet_forward(&m, &Tensor4::zeros([1, 1, 16, 16]), false).unwrap();
        assert!(cache.is_none());
        assert!(matches!(unet_backward(&m, None, &p), Err(Error::MissingCache)));
    }
}
