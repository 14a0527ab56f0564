//! Declarative model descriptions.
//!
//! A [`ModelSpec`] names one of the model families and its hyperparameters;
//! [`ModelSpec::param_count`] derives the number of trainable scalars from the
//! description alone, independently of [`crate::nn::Model::build`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `L` same-padded convolutions, ReLU between, last layer one channel.
    Cnn,
    /// Like `Cnn` with coordinate channels concatenated before convolutions.
    Ccnn,
    /// Convolution block, CoordGate, then a 1x1 convolution to one channel.
    Cg,
    /// A single locally connected layer with shared bias.
    Lcn,
    /// U-Net backbone; gates and coordinate channels are opt-in flags.
    Unet,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatePlacement {
    #[default]
    None,
    /// After the conv block of every down- and up-sampling level (U-Net).
    Resample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordPlacement {
    /// Before every convolution (cCNN) or every U-Net block.
    #[default]
    EveryLayer,
    /// Only before the first convolution.
    FirstLayer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Gate computed by a pixel-wise MLP of the coordinate map.
    #[default]
    Encoded,
    /// Gate values are themselves the trainable parameters.
    Direct,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordSource {
    /// Normalized coordinate ramps.
    #[default]
    Grid,
    /// Static i.i.d. U(-1, 1) values, seeded by `coord_seed`.
    Random,
}

fn default_base() -> usize {
    8
}
fn default_max_channels() -> usize {
    64
}
fn one() -> usize {
    1
}
fn default_encoder_width() -> usize {
    16
}
fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Number of convolution layers (`CNN`, `cCNN`, `CG`).
    #[serde(rename = "L", default)]
    pub layers: usize,
    /// Kernel size.
    #[serde(default)]
    pub k: usize,
    /// Channels per convolution layer.
    #[serde(default)]
    pub c: usize,
    /// Coordinate-encoder depth.
    #[serde(default = "two")]
    pub p: usize,
    /// Number of resampling steps of a U-Net.
    #[serde(default)]
    pub depth: usize,
    #[serde(default = "default_base")]
    pub base_channels: usize,
    #[serde(default)]
    pub gate_placement: GatePlacement,

    /// Spatial extent of the input: `[n]` or `[h, w]`.
    pub extent: Vec<usize>,
    #[serde(default = "one")]
    pub in_channels: usize,
    /// Cap on U-Net channel doubling.
    #[serde(default = "default_max_channels")]
    pub max_channels: usize,
    /// Hidden width of U-Net gate encoders (CG models use `c`).
    #[serde(default = "default_encoder_width")]
    pub encoder_width: usize,
    /// Concatenate coordinates at the input of each U-Net block.
    #[serde(default)]
    pub coordconv: bool,
    #[serde(default)]
    pub coord_placement: CoordPlacement,
    #[serde(default)]
    pub gate_mode: GateMode,
    #[serde(default)]
    pub coord_source: CoordSource,
    #[serde(default)]
    pub coord_seed: u64,
    /// Add the input to the output (U-Net).
    #[serde(default)]
    pub residual: bool,
    /// Display name override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl ModelSpec {
    fn base(kind: ModelKind, extent: &[usize]) -> Self {
        Self {
            kind,
            layers: 0,
            k: 0,
            c: 0,
            p: 2,
            depth: 0,
            base_channels: default_base(),
            gate_placement: GatePlacement::None,
            extent: extent.to_vec(),
            in_channels: 1,
            max_channels: default_max_channels(),
            encoder_width: default_encoder_width(),
            coordconv: false,
            coord_placement: CoordPlacement::EveryLayer,
            gate_mode: GateMode::Encoded,
            coord_source: CoordSource::Grid,
            coord_seed: 0,
            residual: false,
            name: None,
        }
    }

    pub fn cnn(layers: usize, k: usize, c: usize, extent: &[usize]) -> Self {
        Self {
            layers,
            k,
            c,
            ..Self::base(ModelKind::Cnn, extent)
        }
    }

    pub fn ccnn(layers: usize, k: usize, c: usize, extent: &[usize]) -> Self {
        Self {
            layers,
            k,
            c,
            ..Self::base(ModelKind::Ccnn, extent)
        }
    }

    pub fn cg(layers: usize, k: usize, c: usize, p: usize, extent: &[usize]) -> Self {
        Self {
            layers,
            k,
            c,
            p,
            ..Self::base(ModelKind::Cg, extent)
        }
    }

    pub fn lcn(k: usize, extent: &[usize]) -> Self {
        Self {
            layers: 1,
            k,
            c: 1,
            ..Self::base(ModelKind::Lcn, extent)
        }
    }

    pub fn unet(depth: usize, extent: &[usize]) -> Self {
        Self {
            depth,
            k: 3,
            ..Self::base(ModelKind::Unet, extent)
        }
    }

    pub fn cg_unet(depth: usize, extent: &[usize]) -> Self {
        Self {
            gate_placement: GatePlacement::Resample,
            ..Self::unet(depth, extent)
        }
    }

    pub fn coordconv_unet(depth: usize, extent: &[usize]) -> Self {
        Self {
            coordconv: true,
            ..Self::unet(depth, extent)
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn dims(&self) -> usize {
        self.extent.len()
    }

    pub fn is_gated(&self) -> bool {
        match self.kind {
            ModelKind::Cg => true,
            ModelKind::Unet => self.gate_placement == GatePlacement::Resample,
            _ => false,
        }
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let (l, k, c, p, d) = (self.layers, self.k, self.c, self.p, self.depth);
        match self.kind {
            ModelKind::Cnn => format!("CNN({l},{k},{c})"),
            ModelKind::Ccnn => format!("cCNN({l},{k},{c})"),
            ModelKind::Cg => match self.gate_mode {
                GateMode::Encoded => format!("CG({l},{k},{c},{p})"),
                GateMode::Direct => format!("CG-direct({l},{k},{c})"),
            },
            ModelKind::Lcn => format!("LCN({k})"),
            ModelKind::Unet if self.is_gated() => format!("CG U-Net({d})"),
            ModelKind::Unet if self.coordconv => format!("CoordConv-UNet({d})"),
            ModelKind::Unet => format!("U-Net({d})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.display_name())));
        if self.extent.is_empty() || self.extent.len() > 2 || self.extent.contains(&0) {
            return bad(format!("extent must be [n] or [h, w], got {:?}", self.extent));
        }
        if self.in_channels == 0 {
            return bad("in_channels must be positive".into());
        }
        if self.k.is_multiple_of(2) {
            return bad(format!("kernel size must be odd, got {}", self.k));
        }
        match self.kind {
            ModelKind::Cnn | ModelKind::Ccnn | ModelKind::Cg => {
                if self.layers == 0 || self.c == 0 {
                    return bad("L and c must be positive".into());
                }
                if self.kind == ModelKind::Cg && self.gate_mode == GateMode::Encoded && self.p == 0 {
                    return bad("encoder depth p must be at least 1".into());
                }
            }
            ModelKind::Lcn => {}
            ModelKind::Unet => {
                if self.dims() != 2 {
                    return bad("U-Net needs a 2-D extent".into());
                }
                if self.depth == 0 || self.base_channels == 0 {
                    return bad("depth and base_channels must be positive".into());
                }
                let f = 1usize << self.depth;
                if self.extent.iter().any(|&e| e % f != 0) {
                    return bad(format!(
                        "extent {:?} not divisible by 2^{}",
                        self.extent, self.depth
                    ));
                }
                if self.is_gated() && self.gate_mode == GateMode::Encoded && self.p == 0 {
                    return bad("encoder depth p must be at least 1".into());
                }
            }
        }
        Ok(())
    }

    /// Channels of U-Net level `l` (level `depth` is the bottleneck).
    pub fn unet_channels(&self, level: usize) -> usize {
        (self.base_channels << level.min(20)).min(self.max_channels.max(self.base_channels))
    }

    /// Spatial extent at U-Net level `l`.
    pub fn level_extent(&self, level: usize) -> Vec<usize> {
        self.extent.iter().map(|&e| e >> level).collect()
    }

    fn kernel_taps(&self, k: usize) -> usize {
        k.pow(self.dims() as u32)
    }

    /// Trainable scalars, computed from the description alone.
    pub fn param_count(&self) -> usize {
        let cd = self.dims();
        let taps = self.kernel_taps(self.k);
        let conv = |taps: usize, cin: usize, cout: usize| taps * cin * cout + cout;
        let pixels = |ext: &[usize]| ext.iter().product::<usize>();
        let gate = |ext: &[usize], width: usize, out: usize| -> usize {
            match self.gate_mode {
                GateMode::Direct => pixels(ext) * out,
                GateMode::Encoded => {
                    let mut widths = vec![cd];
                    widths.extend(std::iter::repeat_n(width, self.p.saturating_sub(1)));
                    widths.push(out);
                    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
                }
            }
        };
        match self.kind {
            ModelKind::Cnn | ModelKind::Ccnn => (0..self.layers)
                .map(|i| {
                    let mut cin = if i == 0 { self.in_channels } else { self.c };
                    let cout = if i + 1 == self.layers { 1 } else { self.c };
                    let coords_here = self.kind == ModelKind::Ccnn
                        && (i == 0 || self.coord_placement == CoordPlacement::EveryLayer);
                    if coords_here {
                        cin += cd;
                    }
                    conv(taps, cin, cout)
                })
                .sum(),
            ModelKind::Cg => {
                let block: usize = (0..self.layers)
                    .map(|i| {
                        let cin = if i == 0 { self.in_channels } else { self.c };
                        conv(taps, cin, self.c)
                    })
                    .sum();
                block + gate(&self.extent, self.c, self.c) + conv(1, self.c, 1)
            }
            ModelKind::Lcn => pixels(&self.extent) * taps * self.in_channels + 1,
            ModelKind::Unet => {
                let d = self.depth;
                let cc = if self.coordconv { cd } else { 0 };
                let ch = |l: usize| self.unet_channels(l);
                let block = |cin: usize, cout: usize| conv(taps, cin + cc, cout) + conv(taps, cout, cout);
                let mut total = 0;
                for l in 0..d {
                    let cin = if l == 0 { self.in_channels } else { ch(l - 1) };
                    total += block(cin, ch(l));
                    total += block(ch(l + 1) + ch(l), ch(l));
                    if self.is_gated() {
                        total += 2 * gate(&self.level_extent(l), self.encoder_width, ch(l));
                    }
                }
                total += block(ch(d - 1), ch(d));
                total + conv(1, ch(0), self.in_channels)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnn_single_layer_count() {
        assert_eq!(ModelSpec::cnn(1, 7, 1, &[30]).param_count(), 8);
    }

    #[test]
    fn cg_count_by_hand() {
        // conv 7*1*3+3, encoder 1->3->3 on a 1-D map, head 3+1
        let s = ModelSpec::cg(1, 7, 3, 2, &[30]);
        assert_eq!(s.param_count(), 24 + (3 + 3) + (9 + 3) + 4);
        // 2-D coordinates: encoder input has two channels
        let s2 = ModelSpec::cg(1, 7, 3, 2, &[16, 16]);
        assert_eq!(s2.param_count(), (49 * 3 + 3) + (2 * 3 + 3) + (9 + 3) + 4);
    }

    #[test]
    fn unet_channels_double_and_cap() {
        let s = ModelSpec::unet(4, &[64, 64]);
        let ch: Vec<_> = (0..=4).map(|l| s.unet_channels(l)).collect();
        assert_eq!(ch, vec![8, 16, 32, 64, 64]);
    }

    #[test]
    fn unet_count_grows_with_depth() {
        let counts: Vec<_> = (1..=5)
            .map(|d| ModelSpec::unet(d, &[64, 64]).param_count())
            .collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
        assert_eq!(counts[1], 29617);
    }

    #[test]
    fn unet_divisibility() {
        assert!(ModelSpec::unet(3, &[12, 12]).validate().is_err());
        assert!(ModelSpec::unet(2, &[12, 12]).validate().is_ok());
    }

    #[test]
    fn json_keys() {
        let s = ModelSpec::cg(1, 7, 3, 3, &[30]);
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["kind", "L", "k", "c", "p", "depth", "base_channels", "gate_placement"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: ModelSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
        let minimal: ModelSpec =
            serde_json::from_str(r#"{"kind":"unet","depth":2,"k":3,"extent":[32,32],"gate_placement":"resample"}"#)
                .unwrap();
        assert_eq!(minimal.display_name(), "CG U-Net(2)");
    }
}
