//! Architecture descriptors and their line-oriented text form.
//!
//! ```text
//! input 1x28x28
//! conv 16 5x5 stride 1 pad valid relu
//! maxpool 2x2 stride 2
//! flatten
//! dense 100 relu
//! dense 10 linear
//! ```
//!
//! `#` starts a comment; blank lines are ignored. The `input CxHxW` line must
//! come first. The number of classes is the width of the final dense layer.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// `(k - 1) / 2` on each side; odd kernels only.
    Same,
    Explicit(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layer {
    Conv2d {
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: Padding,
        activation: Activation,
    },
    MaxPool2d {
        pool: (usize, usize),
        stride: usize,
    },
    Flatten,
    Dense {
        out_features: usize,
        activation: Activation,
    },
}

impl Layer {
    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Conv2d { .. } | Layer::Dense { .. })
    }
}

/// Activation shape between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Spatial { c, h, w } => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Spatial { c, h, w } => write!(f, "{c}x{h}x{w}"),
            Shape::Flat(n) => write!(f, "{n}"),
        }
    }
}

/// Name and shape of one parameter tensor, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A shape-checked network description. Construction fails unless every
/// layer accepts its input shape and the last layer is a dense layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchitectureDescriptor {
    input: (usize, usize, usize),
    layers: Vec<Layer>,
    shapes: Vec<Shape>,
}

impl ArchitectureDescriptor {
    pub fn new(input: (usize, usize, usize), layers: Vec<Layer>) -> Result<Self> {
        let (c, h, w) = input;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "input shape {c}x{h}x{w} has a zero dimension"
            )));
        }
        let mut shapes = Vec::with_capacity(layers.len() + 1);
        let mut cur = Shape::Spatial { c, h, w };
        shapes.push(cur);
        for (i, layer) in layers.iter().enumerate() {
            cur = output_shape(layer, cur).map_err(|m| Error::Shape(format!("layer {i}: {m}")))?;
            shapes.push(cur);
        }
        match layers.last() {
            Some(Layer::Dense { .. }) => {}
            _ => {
                return Err(Error::Shape(
                    "final layer must be a dense layer producing class logits".into(),
                ))
            }
        }
        Ok(Self {
            input,
            layers,
            shapes,
        })
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input
    }

    pub fn input_len(&self) -> usize {
        self.input.0 * self.input.1 * self.input.2
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// `shapes()[i]` is the input of layer `i`; the last entry is the output.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().map(Shape::len).unwrap_or(0)
    }

    /// Parameter tensors in canonical order: layer order, weight then bias.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let input = self.shapes[i];
            match *layer {
                Layer::Conv2d {
                    out_channels,
                    kernel: (kh, kw),
                    ..
                } => {
                    let Shape::Spatial { c, .. } = input else {
                        unreachable!("checked at construction")
                    };
                    let fan_in = c * kh * kw;
                    out.push(ParamSpec {
                        name: format!("layer{i}.conv.weight"),
                        shape: vec![out_channels, c, kh, kw],
                        fan_in,
                    });
                    out.push(ParamSpec {
                        name: format!("layer{i}.conv.bias"),
                        shape: vec![out_channels],
                        fan_in,
                    });
                }
                Layer::Dense { out_features, .. } => {
                    let fan_in = input.len();
                    out.push(ParamSpec {
                        name: format!("layer{i}.dense.weight"),
                        shape: vec![out_features, fan_in],
                        fan_in,
                    });
                    out.push(ParamSpec {
                        name: format!("layer{i}.dense.bias"),
                        shape: vec![out_features],
                        fan_in,
                    });
                }
                Layer::MaxPool2d { .. } | Layer::Flatten => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_specs().iter().map(ParamSpec::len).sum()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

pub(crate) fn resolve_padding(padding: Padding, kernel: usize) -> usize {
    match padding {
        Padding::Same => (kernel - 1) / 2,
        Padding::Explicit(p) => p,
    }
}

fn output_shape(layer: &Layer, input: Shape) -> std::result::Result<Shape, String> {
    match *layer {
        Layer::Conv2d {
            out_channels,
            kernel: (kh, kw),
            stride,
            padding,
            ..
        } => {
            let Shape::Spatial { h, w, .. } = input else {
                return Err(format!("conv expects a spatial input, got flat {input}"));
            };
            if out_channels == 0 || kh == 0 || kw == 0 || stride == 0 {
                return Err("conv sizes and stride must be positive".into());
            }
            if padding == Padding::Same && (kh % 2 == 0 || kw % 2 == 0) {
                return Err("pad same requires odd kernel sizes".into());
            }
            let (ph, pw) = (resolve_padding(padding, kh), resolve_padding(padding, kw));
            if h + 2 * ph < kh || w + 2 * pw < kw {
                return Err(format!("kernel {kh}x{kw} larger than padded input {input}"));
            }
            Ok(Shape::Spatial {
                c: out_channels,
                h: (h + 2 * ph - kh) / stride + 1,
                w: (w + 2 * pw - kw) / stride + 1,
            })
        }
        Layer::MaxPool2d {
            pool: (ph, pw),
            stride,
        } => {
            let Shape::Spatial { c, h, w } = input else {
                return Err(format!("maxpool expects a spatial input, got flat {input}"));
            };
            if ph == 0 || pw == 0 || stride == 0 {
                return Err("pool sizes and stride must be positive".into());
            }
            if h < ph || w < pw {
                return Err(format!("pool {ph}x{pw} larger than input {input}"));
            }
            Ok(Shape::Spatial {
                c,
                h: (h - ph) / stride + 1,
                w: (w - pw) / stride + 1,
            })
        }
        Layer::Flatten => Ok(Shape::Flat(input.len())),
        Layer::Dense { out_features, .. } => match input {
            Shape::Flat(_) if out_features > 0 => Ok(Shape::Flat(out_features)),
            Shape::Flat(_) => Err("dense width must be positive".into()),
            Shape::Spatial { .. } => Err(format!(
                "dense expects a flat input, got {input}; insert `flatten`"
            )),
        },
    }
}

impl fmt::Display for ArchitectureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, h, w) = self.input;
        writeln!(f, "input {c}x{h}x{w}")?;
        for layer in &self.layers {
            match *layer {
                Layer::Conv2d {
                    out_channels,
                    kernel: (kh, kw),
                    stride,
                    padding,
                    activation,
                } => {
                    let pad = match padding {
                        Padding::Same => "same".to_string(),
                        Padding::Explicit(0) => "valid".to_string(),
                        Padding::Explicit(p) => p.to_string(),
                    };
                    writeln!(
                        f,
                        "conv {out_channels} {kh}x{kw} stride {stride} pad {pad} {}",
                        activation.as_str()
                    )?
                }
                Layer::MaxPool2d {
                    pool: (ph, pw),
                    stride,
                } => writeln!(f, "maxpool {ph}x{pw} stride {stride}")?,
                Layer::Flatten => writeln!(f, "flatten")?,
                Layer::Dense {
                    out_features,
                    activation,
                } => writeln!(f, "dense {out_features} {}", activation.as_str())?,
            }
        }
        Ok(())
    }
}

struct LineParser<'a> {
    line: usize,
    tokens: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
    last: &'a str,
}

impl<'a> LineParser<'a> {
    fn err(&self, token: &str, message: impl Into<String>) -> Error {
        Error::ArchParse {
            line: self.line,
            token: token.to_string(),
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        match self.tokens.next() {
            Some(t) => {
                self.last = t;
                Ok(t)
            }
            None => Err(self.err(self.last, format!("expected {what} after this token"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        t.parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| self.err(t, format!("expected positive integer {what}")))
    }

    fn pair(&mut self, what: &str) -> Result<(usize, usize)> {
        let t = self.next(what)?;
        parse_dims(t)
            .filter(|d| d.len() == 2)
            .map(|d| (d[0], d[1]))
            .ok_or_else(|| self.err(t, format!("expected {what} as HxW")))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.next(kw)?;
        if t == kw {
            Ok(())
        } else {
            Err(self.err(t, format!("expected keyword `{kw}`")))
        }
    }

    fn activation(&mut self) -> Result<Activation> {
        let t = self.next("activation")?;
        match t {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            _ => Err(self.err(t, "expected activation `relu` or `linear`")),
        }
    }

    fn finish(&mut self) -> Result<()> {
        match self.tokens.next() {
            None => Ok(()),
            Some(t) => Err(self.err(t, "unexpected trailing token")),
        }
    }
}

fn parse_dims(t: &str) -> Option<Vec<usize>> {
    t.split('x')
        .map(|p| p.parse::<usize>().ok().filter(|&n| n > 0))
        .collect()
}

impl FromStr for ArchitectureDescriptor {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut input = None;
        let mut layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("");
            let mut p = LineParser {
                line: idx + 1,
                tokens: content.split_whitespace().peekable(),
                last: "",
            };
            let Some(head) = p.tokens.next() else {
                continue;
            };
            p.last = head;
            if input.is_none() && head != "input" {
                return Err(p.err(head, "first line must be `input CxHxW`"));
            }
            match head {
                "input" => {
                    if input.is_some() {
                        return Err(p.err(head, "duplicate input line"));
                    }
                    let t = p.next("input shape")?;
                    let dims = parse_dims(t)
                        .filter(|d| d.len() == 3)
                        .ok_or_else(|| p.err(t, "expected input shape as CxHxW"))?;
                    input = Some((dims[0], dims[1], dims[2]));
                }
                "conv" => {
                    let out_channels = p.number("output channels")?;
                    let kernel = p.pair("kernel size")?;
                    p.keyword("stride")?;
                    let stride = p.number("stride")?;
                    p.keyword("pad")?;
                    let t = p.next("padding")?;
                    let padding = match t {
                        "same" => Padding::Same,
                        "valid" => Padding::Explicit(0),
                        n => Padding::Explicit(n.parse().map_err(|_| {
                            p.err(t, "expected padding `same`, `valid` or an integer")
                        })?),
                    };
                    let activation = p.activation()?;
                    layers.push(Layer::Conv2d {
                        out_channels,
                        kernel,
                        stride,
                        padding,
                        activation,
                    });
                }
                "maxpool" => {
                    let pool = p.pair("pool size")?;
                    p.keyword("stride")?;
                    let stride = p.number("stride")?;
                    layers.push(Layer::MaxPool2d { pool, stride });
                }
                "flatten" => layers.push(Layer::Flatten),
                "dense" => {
                    let out_features = p.number("output features")?;
                    let activation = p.activation()?;
                    layers.push(Layer::Dense {
                        out_features,
                        activation,
                    });
                }
                other => return Err(p.err(other, "unknown layer type")),
            }
            p.finish()?;
        }
        let input = input.ok_or_else(|| Error::ArchParse {
            line: 0,
            token: String::new(),
            message: "missing `input CxHxW` line".into(),
        })?;
        ArchitectureDescriptor::new(input, layers)
    }
}

/// Layer configurations whose parameter counts reproduce the reference
/// table: 86,166 / 180,438 / 1,250,858.
pub mod presets {
    use super::ArchitectureDescriptor;

    pub const MNIST: &str = include_str!("../../archs/mnist.arch");
    pub const FASHION_MNIST: &str = include_str!("../../archs/fashion_mnist.arch");
    pub const CIFAR10: &str = include_str!("../../archs/cifar10.arch");

    pub fn by_name(name: &str) -> Option<ArchitectureDescriptor> {
        let text = match name {
            "mnist" => MNIST,
            "fashion-mnist" | "fashion_mnist" => FASHION_MNIST,
            "cifar10" | "cifar-10" => CIFAR10,
            _ => return None,
        };
        Some(text.parse().expect("bundled architecture parses"))
    }

    pub fn mnist() -> ArchitectureDescriptor {
        by_name("mnist").unwrap()
    }

    pub fn fashion_mnist() -> ArchitectureDescriptor {
        by_name("fashion-mnist").unwrap()
    }

    pub fn cifar10() -> ArchitectureDescriptor {
        by_name("cifar10").unwrap()
    }
}
