//! Test-only reference implementations, written independently of the engine
//! and cipher code they check.

#![allow(dead_code)]

use weightlock::nn::{Activation, ArchitectureDescriptor, Layer, Model, Padding};

/// Brute-force f64 forward pass: plain nested loops over every output and
/// every kernel tap, straight from the layer definitions.
pub struct Oracle {
    /// Smallest |pre-activation| at a ReLU, and smallest gap between the top
    /// two values of a pooling window. Finite differences are only reliable
    /// when both stay clear of zero.
    pub margin: f64,
}

fn pad_of(p: Padding, k: usize) -> usize {
    match p {
        Padding::Same => (k - 1) / 2,
        Padding::Explicit(n) => n,
    }
}

impl Oracle {
    pub fn new() -> Self {
        Self {
            margin: f64::INFINITY,
        }
    }

    pub fn logits(
        &mut self,
        arch: &ArchitectureDescriptor,
        params: &[Vec<f64>],
        input: &[f64],
    ) -> Vec<f64> {
        let (mut c, mut h, mut w) = arch.input_shape();
        let mut x = input.to_vec();
        let mut p = 0;
        for layer in arch.layers() {
            match *layer {
                Layer::Conv2d {
                    out_channels,
                    kernel: (kh, kw),
                    stride,
                    padding,
                    activation,
                } => {
                    let (ph, pw) = (pad_of(padding, kh), pad_of(padding, kw));
                    let oh = (h + 2 * ph - kh) / stride + 1;
                    let ow = (w + 2 * pw - kw) / stride + 1;
                    let wt = &params[p];
                    let b = &params[p + 1];
                    let mut y = vec![0.0; out_channels * oh * ow];
                    for o in 0..out_channels {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut s = b[o];
                                for ci in 0..c {
                                    for ky in 0..kh {
                                        for kx in 0..kw {
                                            let iy = (oy * stride + ky) as isize - ph as isize;
                                            let ix = (ox * stride + kx) as isize - pw as isize;
                                            if iy < 0
                                                || ix < 0
                                                || iy >= h as isize
                                                || ix >= w as isize
                                            {
                                                continue;
                                            }
                                            let wv = wt[((o * c + ci) * kh + ky) * kw + kx];
                                            s += wv * x[(ci * h + iy as usize) * w + ix as usize];
                                        }
                                    }
                                }
                                y[(o * oh + oy) * ow + ox] = self.act(activation, s);
                            }
                        }
                    }
                    x = y;
                    c = out_channels;
                    h = oh;
                    w = ow;
                    p += 2;
                }
                Layer::MaxPool2d {
                    pool: (ph, pw),
                    stride,
                } => {
                    let oh = (h - ph) / stride + 1;
                    let ow = (w - pw) / stride + 1;
                    let mut y = vec![0.0; c * oh * ow];
                    for ch in 0..c {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut vals = Vec::new();
                                for dy in 0..ph {
                                    for dx in 0..pw {
                                        vals.push(
                                            x[(ch * h + oy * stride + dy) * w + ox * stride + dx],
                                        );
                                    }
                                }
                                vals.sort_by(|a, b| b.total_cmp(a));
                                if vals.len() > 1 {
                                    self.margin = self.margin.min(vals[0] - vals[1]);
                                }
                                y[(ch * oh + oy) * ow + ox] = vals[0];
                            }
                        }
                    }
                    x = y;
                    h = oh;
                    w = ow;
                }
                Layer::Flatten => {
                    c *= h * w;
                    h = 1;
                    w = 1;
                }
                Layer::Dense {
                    out_features,
                    activation,
                } => {
                    let n_in = x.len();
                    let wt = &params[p];
                    let b = &params[p + 1];
                    let y = (0..out_features)
                        .map(|o| {
                            let mut s = b[o];
                            for i in 0..n_in {
                                s += wt[o * n_in + i] * x[i];
                            }
                            self.act(activation, s)
                        })
                        .collect();
                    x = y;
                    c = out_features;
                    h = 1;
                    w = 1;
                    p += 2;
                }
            }
        }
        x
    }

    fn act(&mut self, a: Activation, z: f64) -> f64 {
        match a {
            Activation::Linear => z,
            Activation::Relu => {
                self.margin = self.margin.min(z.abs());
                z.max(0.0)
            }
        }
    }

    /// Mean softmax cross-entropy over a batch.
    pub fn loss(
        &mut self,
        arch: &ArchitectureDescriptor,
        params: &[Vec<f64>],
        inputs: &[Vec<f64>],
        labels: &[usize],
    ) -> f64 {
        let mut total = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            let z = self.logits(arch, params, x);
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse - z[y];
        }
        total / inputs.len() as f64
    }
}

pub fn params_f64(m: &Model) -> Vec<Vec<f64>> {
    m.params()
        .iter()
        .map(|t| t.values.iter().map(|&v| v as f64).collect())
        .collect()
}

/// Reference S-Box computed from its algebraic definition: multiplicative
/// inverse in GF(2^8) modulo x^8 + x^4 + x^3 + x + 1, then the affine map
/// with constant 0x63.
pub fn reference_sbox() -> [u8; 256] {
    fn gmul(mut a: u8, mut b: u8) -> u8 {
        let mut r = 0u8;
        while b != 0 {
            if b & 1 != 0 {
                r ^= a;
            }
            let hi = a & 0x80;
            a <<= 1;
            if hi != 0 {
                a ^= 0x1b;
            }
            b >>= 1;
        }
        r
    }
    let mut out = [0u8; 256];
    for x in 0..=255u8 {
        let inv = if x == 0 {
            0
        } else {
            (1..=255u8).find(|&y| gmul(x, y) == 1).unwrap()
        };
        let mut s = 0u8;
        for i in 0..8 {
            let bit = ((inv >> i)
                ^ (inv >> ((i + 4) % 8))
                ^ (inv >> ((i + 5) % 8))
                ^ (inv >> ((i + 6) % 8))
                ^ (inv >> ((i + 7) % 8))
                ^ (0x63 >> i))
                & 1;
            s |= bit << i;
        }
        out[x as usize] = s;
    }
    out
}

pub fn hex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

/// FIPS-197 Appendix A.1: expansion of 2b7e1516 28aed2a6 abf71588 09cf4f3c.
pub const FIPS197_A1_EXPANSION: &str = concat!(
    "2b7e151628aed2a6abf7158809cf4f3c",
    "a0fafe1788542cb123a339392a6c7605",
    "f2c295f27a96b9435935807a7359f67f",
    "3d80477d4716fe3e1e237e446d7a883b",
    "ef44a541a8525b7fb671253bdb0bad00",
    "d4d1c6f87c839d87caf2b8bc11f915bc",
    "6d88a37a110b3efddbf98641ca0093fd",
    "4e54f70e5f5fc9f384a64fb24ea6dc4f",
    "ead27321b58dbad2312bf5607f8d292f",
    "ac7766f319fadc2128d12941575c006e",
    "d014f9a8c9ee2589e13f0cc8b6630ca6",
);
