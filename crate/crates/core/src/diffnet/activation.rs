use serde::{Deserialize, Serialize};

/// Pointwise nonlinearity applied after a hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// ELU with alpha = 1.
    Elu,
    Identity,
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(z),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Identity => z,
            Activation::Softplus => softplus(z),
        }
    }

    /// Returns `(f(z), f'(z), f''(z))`.
    #[inline]
    pub fn eval2(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = tanh(z);
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
            Activation::Elu => {
                if z > 0.0 {
                    (z, 1.0, 0.0)
                } else {
                    let e = z.exp();
                    (z.exp_m1(), e, e)
                }
            }
            Activation::Identity => (z, 1.0, 0.0),
            Activation::Softplus => {
                let s = sigmoid(z);
                (softplus(z), s, s * (1.0 - s))
            }
        }
    }

    /// Applies the activation in place over a contiguous buffer.
    ///
    /// The tanh branch is written so the loop auto-vectorizes; this is the hot
    /// path of Langevin sampling.
    pub fn apply_slice(self, zs: &mut [f64]) {
        match self {
            Activation::Tanh => {
                for z in zs.iter_mut() {
                    *z = tanh(*z);
                }
            }
            Activation::Identity => {}
            other => {
                for z in zs.iter_mut() {
                    *z = other.apply(*z);
                }
            }
        }
    }
}

const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52

/// `exp(x)` for `x` in `[-40, 40]`, branch-free.
///
/// Cody-Waite reduction `x = n ln2 + r` with `|r| <= ln2/2`, a degree-12 Taylor
/// polynomial for `exp(r)` evaluated in Estrin form (short dependency chains
/// vectorize better than Horner), and `2^n` assembled from the rounding
/// constant's low mantissa bits. Max relative error is a few ulp.
#[inline(always)]
fn exp_bounded(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    const C: [f64; 13] = [
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5_040.0,
        1.0 / 40_320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
    ];
    let t = x * std::f64::consts::LOG2_E + ROUND_MAGIC;
    let n = t - ROUND_MAGIC;
    let r = x - n * LN2_HI - n * LN2_LO;
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let p03 = (C[0] + C[1] * r) + (C[2] + C[3] * r) * r2;
    let p47 = (C[4] + C[5] * r) + (C[6] + C[7] * r) * r2;
    let p811 = (C[8] + C[9] * r) + (C[10] + C[11] * r) * r2;
    let p = (p03 + p47 * r4) + (p811 + C[12] * r4) * r8;
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    p * scale
}

/// Hyperbolic tangent, accurate to ~5e-15 absolute.
///
/// NaN propagates (the clamp keeps it), so fault detection downstream still
/// sees it.
#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    let z = (2.0 * x).clamp(-40.0, 40.0);
    1.0 - 2.0 / (1.0 + exp_bounded(z))
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
