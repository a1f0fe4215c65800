//! Adaptive Gauss–Kronrod quadrature and cumulative-integral tables.

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 40;

/// Default absolute tolerance.
pub const DEFAULT_ABS_TOL: f64 = 1e-10;

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let (val, err) = gk15(f, a, b);
    if !val.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    if err <= tol || depth >= MAX_DEPTH {
        return Ok(val);
    }
    let m = 0.5 * (a + b);
    Ok(adapt(f, a, m, 0.5 * tol, depth + 1)? + adapt(f, m, b, 0.5 * tol, depth + 1)?)
}

/// `∫ₐᵇ f` to absolute tolerance `tol` (orientation respected).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    adapt(&f, a, b, tol, 0)
}

/// `x ↦ ∫_{anchor}^{x} f` tabulated on uniform nodes and evaluated by cubic
/// Hermite interpolation with the integrand as the exact slope.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CumulativeTable {
    pub fn build(
        f: impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        anchor: f64,
        nodes: usize,
        tol: f64,
    ) -> Result<Self> {
        if nodes < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument(
                "table needs at least two nodes on a nonempty interval".into(),
            ));
        }
        if !(lo..=hi).contains(&anchor) {
            return Err(Error::InvalidArgument(format!(
                "anchor {anchor} outside [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (nodes - 1) as f64;
        let x = |k: usize| lo + step * k as f64;
        let seg_tol = tol / nodes as f64;
        let mut values = Vec::with_capacity(nodes);
        let mut acc = 0.0;
        values.push(0.0);
        for k in 1..nodes {
            acc += integrate(&f, x(k - 1), x(k), seg_tol)?;
            values.push(acc);
        }
        let offset = integrate(&f, lo, anchor, tol)?;
        for v in &mut values {
            *v -= offset;
        }
        let slopes = (0..nodes).map(|k| f(x(k))).collect();
        Ok(Self {
            lo,
            step,
            values,
            slopes,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (self.values.len() - 1) as f64)
    }

    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&x) {
            return Err(Error::Domain {
                q: vec![x],
                index: 0,
                value: x,
                lower: lo,
                upper: hi,
            });
        }
        let k = (((x - lo) / self.step).floor() as usize).min(self.values.len() - 2);
        let t = (x - (lo + self.step * k as f64)) / self.step;
        Ok((k, t))
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let (k, t) = self.locate(x)?;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.values[k]
            + h10 * self.step * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.step * self.slopes[k + 1])
    }

    /// Derivative of the interpolant.
    pub fn slope(&self, x: f64) -> Result<f64> {
        let (k, t) = self.locate(x)?;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / self.step;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / self.step;
        let d11 = 3.0 * t2 - 2.0 * t;
        Ok(d00 * self.values[k]
            + d10 * self.slopes[k]
            + d01 * self.values[k + 1]
            + d11 * self.slopes[k + 1])
    }
}
