//! Modified ASM1 reaction network.
//!
//! Particulates are `(X_I, X_S-ND, X_B,H, X_B,A, X_P, X_ND)` and solubles
//! `(S_I, S_S, S_O, S_NO, S_NH, S_ND)`. The second particulate carries slowly
//! biodegradable substrate minus its organic nitrogen, so that the hydrolysis
//! saturation uses `X_S = X_S-ND + X_ND`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;

pub const N_PARTICULATE: usize = 6;
pub const N_SOLUBLE: usize = 6;
pub const N_PROCESSES: usize = 8;

pub type Particulates = [f64; N_PARTICULATE];
pub type Solubles = [f64; N_SOLUBLE];
pub type Rates = [f64; N_PROCESSES];

pub const PARTICULATE_NAMES: [&str; N_PARTICULATE] = ["XI", "XSND", "XBH", "XBA", "XP", "XND"];
pub const SOLUBLE_NAMES: [&str; N_SOLUBLE] = ["SI", "SS", "SO", "SNO", "SNH", "SND"];

const SECONDS_PER_DAY: f64 = 86_400.0;
const GRAMS_PER_KG: f64 = 1_000.0;

/// Kinetic and stoichiometric constants in the customary table units:
/// rates per day, half-saturations in g/m³, ammonification in m³/(g COD·d).
#[derive(Debug, Clone, PartialEq)]
pub struct Asm1Params {
    pub y_a: f64,
    pub y_h: f64,
    pub f_p: f64,
    pub i_xb: f64,
    pub i_xp: f64,
    pub mu_h: f64,
    pub k_s: f64,
    pub k_oh: f64,
    pub k_no: f64,
    pub b_h: f64,
    pub eta_g: f64,
    pub eta_h: f64,
    pub k_h: f64,
    /// Hydrolysis saturation, dimensionless.
    pub k_x: f64,
    pub mu_a: f64,
    pub k_nh_bar: f64,
    pub k_nh: f64,
    pub b_a: f64,
    pub k_oa: f64,
    pub k_a: f64,
}

impl Default for Asm1Params {
    fn default() -> Self {
        Self {
            y_a: 0.24,
            y_h: 0.67,
            f_p: 0.08,
            i_xb: 0.086,
            i_xp: 0.06,
            mu_h: 6.0,
            k_s: 20.0,
            k_oh: 0.2,
            k_no: 0.5,
            b_h: 0.62,
            eta_g: 0.8,
            eta_h: 0.4,
            k_h: 3.0,
            k_x: 0.03,
            mu_a: 0.8,
            k_nh_bar: 0.05,
            k_nh: 1.0,
            b_a: 0.15,
            k_oa: 0.4,
            k_a: 0.08,
        }
    }
}

impl Asm1Params {
    /// Same stoichiometry with every process rate set to zero.
    pub fn inert() -> Self {
        Self { mu_h: 0.0, b_h: 0.0, k_h: 0.0, mu_a: 0.0, b_a: 0.0, k_a: 0.0, ..Self::default() }
    }

    pub fn is_inert(&self) -> bool {
        [self.mu_h, self.b_h, self.k_h, self.mu_a, self.b_a, self.k_a].iter().all(|&r| r == 0.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::invalid("kinetics", msg));
        let all = [
            self.y_a, self.y_h, self.f_p, self.i_xb, self.i_xp, self.mu_h, self.k_s, self.k_oh,
            self.k_no, self.b_h, self.eta_g, self.eta_h, self.k_h, self.k_x, self.mu_a,
            self.k_nh_bar, self.k_nh, self.b_a, self.k_oa, self.k_a,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("parameters must be finite and nonnegative");
        }
        if !(0.0 < self.y_h && self.y_h < 1.0) || !(0.0 < self.f_p && self.f_p < 1.0) {
            return bad("need 0 < Y_H < 1 and 0 < f_P < 1");
        }
        if !(self.y_a > 0.0) {
            return bad("Y_A must be positive");
        }
        let half_sat = [self.k_s, self.k_oh, self.k_no, self.k_x, self.k_nh_bar, self.k_nh, self.k_oa];
        if half_sat.iter().any(|&k| k <= 0.0) {
            return bad("half-saturation constants must be positive");
        }
        Ok(())
    }
}

/// `A / (A + B)`, zero when both vanish.
#[inline]
pub fn monod(a: f64, b: f64) -> f64 {
    let d = a + b;
    if d > 0.0 {
        a / d
    } else {
        0.0
    }
}

/// Reaction terms of one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Reactions {
    /// Particulate terms in COD units, after the packing cutoff.
    pub particulate: Particulates,
    pub soluble: Solubles,
    /// Total solids production rate, kg/(m³ s).
    pub total: f64,
}

/// ASM1 network with rates converted to SI and stoichiometry assembled.
#[derive(Debug, Clone)]
pub struct Kinetics {
    pub params: Asm1Params,
    pub sigma_c: [[f64; N_PROCESSES]; N_PARTICULATE],
    pub sigma_s: [[f64; N_PROCESSES]; N_SOLUBLE],
    /// Solids mass per unit COD.
    pub c_conv: f64,
    x_hat: f64,
    cutoff_width: f64,
    // SI rates and saturations
    mu_h: f64,
    b_h: f64,
    mu_a: f64,
    b_a: f64,
    k_h: f64,
    k_a: f64,
    k_s: f64,
    k_oh: f64,
    k_no: f64,
    k_nh_bar: f64,
    k_nh: f64,
    k_oa: f64,
    inert: bool,
}

/// Width of the growth cutoff below the packing concentration, as a fraction of it.
pub const CUTOFF_FRACTION: f64 = 0.05;

impl Kinetics {
    pub fn new(params: Asm1Params, c_conv: f64, x_hat: f64) -> Result<Self, ConfigError> {
        params.validate()?;
        if !(c_conv > 0.0) {
            return Err(ConfigError::invalid("kinetics", "conversion factor must be positive"));
        }
        let p = &params;
        let x_s_yield = 1.0 - p.f_p * (1.0 + p.i_xp) - p.i_xb;
        let n_decay = p.i_xb - p.f_p * p.i_xp;
        let sigma_c = [
            [0.0; 8],
            [0.0, 0.0, 0.0, x_s_yield, x_s_yield, 0.0, -1.0, 1.0],
            [1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, p.f_p, p.f_p, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, n_decay, n_decay, 0.0, 0.0, -1.0],
        ];
        let sigma_s = [
            [0.0; 8],
            [-1.0 / p.y_h, -1.0 / p.y_h, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            [-(1.0 - p.y_h) / p.y_h, 0.0, -(4.57 - p.y_a) / p.y_a, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, -(1.0 - p.y_h) / (2.86 * p.y_h), 1.0 / p.y_a, 0.0, 0.0, 0.0, 0.0, 0.0],
            [-p.i_xb, -p.i_xb, -p.i_xb - 1.0 / p.y_a, 0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0],
        ];
        let per_s = |r: f64| r / SECONDS_PER_DAY;
        let kg = |k: f64| k / GRAMS_PER_KG;
        Ok(Self {
            sigma_c,
            sigma_s,
            c_conv,
            x_hat,
            cutoff_width: CUTOFF_FRACTION * x_hat,
            mu_h: per_s(p.mu_h),
            b_h: per_s(p.b_h),
            mu_a: per_s(p.mu_a),
            b_a: per_s(p.b_a),
            k_h: per_s(p.k_h),
            k_a: p.k_a * GRAMS_PER_KG / SECONDS_PER_DAY,
            k_s: kg(p.k_s),
            k_oh: kg(p.k_oh),
            k_no: kg(p.k_no),
            k_nh_bar: kg(p.k_nh_bar),
            k_nh: kg(p.k_nh),
            k_oa: kg(p.k_oa),
            inert: p.is_inert(),
            params,
        })
    }

    pub fn is_inert(&self) -> bool {
        self.inert
    }

    pub fn x_hat(&self) -> f64 {
        self.x_hat
    }

    /// Process rates in kg/(m³ s). Negative inputs are treated as zero.
    pub fn rates(&self, c: &Particulates, s: &Solubles) -> Rates {
        if self.inert {
            return [0.0; N_PROCESSES];
        }
        let c = c.map(|v| v.max(0.0));
        let s = s.map(|v| v.max(0.0));
        let [_, x_snd, x_bh, x_ba, _, x_nd] = c;
        let [_, s_s, s_o, s_no, s_nh, s_nd] = s;
        let x_s = x_snd + x_nd;

        let aerobic_h = monod(s_o, self.k_oh);
        let anoxic_h = monod(self.k_oh, s_o);
        let nitrate = monod(s_no, self.k_no);
        let substrate = monod(s_s, self.k_s);
        let ammonia_h = monod(s_nh, self.k_nh_bar);
        let eta_g = self.params.eta_g;
        let eta_h = self.params.eta_h;

        let denom = self.params.k_x * x_bh + x_s;
        let (mu7, mu8) = if denom > 0.0 {
            (x_s * x_bh / denom, x_bh * x_nd / denom)
        } else {
            (0.0, 0.0)
        };
        let hydrolysis = self.k_h * (aerobic_h + eta_h * anoxic_h * nitrate);

        [
            self.mu_h * ammonia_h * substrate * aerobic_h * x_bh,
            self.mu_h * ammonia_h * substrate * anoxic_h * nitrate * eta_g * x_bh,
            self.mu_a * monod(s_nh, self.k_nh) * monod(s_o, self.k_oa) * x_ba,
            self.b_h * x_bh,
            self.b_a * x_ba,
            self.k_a * s_nd * x_bh,
            hydrolysis * mu7,
            hydrolysis * mu8,
        ]
    }

    pub fn checked_rates(&self, c: &Particulates, s: &Solubles) -> Result<Rates, NonFiniteInput> {
        if c.iter().chain(s.iter()).any(|v| v.is_nan()) {
            return Err(NonFiniteInput);
        }
        Ok(self.rates(c, s))
    }

    /// Linear ramp from 1 at `x_hat - width` to 0 at `x_hat`.
    #[inline]
    pub fn growth_cutoff(&self, x: f64) -> f64 {
        ((self.x_hat - x) / self.cutoff_width).clamp(0.0, 1.0)
    }

    pub fn particulate_reactions(&self, c: &Particulates, s: &Solubles, x: f64) -> Particulates {
        let r = self.rates(c, s);
        let chi = self.growth_cutoff(x);
        std::array::from_fn(|k| chi * dot(&self.sigma_c[k], &r))
    }

    pub fn soluble_reactions(&self, c: &Particulates, s: &Solubles) -> Solubles {
        let r = self.rates(c, s);
        std::array::from_fn(|k| dot(&self.sigma_s[k], &r))
    }

    pub fn total_reaction(&self, c: &Particulates, s: &Solubles, x: f64) -> f64 {
        self.c_conv * self.particulate_reactions(c, s, x).iter().sum::<f64>()
    }

    /// All reaction terms from one rate evaluation.
    #[inline]
    pub fn evaluate(&self, c: &Particulates, s: &Solubles, x: f64) -> Reactions {
        if self.inert {
            return Reactions::default();
        }
        let r = self.rates(c, s);
        let chi = self.growth_cutoff(x);
        let particulate: Particulates = std::array::from_fn(|k| chi * dot(&self.sigma_c[k], &r));
        let soluble: Solubles = std::array::from_fn(|k| dot(&self.sigma_s[k], &r));
        let total = self.c_conv * particulate.iter().sum::<f64>();
        Reactions { particulate, soluble, total }
    }

    /// Reactions of a cell held as total solids `x` with mass fractions `p`.
    #[inline]
    pub fn evaluate_fractions(&self, x: f64, p: &Particulates, s: &Solubles) -> Reactions {
        let c = p.map(|pk| pk * x / self.c_conv);
        self.evaluate(&c, s, x)
    }
}

#[inline]
fn dot(a: &[f64; N_PROCESSES], b: &Rates) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("NaN passed to the reaction model")]
pub struct NonFiniteInput;

/// Sampled Lipschitz and loss-rate constants entering the time-step bounds, s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReactionBounds {
    pub m_r: f64,
    pub m_c: f64,
    pub m_s: f64,
}

impl ReactionBounds {
    pub fn max(&self) -> f64 {
        self.m_r.max(self.m_c).max(self.m_s)
    }
}

/// Box of admissible states used for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBox {
    pub x_max: f64,
    pub s_max: Solubles,
}

pub const BOUND_SAMPLES: usize = 100_000;
pub const BOUND_SAFETY: f64 = 1.5;
pub const BOUND_SEED: u64 = 0x5eed_0a5b_0001;

/// One random admissible state `(x, p, s)`.
pub fn sample_state(rng: &mut impl Rng, bx: &SamplingBox) -> (f64, Particulates, Solubles) {
    let x = rng.gen::<f64>() * bx.x_max;
    let p = random_simplex(rng);
    let s = std::array::from_fn(|k| rng.gen::<f64>() * bx.s_max[k]);
    (x, p, s)
}

/// Uniform point on the probability simplex via normalised exponentials.
pub fn random_simplex(rng: &mut impl Rng) -> Particulates {
    let mut p: Particulates = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

fn latin_hypercube(rng: &mut impl Rng, n: usize, dims: usize) -> Vec<Vec<f64>> {
    (0..dims)
        .map(|_| {
            let mut strata: Vec<f64> = (0..n).map(|i| (i as f64 + rng.gen::<f64>()) / n as f64).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                strata.swap(i, j);
            }
            strata
        })
        .collect()
}

impl Kinetics {
    /// Estimate `M_R`, `M_C`, `M_S` over the sampling box.
    ///
    /// `M_R` bounds `|∂R/∂C_k| / c` by central differences. `M_C` and `M_S` bound the
    /// net loss rate of each component relative to its own concentration.
    pub fn derivative_bounds(&self, bx: &SamplingBox, samples: usize, seed: u64) -> Result<ReactionBounds, ConfigError> {
        if self.inert {
            return Ok(ReactionBounds::default());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // 1 dim for X, 6 for the simplex, 6 for S
        let lhs = latin_hypercube(&mut rng, samples, 13);
        let mut raw = ReactionBounds::default();
        for i in 0..samples {
            let x = lhs[0][i] * bx.x_max;
            let mut p: Particulates = std::array::from_fn(|k| -(1.0 - lhs[1 + k][i]).ln());
            let sum: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= sum);
            let s: Solubles = std::array::from_fn(|k| lhs[7 + k][i] * bx.s_max[k]);
            self.accumulate_bounds(x, &p, &s, &mut raw)?;
        }
        // vertices: pure components near packing, substrates at box corners
        for x_corner in [bx.x_max * (1.0 - CUTOFF_FRACTION), bx.x_max] {
        for k in 0..N_PARTICULATE {
            let mut p = [1e-9; N_PARTICULATE];
            p[k] = 1.0 - 5e-9;
            for mask in 0..(1u32 << N_SOLUBLE) {
                let s: Solubles = std::array::from_fn(|m| {
                    if mask & (1 << m) != 0 {
                        bx.s_max[m]
                    } else {
                        1e-9 * bx.s_max[m]
                    }
                });
                self.accumulate_bounds(x_corner, &p, &s, &mut raw)?;
            }
        }
        }
        Ok(ReactionBounds {
            m_r: BOUND_SAFETY * raw.m_r,
            m_c: BOUND_SAFETY * raw.m_c,
            m_s: BOUND_SAFETY * raw.m_s,
        })
    }

    fn accumulate_bounds(&self, x: f64, p: &Particulates, s: &Solubles, acc: &mut ReactionBounds) -> Result<(), ConfigError> {
        let c: Particulates = p.map(|pk| pk * x / self.c_conv);
        let react = self.evaluate(&c, s, x);
        let non_finite = || ConfigError::invalid("kinetics", "non-finite reaction derivative sample");

        for k in 0..N_PARTICULATE {
            if c[k] > 1e-12 {
                let ratio = (-react.particulate[k]).max(0.0) / c[k];
                if !ratio.is_finite() {
                    return Err(non_finite());
                }
                acc.m_c = acc.m_c.max(ratio);
            }
            let h = 1e-6 * c[k].max(1e-3);
            let total_at = |dc: f64| {
                let mut cc = c;
                cc[k] += dc;
                let xx = self.c_conv * cc.iter().sum::<f64>();
                self.evaluate(&cc, s, xx).total
            };
            let deriv = if c[k] > h {
                (total_at(h) - total_at(-h)) / (2.0 * h)
            } else {
                (total_at(h) - react.total) / h
            };
            if !deriv.is_finite() {
                return Err(non_finite());
            }
            acc.m_r = acc.m_r.max(deriv.abs() / self.c_conv);
        }
        for k in 0..N_SOLUBLE {
            if s[k] > 0.0 {
                let ratio = (-react.soluble[k]).max(0.0) / s[k];
                if !ratio.is_finite() {
                    return Err(non_finite());
                }
                acc.m_s = acc.m_s.max(ratio);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinetics() -> Kinetics {
        Kinetics::new(Asm1Params::default(), 0.75, 31.992).unwrap()
    }

    #[test]
    fn monod_basics() {
        assert_eq!(monod(1.0, 1.0), 0.5);
        assert_eq!(monod(0.0, 3.0), 0.0);
        assert_eq!(monod(0.0, 0.0), 0.0);
    }

    #[test]
    fn zero_state_has_zero_rates() {
        let k = kinetics();
        assert_eq!(k.rates(&[0.0; 6], &[0.0; 6]), [0.0; 8]);
        assert_eq!(k.soluble_reactions(&[0.0; 6], &[0.0; 6]), [0.0; 6]);
        assert_eq!(k.total_reaction(&[0.0; 6], &[0.0; 6], 0.0), 0.0);
    }

    #[test]
    fn inert_soluble_never_reacts() {
        let k = kinetics();
        let r = k.soluble_reactions(&[1.0, 0.3, 2.0, 0.1, 0.5, 0.01], &[0.04, 0.06, 0.001, 0.01, 0.01, 0.01]);
        assert_eq!(r[0], 0.0);
        assert!(k.sigma_s[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cutoff_switches_off_particulate_growth() {
        let k = kinetics();
        let c = [0.9, 0.03, 1.45, 0.09, 0.74, 0.0025];
        let s = [0.04, 0.064, 0.0, 0.001, 0.0125, 0.0101];
        assert_eq!(k.particulate_reactions(&c, &s, 31.992), [0.0; 6]);
        assert_eq!(k.particulate_reactions(&c, &s, 40.0), [0.0; 6]);
        let full = k.particulate_reactions(&c, &s, 31.992 * 0.9);
        let sigma_r = k.rates(&c, &s);
        for (row, got) in k.sigma_c.iter().zip(full) {
            assert_eq!(got, dot(row, &sigma_r));
        }
    }

    #[test]
    fn no_biomass_no_reactions() {
        let k = kinetics();
        let c = [1.0, 0.0, 0.0, 0.0, 0.5, 0.0];
        assert_eq!(k.particulate_reactions(&c, &[0.1; 6], 1.0), [0.0; 6]);
    }

    #[test]
    fn hydrolysis_guard_at_origin() {
        let k = kinetics();
        let r = k.rates(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[0.1; 6]);
        assert_eq!(r[6], 0.0);
        assert_eq!(r[7], 0.0);
        // along a ray towards the origin the rates vanish
        for scale in [1e-3, 1e-6, 1e-9] {
            let r = k.rates(&[0.0, scale, scale, 0.0, 0.0, scale], &[0.0, 0.0, 0.0, 0.01, 0.0, 0.0]);
            assert!(r[6] <= 2.0 * k.k_h * scale && r[7] <= 2.0 * k.k_h * scale);
        }
    }

    #[test]
    fn nan_is_rejected() {
        assert!(kinetics().checked_rates(&[f64::NAN; 6], &[0.0; 6]).is_err());
    }

    #[test]
    fn inert_parameters_give_zero_bounds() {
        let k = Kinetics::new(Asm1Params::inert(), 0.75, 31.992).unwrap();
        let bx = SamplingBox { x_max: 31.992, s_max: [0.1; 6] };
        assert_eq!(k.derivative_bounds(&bx, 100, 1).unwrap(), ReactionBounds::default());
    }
}
