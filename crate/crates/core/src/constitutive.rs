//! Sedimentation and compression laws for flocculated sludge.
//!
//! The hindered-settling velocity follows a Richardson–Zaki-like power law up to
//! an onset concentration and is continued by its tangent until it reaches zero
//! at the maximum packing concentration. Compression enters through an affine
//! effective solids stress above the critical concentration, which makes the
//! diffusion term vanish identically below it.
//!
//! All quantities are SI: concentrations in kg/m³, velocities in m/s.

use crate::error::ConfigError;

/// Parameters of the settling velocity and effective stress.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutiveParams {
    /// Settling velocity of an isolated floc, m/s.
    pub v0: f64,
    /// Concentration at which the power-law velocity is halved, kg/m³.
    pub x_half: f64,
    /// Power-law exponent.
    pub exponent: f64,
    /// Critical concentration where the floc network starts bearing stress, kg/m³.
    pub x_crit: f64,
    /// Slope of the effective stress above the critical concentration, m²/s².
    pub stress_slope: f64,
    pub rho_solid: f64,
    pub rho_liquid: f64,
    pub gravity: f64,
    /// Onset of the tangent continuation, kg/m³.
    pub x_tangent: f64,
}

impl Default for ConstitutiveParams {
    fn default() -> Self {
        Self {
            v0: 1.76e-3,
            x_half: 3.87,
            exponent: 3.58,
            x_crit: 5.0,
            stress_slope: 0.2,
            rho_solid: 1050.0,
            rho_liquid: 998.0,
            gravity: 9.81,
            x_tangent: 25.0,
        }
    }
}

impl ConstitutiveParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::invalid("constitutive", msg));
        if !(self.v0 > 0.0) {
            return bad("v0 must be positive");
        }
        if !(self.exponent > 1.0) {
            return bad("exponent must exceed 1");
        }
        if !(self.x_half > 0.0) {
            return bad("x_half must be positive");
        }
        if !(0.0 < self.x_crit && self.x_crit < self.x_tangent && self.x_tangent < self.rho_solid) {
            return bad("need 0 < x_crit < x_tangent < rho_solid");
        }
        if !(self.rho_solid > self.rho_liquid) {
            return bad("solids must be denser than the liquid");
        }
        if !(self.stress_slope >= 0.0) || !(self.gravity > 0.0) {
            return bad("stress slope must be nonnegative and gravity positive");
        }
        Ok(())
    }

    pub fn density_difference(&self) -> f64 {
        self.rho_solid - self.rho_liquid
    }

    fn power_law(&self, x: f64) -> f64 {
        self.v0 / (1.0 + (x / self.x_half).powf(self.exponent))
    }

    fn power_law_slope(&self, x: f64) -> f64 {
        let r = (x / self.x_half).powf(self.exponent);
        let denom = 1.0 + r;
        -self.v0 * self.exponent * x.powf(self.exponent - 1.0)
            / self.x_half.powf(self.exponent)
            / (denom * denom)
    }

    /// Root of the tangent to the power law at the onset concentration.
    pub fn derive_x_hat(&self) -> Result<f64, ConfigError> {
        let slope = self.power_law_slope(self.x_tangent);
        if !(slope < 0.0) {
            return Err(ConfigError::invalid(
                "constitutive",
                "settling velocity must decrease at the tangent onset",
            ));
        }
        let x_hat = self.x_tangent - self.power_law(self.x_tangent) / slope;
        if x_hat >= self.rho_solid {
            return Err(ConfigError::invalid(
                "constitutive",
                "maximum packing concentration exceeds the solids density",
            ));
        }
        Ok(x_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("concentration {0} is negative")]
pub struct NegativeConcentration(pub f64);

/// Monotone tabulation of the integrated compression function on `[x_crit, x_hat]`.
///
/// Nodes hold exact integrals of `a`; the interpolant is cubic Hermite with
/// slopes `a(x_k)` clipped by the Fritsch–Carlson condition.
#[derive(Debug, Clone)]
struct CompressionTable {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CompressionTable {
    fn build(x0: f64, x1: f64, nodes: usize, a: impl Fn(f64) -> f64) -> Self {
        let h = (x1 - x0) / (nodes - 1) as f64;
        let mut values = Vec::with_capacity(nodes);
        let mut acc = 0.0;
        values.push(0.0);
        for k in 1..nodes {
            let lo = x0 + (k - 1) as f64 * h;
            acc += adaptive_simpson(&a, lo, lo + h, 1e-10 / nodes as f64, 40);
            values.push(acc);
        }
        let mut slopes: Vec<f64> = (0..nodes)
            .map(|k| {
                // right limit at the critical concentration
                let x = if k == 0 { x0 + 1e-12 * x0.max(1.0) } else { x0 + k as f64 * h };
                a(x)
            })
            .collect();
        for k in 0..nodes - 1 {
            let secant = (values[k + 1] - values[k]) / h;
            if secant <= 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let alpha = slopes[k] / secant;
            let beta = slopes[k + 1] / secant;
            let norm = alpha * alpha + beta * beta;
            if norm > 9.0 {
                let t = 3.0 / norm.sqrt();
                slopes[k] = t * alpha * secant;
                slopes[k + 1] = t * beta * secant;
            }
        }
        Self { x0, h, values, slopes }
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.x0 {
            return 0.0;
        }
        let last = self.values.len() - 1;
        let s = (x - self.x0) / self.h;
        let k = (s.floor() as usize).min(last - 1);
        let t = (s - k as f64).clamp(0.0, 1.0);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    /// Interpolant and its derivative.
    fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        if x <= self.x0 {
            return (0.0, 0.0);
        }
        let last = self.values.len() - 1;
        let s = (x - self.x0) / self.h;
        let k = (s.floor() as usize).min(last - 1);
        let t = (s - k as f64).clamp(0.0, 1.0);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let dt = (6.0 * t2 - 6.0 * t) * (y0 - y1) + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1;
        (value, dt / self.h)
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

const SCAN_POINTS: usize = 1 << 14;
const SUP_SAFETY: f64 = 1.05;
const TABLE_NODES: usize = 4097;

/// Constitutive laws together with the derived extrema and the compression table.
#[derive(Debug, Clone)]
pub struct Constitutive {
    pub params: ConstitutiveParams,
    pub x_hat: f64,
    /// Maximiser of the batch flux.
    pub x_star: f64,
    pub f_star: f64,
    /// Inflated supremum of `|f'|` on `[0, x_hat]`.
    pub f_prime_sup: f64,
    /// Inflated supremum of `a` on `[0, x_hat]`.
    pub a_sup: f64,
    a_coeff: f64,
    tangent_value: f64,
    tangent_slope: f64,
    table: CompressionTable,
}

impl Constitutive {
    pub fn new(params: ConstitutiveParams) -> Result<Self, ConfigError> {
        params.validate()?;
        let x_hat = params.derive_x_hat()?;
        let a_coeff = params.rho_solid * params.stress_slope
            / (params.gravity * params.density_difference());
        let mut this = Self {
            tangent_value: params.power_law(params.x_tangent),
            tangent_slope: params.power_law_slope(params.x_tangent),
            params,
            x_hat,
            x_star: 0.0,
            f_star: 0.0,
            f_prime_sup: 0.0,
            a_sup: 0.0,
            a_coeff,
            table: CompressionTable { x0: 0.0, h: 1.0, values: vec![0.0, 0.0], slopes: vec![0.0, 0.0] },
        };
        let x_c = this.params.x_crit;
        this.table = CompressionTable::build(x_c, x_hat, TABLE_NODES, |x| this.diffusion_a(x));
        this.derive_extrema()?;
        Ok(this)
    }

    /// Hindered-settling velocity, m/s. Expects `x >= 0`.
    #[inline]
    pub fn settling_velocity(&self, x: f64) -> f64 {
        if x <= self.params.x_tangent {
            self.params.power_law(x.max(0.0))
        } else if x < self.x_hat {
            (self.tangent_value + self.tangent_slope * (x - self.params.x_tangent)).max(0.0)
        } else {
            0.0
        }
    }

    pub fn checked_settling_velocity(&self, x: f64) -> Result<f64, NegativeConcentration> {
        if x < 0.0 || x.is_nan() {
            return Err(NegativeConcentration(x));
        }
        Ok(self.settling_velocity(x))
    }

    pub fn settling_velocity_slope(&self, x: f64) -> f64 {
        if x <= self.params.x_tangent {
            self.params.power_law_slope(x.max(0.0))
        } else if x < self.x_hat {
            self.tangent_slope
        } else {
            0.0
        }
    }

    pub fn effective_stress(&self, x: f64) -> f64 {
        if x < self.params.x_crit {
            0.0
        } else {
            self.params.stress_slope * (x - self.params.x_crit)
        }
    }

    pub fn effective_stress_slope(&self, x: f64) -> f64 {
        if x < self.params.x_crit {
            0.0
        } else {
            self.params.stress_slope
        }
    }

    /// `d(X) = v_hs ρ_s σ_e' / (g X Δρ)`.
    pub fn diffusion_d(&self, x: f64) -> f64 {
        if x <= self.params.x_crit {
            0.0
        } else {
            self.diffusion_a(x) / x
        }
    }

    /// `a(X) = X d(X)`; zero at and below the critical concentration.
    #[inline]
    pub fn diffusion_a(&self, x: f64) -> f64 {
        if x <= self.params.x_crit {
            0.0
        } else {
            self.a_coeff * self.settling_velocity(x)
        }
    }

    /// Integral of `a` from the critical concentration, served from the table.
    #[inline]
    pub fn integrated_diffusion(&self, x: f64) -> f64 {
        self.table.eval(x.min(self.x_hat))
    }

    /// Tabulated `𝒟` together with its exact derivative, for Newton iterations.
    #[inline]
    pub fn integrated_diffusion_with_slope(&self, x: f64) -> (f64, f64) {
        if x >= self.x_hat {
            (self.table.eval(self.x_hat), 0.0)
        } else {
            self.table.eval_with_slope(x)
        }
    }

    #[inline]
    pub fn batch_flux(&self, x: f64) -> f64 {
        self.settling_velocity(x) * x
    }

    pub fn batch_flux_slope(&self, x: f64) -> f64 {
        self.settling_velocity(x) + x * self.settling_velocity_slope(x)
    }

    fn derive_extrema(&mut self) -> Result<(), ConfigError> {
        let n = SCAN_POINTS;
        let h = self.x_hat / n as f64;
        let xs: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| self.batch_flux(x)).collect();

        let mut sign_changes = 0;
        let mut prev_sign = 0i8;
        for w in fs.windows(2) {
            let d = w[1] - w[0];
            let s = if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 };
            if s != 0 {
                if prev_sign != 0 && s != prev_sign {
                    sign_changes += 1;
                }
                prev_sign = s;
            }
        }
        if sign_changes > 1 {
            return Err(ConfigError::invalid("constitutive", "batch flux is not unimodal"));
        }

        let k_max = fs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let lo = xs[k_max.saturating_sub(1)];
        let hi = xs[(k_max + 1).min(n)];
        self.x_star = golden_max(|x| self.batch_flux(x), lo, hi, 1e-10);
        self.f_star = self.batch_flux(self.x_star);
        if !(self.x_star > 0.0 && self.x_star < self.x_hat) {
            return Err(ConfigError::invalid("constitutive", "flux maximiser outside (0, x_hat)"));
        }

        let mut fp = 0.0_f64;
        for k in 0..=n {
            let d = if k == 0 {
                (fs[1] - fs[0]) / h
            } else if k == n {
                (fs[n] - fs[n - 1]) / h
            } else {
                (fs[k + 1] - fs[k - 1]) / (2.0 * h)
            };
            fp = fp.max(d.abs());
        }
        self.f_prime_sup = SUP_SAFETY * fp;

        let x_c = self.params.x_crit;
        let a_max = xs
            .iter()
            .map(|&x| self.diffusion_a(x))
            .chain(std::iter::once(self.diffusion_a(x_c * (1.0 + 1e-12))))
            .fold(0.0_f64, f64::max);
        self.a_sup = SUP_SAFETY * a_max;
        Ok(())
    }
}

/// Golden-section search for the maximiser of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo) > rel_tol * (lo.abs() + hi.abs()).max(f64::MIN_POSITIVE) {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
