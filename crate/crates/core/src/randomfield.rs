//! Flux densities supported in `T_b` and i.i.d. sampling of plaquet fluxes.
//!
//! The concrete density is a `cos⁴` bump on each arc of its support. The
//! profile vanishes with its first three derivatives at the arc endpoints, so
//! it is `C²` on the whole torus. Samples are drawn by inverse-CDF lookup in a
//! precomputed monotone table, driven by counter-based uniforms keyed on
//! `(master_seed, sample_index, plaquet index)`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{distance_from_zero_and_pi, wrap, FluxField};
use crate::lattice::{BoxRegion, Plaquet};
use crate::rng::CounterStream;

/// Number of knots in the inverse-CDF table.
pub const TABLE_KNOTS: usize = 1 << 14;

/// How the density mass is split between the two arcs of `T_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Equal mass on `[b, π-b]` and `[-(π-b), -b]`.
    #[default]
    Symmetric,
    /// All mass on `[b, π-b]`.
    SingleArc,
}

/// Config-file form of a density: `{"b": .., "profile": "cos4", "mode": ..}`.
/// `arc` overrides the support of the positive arc (used for controls that
/// deliberately leave `T_b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub b: f64,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default)]
    pub mode: DensityMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<[f64; 2]>,
}

fn default_profile() -> String {
    "cos4".to_string()
}

/// Normalised `cos⁴` profile on `s ∈ [0, 1]` and its inverse CDF table.
#[derive(Debug)]
struct UnitProfileTable {
    // knots of the inverse CDF on u ∈ [0, 1/2]; s(u) is odd-symmetric about 1/2
    u: Vec<f64>,
    s: Vec<f64>,
    slope: Vec<f64>,
}

/// `∫_{-π/2}^{θ} cos⁴` up to an additive constant.
fn cos4_antiderivative(theta: f64) -> f64 {
    3.0 * theta / 8.0 + (2.0 * theta).sin() / 4.0 + (4.0 * theta).sin() / 32.0
}

/// CDF of the normalised unit profile `(8/3) cos⁴(π(s - 1/2))` on `[0, 1]`.
fn unit_cdf(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    let theta = PI * (s - 0.5);
    (cos4_antiderivative(theta) - cos4_antiderivative(-FRAC_PI_2)) / (3.0 * PI / 8.0)
}

impl UnitProfileTable {
    fn build() -> Self {
        let half = TABLE_KNOTS;
        let mut u = Vec::with_capacity(half);
        let mut s = Vec::with_capacity(half);
        for i in 0..half {
            let si = 0.5 * i as f64 / (half - 1) as f64;
            let ui = unit_cdf(si);
            if u.last().map_or(true, |last| ui > *last) {
                u.push(ui);
                s.push(si);
            }
        }
        // Fritsch–Carlson monotone tangents for s(u)
        let n = u.len();
        let secant: Vec<f64> = (0..n - 1)
            .map(|k| (s[k + 1] - s[k]) / (u[k + 1] - u[k]))
            .collect();
        let mut slope = vec![0.0; n];
        slope[0] = secant[0];
        slope[n - 1] = secant[n - 2];
        for k in 1..n - 1 {
            slope[k] = 0.5 * (secant[k - 1] + secant[k]);
        }
        for k in 0..n - 1 {
            let d = secant[k];
            let a = slope[k] / d;
            let b = slope[k + 1] / d;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                slope[k] = t * a * d;
                slope[k + 1] = t * b * d;
            }
        }
        Self { u, s, slope }
    }

    fn shared() -> Arc<Self> {
        static TABLE: OnceLock<Arc<UnitProfileTable>> = OnceLock::new();
        TABLE.get_or_init(|| Arc::new(Self::build())).clone()
    }

    /// Inverse of [`unit_cdf`] via monotone cubic Hermite interpolation.
    fn inverse(&self, u: f64) -> f64 {
        if u > 0.5 {
            return 1.0 - self.inverse(1.0 - u);
        }
        let n = self.u.len();
        let k = self.u.partition_point(|x| *x <= u).clamp(1, n - 1) - 1;
        let h = self.u[k + 1] - self.u[k];
        let t = ((u - self.u[k]) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * self.s[k] + h10 * h * self.slope[k] + h01 * self.s[k + 1] + h11 * h * self.slope[k + 1])
            .clamp(0.0, 0.5)
    }
}

/// A `C²` flux density on `T` supported on one or two arcs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "DensitySpec", try_from = "DensitySpec")]
pub struct FluxDensity {
    b: f64,
    arc_lo: f64,
    arc_hi: f64,
    mode: DensityMode,
    table: Arc<UnitProfileTable>,
}

impl PartialEq for FluxDensity {
    fn eq(&self, other: &Self) -> bool {
        self.b == other.b
            && self.arc_lo == other.arc_lo
            && self.arc_hi == other.arc_hi
            && self.mode == other.mode
    }
}

impl FluxDensity {
    /// `cos⁴` bump filling `T_b`: support `[b, π-b]` (and its mirror image in
    /// symmetric mode), so `±b` lie in the closure of the support.
    pub fn bump(b: f64, mode: DensityMode) -> Result<Self> {
        if !(b > 0.0 && b < FRAC_PI_2) {
            return Err(Error::InvalidDensity(format!("b must lie in (0, π/2), got {b}")));
        }
        Self::with_arc(b, b, PI - b, mode)
    }

    /// Bump on the explicit positive arc `[lo, hi]` while declaring the
    /// exclusion half-width `b`. The support may violate `T_b`; see
    /// [`validate_assumption`].
    pub fn with_arc(b: f64, lo: f64, hi: f64, mode: DensityMode) -> Result<Self> {
        if !(b >= 0.0 && b < FRAC_PI_2) {
            return Err(Error::InvalidDensity(format!("b must lie in [0, π/2), got {b}")));
        }
        if !(0.0 <= lo && lo < hi && hi <= PI) {
            return Err(Error::InvalidDensity(format!(
                "arc [{lo}, {hi}] must satisfy 0 ≤ lo < hi ≤ π"
            )));
        }
        Ok(Self {
            b,
            arc_lo: lo,
            arc_hi: hi,
            mode,
            table: UnitProfileTable::shared(),
        })
    }

    pub fn from_spec(spec: &DensitySpec) -> Result<Self> {
        if spec.profile != "cos4" {
            return Err(Error::InvalidDensity(format!(
                "unknown profile '{}' (only \"cos4\" is available)",
                spec.profile
            )));
        }
        match spec.arc {
            None => Self::bump(spec.b, spec.mode),
            Some([lo, hi]) => Self::with_arc(spec.b, lo, hi, spec.mode),
        }
    }

    pub fn spec(&self) -> DensitySpec {
        let arc = (self.arc_lo != self.b || self.arc_hi != PI - self.b)
            .then_some([self.arc_lo, self.arc_hi]);
        DensitySpec {
            b: self.b,
            profile: default_profile(),
            mode: self.mode,
            arc,
        }
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mode(&self) -> DensityMode {
        self.mode
    }

    /// Positive arc `[lo, hi]` of the support.
    pub fn arc(&self) -> (f64, f64) {
        (self.arc_lo, self.arc_hi)
    }

    fn arc_width(&self) -> f64 {
        self.arc_hi - self.arc_lo
    }

    fn arc_weight(&self, positive: bool) -> f64 {
        match (self.mode, positive) {
            (DensityMode::Symmetric, _) => 0.5,
            (DensityMode::SingleArc, true) => 1.0,
            (DensityMode::SingleArc, false) => 0.0,
        }
    }

    /// `(v, v', v'')` at `t ∈ T`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let t = wrap(t);
        let (x, positive) = if t >= 0.0 { (t, true) } else { (-t, false) };
        let (lo, hi) = (self.arc_lo, self.arc_hi);
        if x < lo || x > hi {
            return (0.0, 0.0, 0.0);
        }
        let w = self.arc_width();
        let k = self.arc_weight(positive) * 8.0 / (3.0 * w);
        let kp = PI / w;
        let theta = kp * (x - 0.5 * (lo + hi));
        let (s, c) = theta.sin_cos();
        let v = k * c.powi(4);
        let dv = -4.0 * k * kp * c.powi(3) * s;
        let d2v = k * kp * kp * (12.0 * c * c * s * s - 4.0 * c.powi(4));
        // mirrored arc: v(t) = v_+(-t), so odd derivatives flip sign
        if positive {
            (v, dv, d2v)
        } else {
            (v, -dv, d2v)
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Analytic CDF on `(-π, π]`, accumulated from `-π`.
    pub fn cdf(&self, t: f64) -> f64 {
        let t = wrap(t);
        let lo = self.arc_lo;
        let w = self.arc_width();
        let neg = self.arc_weight(false);
        let pos = self.arc_weight(true);
        if t < 0.0 {
            // negative arc is [-hi, -lo]; mass below t is the mass of the
            // mirrored positive arc above -t
            neg * (1.0 - unit_cdf((-t - lo) / w))
        } else {
            neg + pos * unit_cdf((t - lo) / w)
        }
    }

    /// Inverse CDF via the monotone table.
    pub fn quantile(&self, u: f64) -> f64 {
        let w = self.arc_width();
        let neg = self.arc_weight(false);
        if u < neg {
            // negative arc, traversed from -hi upwards
            let s = self.table.inverse(u / neg);
            -self.arc_hi + s * w
        } else {
            let pos = self.arc_weight(true);
            let s = self.table.inverse(((u - neg) / pos).min(1.0));
            self.arc_lo + s * w
        }
    }
}

impl From<FluxDensity> for DensitySpec {
    fn from(d: FluxDensity) -> Self {
        d.spec()
    }
}

impl TryFrom<DensitySpec> for FluxDensity {
    type Error = Error;
    fn try_from(spec: DensitySpec) -> Result<Self> {
        Self::from_spec(&spec)
    }
}

/// Source of plaquet fluxes for an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Disorder {
    /// i.i.d. fluxes from a density.
    Random { density: FluxDensity },
    /// Deterministic constant flux on every plaquet.
    Constant { flux: f64 },
}

impl Disorder {
    pub fn bump(b: f64) -> Result<Self> {
        Ok(Disorder::Random {
            density: FluxDensity::bump(b, DensityMode::Symmetric)?,
        })
    }

    pub fn sample(&self, region: &BoxRegion, master_seed: u64, sample_index: u64) -> DisorderSample {
        match self {
            Disorder::Random { density } => sample(density, region, master_seed, sample_index),
            Disorder::Constant { flux } => DisorderSample {
                flux_field: FluxField::constant(*region, *flux),
                seed: master_seed,
                sample_index,
            },
        }
    }

    /// Exclusion half-width of the flux distribution.
    pub fn b(&self) -> f64 {
        match self {
            Disorder::Random { density } => density.b(),
            Disorder::Constant { flux } => distance_from_zero_and_pi(*flux),
        }
    }
}

/// One realisation of the random magnetic field.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub flux_field: FluxField,
    pub seed: u64,
    pub sample_index: u64,
}

/// i.i.d. fluxes on `F_Λ`, deterministic in `(master_seed, sample_index)`.
pub fn sample(
    density: &FluxDensity,
    region: &BoxRegion,
    master_seed: u64,
    sample_index: u64,
) -> DisorderSample {
    sample_independent(region, master_seed, sample_index, |_| density)
}

/// Independent, not necessarily identically distributed fluxes: `density_of`
/// picks the density of each plaquet.
pub fn sample_independent<'a>(
    region: &BoxRegion,
    master_seed: u64,
    sample_index: u64,
    density_of: impl Fn(Plaquet) -> &'a FluxDensity,
) -> DisorderSample {
    let mut stream = CounterStream::new(master_seed, sample_index);
    let values = region
        .plaquets()
        .enumerate()
        .map(|(k, f)| density_of(f).quantile(stream.uniform_at(k as u64)))
        .collect();
    DisorderSample {
        flux_field: FluxField::new(*region, values).expect("one value per plaquet"),
        seed: master_seed,
        sample_index,
    }
}

/// Per-plaquet densities with a common default.
#[derive(Debug, Clone)]
pub struct PlaquetDensities {
    pub default: FluxDensity,
    pub overrides: HashMap<Plaquet, FluxDensity>,
}

impl PlaquetDensities {
    pub fn get(&self, f: Plaquet) -> &FluxDensity {
        self.overrides.get(&f).unwrap_or(&self.default)
    }

    pub fn sample(&self, region: &BoxRegion, master_seed: u64, sample_index: u64) -> DisorderSample {
        sample_independent(region, master_seed, sample_index, |f| self.get(f))
    }
}

/// Numerical check of the regularity/support assumption on a density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub b: f64,
    /// `sup|v| + sup|v'| + sup|v''|` on the grid.
    pub d_estimate: f64,
    pub sup_v: f64,
    pub sup_dv: f64,
    pub sup_d2v: f64,
    /// Support contained in `T_b`.
    pub support_ok: bool,
    /// `±b` belong to the closure of the support (required for
    /// localization at the band edge `E₀(b)`).
    pub b_in_support_closure: bool,
    pub grid_points: usize,
}

pub fn validate_assumption(density: &FluxDensity) -> AssumptionReport {
    validate_assumption_on_grid(density, 1 << 16)
}

pub fn validate_assumption_on_grid(density: &FluxDensity, grid_points: usize) -> AssumptionReport {
    let b = density.b();
    let (mut sup_v, mut sup_dv, mut sup_d2v) = (0.0f64, 0.0f64, 0.0f64);
    let mut grid_ok = true;
    for i in 0..grid_points {
        let t = -PI + (i as f64 + 0.5) * (2.0 * PI / grid_points as f64);
        let (v, dv, d2v) = density.eval(t);
        sup_v = sup_v.max(v.abs());
        sup_dv = sup_dv.max(dv.abs());
        sup_d2v = sup_d2v.max(d2v.abs());
        if v != 0.0 && distance_from_zero_and_pi(t) < b {
            grid_ok = false;
        }
    }
    let (lo, hi) = density.arc();
    let arcs_ok = lo >= b && hi <= PI - b;
    let tol = 1e-12;
    let b_in_support_closure = match density.mode() {
        DensityMode::Symmetric => (lo - b).abs() <= tol,
        DensityMode::SingleArc => false,
    };
    AssumptionReport {
        b,
        d_estimate: sup_v + sup_dv + sup_d2v,
        sup_v,
        sup_dv,
        sup_d2v,
        support_ok: grid_ok && arcs_ok,
        b_in_support_closure,
        grid_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::in_tb;
    use std::f64::consts::FRAC_PI_4;

    /// Adaptive Simpson quadrature, independent of the closed-form CDF.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn quad_cdf(d: &FluxDensity, t: f64) -> f64 {
        // split at arc endpoints so the integrand is smooth on each piece
        let (lo, hi) = d.arc();
        let mut knots = vec![-PI, -hi, -lo, lo, hi, t];
        knots.retain(|k| *k <= t);
        knots.sort_by(f64::total_cmp);
        knots
            .windows(2)
            .map(|w| adaptive_simpson(&|x| d.value(x), w[0], w[1], 1e-13))
            .sum()
    }

    #[test]
    fn bump_normalised_and_supported() {
        let d = FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap();
        assert!((quad_cdf(&d, PI) - 1.0).abs() < 1e-10);
        assert_eq!(d.value(0.0), 0.0);
        assert_eq!(d.value(PI), 0.0);
        assert_eq!(d.value(FRAC_PI_4 - 1e-9), 0.0);
        assert_eq!(d.value(3.0 * FRAC_PI_4 + 1e-9), 0.0);
        assert!(d.value(FRAC_PI_2) > 0.0);
        assert!(d.value(-FRAC_PI_2) > 0.0);
        // equal arc masses
        assert!((quad_cdf(&d, 0.0) - 0.5).abs() < 1e-10);
        let single = FluxDensity::bump(0.3, DensityMode::SingleArc).unwrap();
        assert!((quad_cdf(&single, PI) - 1.0).abs() < 1e-10);
        assert_eq!(single.value(-FRAC_PI_2), 0.0);
    }

    #[test]
    fn bump_rejects_bad_b() {
        for b in [0.0, -0.1, FRAC_PI_2, 2.0, f64::NAN] {
            assert!(FluxDensity::bump(b, DensityMode::Symmetric).is_err());
        }
        let spec = DensitySpec {
            b: 0.5,
            profile: "gauss".into(),
            mode: DensityMode::Symmetric,
            arc: None,
        };
        assert!(FluxDensity::from_spec(&spec).is_err());
    }

    #[test]
    fn analytic_cdf_matches_quadrature() {
        for d in [
            FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap(),
            FluxDensity::bump(1.2, DensityMode::SingleArc).unwrap(),
        ] {
            // -π is identified with π, where the CDF is 1
            for i in 1..=40 {
                let t = -PI + 2.0 * PI * i as f64 / 40.0;
                assert!((d.cdf(t) - quad_cdf(&d, t)).abs() < 1e-9, "t={t}");
            }
        }
    }

    #[test]
    fn second_derivative_is_continuous() {
        let d = FluxDensity::bump(0.6, DensityMode::Symmetric).unwrap();
        let (lo, hi) = d.arc();
        let fd2 = |t: f64, h: f64| (d.value(t + h) - 2.0 * d.value(t) + d.value(t - h)) / (h * h);
        // interior points: O(h²) agreement with the analytic value
        for t in [1.0, 1.3, -2.0, lo + 0.05, hi - 0.05] {
            let exact = d.eval(t).2;
            let e1 = (fd2(t, 1e-2) - exact).abs();
            let e2 = (fd2(t, 5e-3) - exact).abs();
            assert!(e2 < 1e-3 * exact.abs().max(1.0));
            assert!(e2 <= e1 / 3.0 || e2 < 1e-9, "t={t}: {e1} {e2}");
        }
        // across the arc endpoints v'' tends to zero from both sides
        for t in [lo, hi, -lo, -hi] {
            for h in [1e-2, 1e-3] {
                assert!(fd2(t, h).abs() < 50.0 * h * h * d.eval(FRAC_PI_2).0 * 1e3);
            }
            assert!(d.eval(t).2.abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap();
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            let t = d.quantile(u);
            assert!((d.cdf(t) - u).abs() < 1e-6, "u={u} t={t}");
        }
        assert!(in_tb(d.quantile(0.0), FRAC_PI_4));
        assert!(in_tb(d.quantile(1.0 - 1e-16), FRAC_PI_4));
    }

    #[test]
    fn sampling_is_deterministic_and_order_independent() {
        let d = FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap();
        let region = BoxRegion::centered(3).unwrap();
        let a = sample(&d, &region, 42, 5);
        let b = sample(&d, &region, 42, 5);
        assert_eq!(a, b);
        assert_ne!(a.flux_field, sample(&d, &region, 42, 6).flux_field);
        // evaluate plaquets in reverse order with the same counters
        let mut stream = CounterStream::new(42, 5);
        let mut rev = vec![0.0; region.num_plaquets()];
        for k in (0..region.num_plaquets()).rev() {
            rev[k] = d.quantile(stream.uniform_at(k as u64));
        }
        assert_eq!(a.flux_field.values(), FluxField::new(region, rev).unwrap().values());
    }

    fn draws(d: &FluxDensity, n: usize) -> Vec<f64> {
        let mut s = CounterStream::new(2024, 0);
        (0..n).map(|k| d.quantile(s.uniform_at(k as u64))).collect()
    }

    #[test]
    fn draws_stay_in_tb() {
        let b = FRAC_PI_4;
        let d = FluxDensity::bump(b, DensityMode::Symmetric).unwrap();
        assert!(draws(&d, 100_000).iter().all(|w| in_tb(*w, b)));
    }

    #[test]
    fn kolmogorov_smirnov_distance() {
        let d = FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap();
        let mut x = draws(&d, 100_000);
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        let ks = x
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let f = quad_cdf(&d, *t);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn moments_match_quadrature() {
        let d = FluxDensity::bump(0.5, DensityMode::SingleArc).unwrap();
        let (lo, hi) = d.arc();
        let mean = adaptive_simpson(&|t| t * d.value(t), lo, hi, 1e-13);
        let second = adaptive_simpson(&|t| t * t * d.value(t), lo, hi, 1e-13);
        let var = second - mean * mean;
        let x = draws(&d, 100_000);
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((m - mean).abs() < 3.0 * (var / n).sqrt(), "{m} vs {mean}");
        // standard error of the sample variance, from the fourth moment
        let m4 = adaptive_simpson(&|t| (t - mean).powi(4) * d.value(t), lo, hi, 1e-13);
        assert!((v - var).abs() < 3.0 * ((m4 - var * var) / n).sqrt(), "{v} vs {var}");
    }

    #[test]
    fn assumption_report() {
        let d = FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap();
        let r = validate_assumption(&d);
        assert!(r.support_ok);
        assert!(r.b_in_support_closure);
        assert!(r.d_estimate.is_finite() && r.d_estimate > 0.0);
        let fine = validate_assumption_on_grid(&d, 1 << 17);
        assert!(((fine.d_estimate - r.d_estimate) / fine.d_estimate).abs() < 0.01);

        let leaky = FluxDensity::with_arc(FRAC_PI_4, 0.1, 1.5, DensityMode::Symmetric).unwrap();
        assert!(!validate_assumption(&leaky).support_ok);
    }

    #[test]
    fn overrides_change_only_their_plaquet() {
        let region = BoxRegion::centered(2).unwrap();
        let base = FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap();
        let special = FluxDensity::bump(1.2, DensityMode::SingleArc).unwrap();
        let f = region.plaquet(3);
        let densities = PlaquetDensities {
            default: base.clone(),
            overrides: HashMap::from([(f, special)]),
        };
        let a = densities.sample(&region, 1, 1);
        let b = sample(&base, &region, 1, 1);
        for (k, (x, y)) in a.flux_field.values().iter().zip(b.flux_field.values()).enumerate() {
            if k == 3 {
                assert!(*x >= 1.2 && *x <= PI - 1.2);
            } else {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn density_spec_json() {
        let d: FluxDensity =
            serde_json::from_str(r#"{"b": 0.7853981633974483, "profile": "cos4", "mode": "symmetric"}"#).unwrap();
        assert_eq!(d, FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap());
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["profile"], "cos4");
        assert!(v.get("arc").is_none());
        let dis: Disorder = serde_json::from_str(r#"{"kind":"constant","flux":0.0}"#).unwrap();
        assert_eq!(dis, Disorder::Constant { flux: 0.0 });
    }
}
