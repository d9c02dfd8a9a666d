//! Torus-valued vector potentials on the arrows of a box, their curl (the
//! plaquet fluxes), gauge transformations and the four single-plaquet gauges
//! `α_f^(τ)` used to build `A_ω = Σ_f ω_f α_f`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Arrow, BoxRegion, Direction, Edge, Plaquet, Site};

pub const TWO_PI: f64 = 2.0 * PI;

/// Canonical representative of `x` modulo `2π` in `(-π, π]`.
pub fn wrap(x: f64) -> f64 {
    let r = x - TWO_PI * ((x - PI) / TWO_PI).ceil();
    // guard the half-open end against rounding in the subtraction
    if r <= -PI {
        r + TWO_PI
    } else if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// `min_k |x - y - 2πk|`.
pub fn torus_distance(x: f64, y: f64) -> f64 {
    wrap(x - y).abs()
}

/// Membership in the closed set `T_b = T \ ((-b, b) ∪ (π - b, π + b))`.
pub fn in_tb(theta: f64, b: f64) -> bool {
    let t = wrap(theta).abs();
    t >= b && PI - t >= b
}

/// Distance of `theta` from the excluded points `{0, π}`.
pub fn distance_from_zero_and_pi(theta: f64) -> f64 {
    let t = wrap(theta).abs();
    t.min(PI - t)
}

/// An element of `T = R/2πZ`, stored as its representative in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct TorusAngle(f64);

impl TorusAngle {
    pub const ZERO: TorusAngle = TorusAngle(0.0);

    pub fn new(x: f64) -> Self {
        Self(wrap(x))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn distance(self, other: TorusAngle) -> f64 {
        torus_distance(self.0, other.0)
    }

    pub fn in_tb(self, b: f64) -> bool {
        in_tb(self.0, b)
    }
}

impl From<f64> for TorusAngle {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl From<TorusAngle> for f64 {
    fn from(t: TorusAngle) -> f64 {
        t.0
    }
}

impl Add for TorusAngle {
    type Output = TorusAngle;
    fn add(self, rhs: TorusAngle) -> TorusAngle {
        TorusAngle::new(self.0 + rhs.0)
    }
}

impl Sub for TorusAngle {
    type Output = TorusAngle;
    fn sub(self, rhs: TorusAngle) -> TorusAngle {
        TorusAngle::new(self.0 - rhs.0)
    }
}

impl Neg for TorusAngle {
    type Output = TorusAngle;
    fn neg(self) -> TorusAngle {
        TorusAngle::new(-self.0)
    }
}

impl Mul<f64> for TorusAngle {
    type Output = TorusAngle;
    fn mul(self, rhs: f64) -> TorusAngle {
        TorusAngle::new(self.0 * rhs)
    }
}

/// The four single-plaquet gauges. For `f = f_x`:
///
/// * `Above` (τ=1): `-1` on horizontal arrows `(y, y+e1)` with `y1 = x1`, `y2 > x2`;
/// * `Right` (τ=2): `+1` on vertical arrows `(y, y+e2)` with `y2 = x2`, `y1 > x1`;
/// * `Below` (τ=3): `+1` on horizontal arrows with `y1 = x1`, `y2 ≤ x2`;
/// * `Left`  (τ=4): `-1` on vertical arrows with `y2 = x2`, `y1 ≤ x1`;
///
/// zero elsewhere, extended to reversed arrows by antisymmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Gauge {
    Above,
    #[default]
    Right,
    Below,
    Left,
}

impl Gauge {
    pub const ALL: [Gauge; 4] = [Gauge::Above, Gauge::Right, Gauge::Below, Gauge::Left];

    pub fn tau(self) -> u8 {
        match self {
            Gauge::Above => 1,
            Gauge::Right => 2,
            Gauge::Below => 3,
            Gauge::Left => 4,
        }
    }

    pub fn from_tau(tau: u8) -> Option<Gauge> {
        Gauge::ALL.into_iter().find(|g| g.tau() == tau)
    }

    /// Coefficient of `α_f` on the forward arrow of `e`.
    fn coefficient(self, f: Plaquet, e: Edge) -> f64 {
        let (x, y) = (f.corner, e.base);
        match (self, e.dir) {
            (Gauge::Above, Direction::E1) if y.x1 == x.x1 && y.x2 > x.x2 => -1.0,
            (Gauge::Right, Direction::E2) if y.x2 == x.x2 && y.x1 > x.x1 => 1.0,
            (Gauge::Below, Direction::E1) if y.x1 == x.x1 && y.x2 <= x.x2 => 1.0,
            (Gauge::Left, Direction::E2) if y.x2 == x.x2 && y.x1 <= x.x1 => -1.0,
            _ => 0.0,
        }
    }
}

impl TryFrom<u8> for Gauge {
    type Error = String;
    fn try_from(tau: u8) -> std::result::Result<Self, String> {
        Gauge::from_tau(tau).ok_or_else(|| format!("gauge selector must be 1..=4, got {tau}"))
    }
}

impl From<Gauge> for u8 {
    fn from(g: Gauge) -> u8 {
        g.tau()
    }
}

fn check_box(expected: &BoxRegion, found: &BoxRegion) -> Result<()> {
    if expected != found {
        return Err(Error::BoxMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Real coefficient field on arrows, antisymmetric, stored sparsely as
/// `(edge index, value on the forward arrow)`. Houses `α_f^(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeCoefficients {
    region: BoxRegion,
    entries: Vec<(usize, f64)>,
}

impl GaugeCoefficients {
    pub fn zero(region: BoxRegion) -> Self {
        Self {
            region,
            entries: Vec::new(),
        }
    }

    /// `α_f^(τ)` restricted to the arrows of `region`.
    pub fn canonical(f: Plaquet, gauge: Gauge, region: &BoxRegion) -> Result<Self> {
        if !region.contains_plaquet(f) {
            return Err(Error::PlaquetOutsideBox(f));
        }
        let (lo, hi) = (region.lo(), region.hi());
        let x = f.corner;
        let edges: Vec<Edge> = match gauge {
            Gauge::Above => ((x.x2 + 1)..=hi.x2)
                .map(|y2| Edge::new(Site::new(x.x1, y2), Direction::E1))
                .collect(),
            Gauge::Below => (lo.x2..=x.x2)
                .map(|y2| Edge::new(Site::new(x.x1, y2), Direction::E1))
                .collect(),
            Gauge::Right => ((x.x1 + 1)..=hi.x1)
                .map(|y1| Edge::new(Site::new(y1, x.x2), Direction::E2))
                .collect(),
            Gauge::Left => (lo.x1..=x.x1)
                .map(|y1| Edge::new(Site::new(y1, x.x2), Direction::E2))
                .collect(),
        };
        let entries = edges
            .into_iter()
            .filter_map(|e| {
                let i = region.edge_index(e)?;
                Some((i, gauge.coefficient(f, e)))
            })
            .collect();
        Ok(Self {
            region: *region,
            entries,
        })
    }

    /// Build from an arbitrary function of canonical edges; zeros are dropped.
    pub fn from_fn(region: BoxRegion, mut coeff: impl FnMut(Edge) -> f64) -> Self {
        let entries = region
            .edges()
            .enumerate()
            .filter_map(|(i, e)| {
                let c = coeff(e);
                (c != 0.0).then_some((i, c))
            })
            .collect();
        Self { region, entries }
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    /// `(edge index, coefficient on the forward arrow)` pairs.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, a: Arrow) -> f64 {
        let (e, fwd) = a.edge();
        let Some(i) = self.region.edge_index(e) else {
            return 0.0;
        };
        let c = self
            .entries
            .iter()
            .find(|(j, _)| *j == i)
            .map_or(0.0, |(_, c)| *c);
        if fwd {
            c
        } else {
            -c
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, (_, c)| m.max(c.abs()))
    }

    /// Real-valued curl `Σ_{a∈∂f} α(a)` (no wrapping).
    pub fn curl(&self, f: Plaquet) -> f64 {
        f.boundary().iter().map(|a| self.get(*a)).sum()
    }
}

/// Antisymmetric torus-valued function on the arrows of a box.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPotential {
    region: BoxRegion,
    values: Vec<f64>,
}

impl VectorPotential {
    pub fn zero(region: BoxRegion) -> Self {
        Self {
            values: vec![0.0; region.num_edges()],
            region,
        }
    }

    /// Values on forward arrows of canonical edges; reversed arrows follow by
    /// antisymmetry.
    pub fn from_fn(region: BoxRegion, mut value: impl FnMut(Edge) -> f64) -> Self {
        let values = region.edges().map(|e| wrap(value(e))).collect();
        Self { region, values }
    }

    /// `A_ω = Σ_{f∈F_Λ} ω_f α_f^(τ)`; the sum of products is wrapped once.
    pub fn from_flux(omega: &FluxField, gauge: Gauge) -> Self {
        let region = *omega.region();
        let mut acc = vec![0.0; region.num_edges()];
        for (k, f) in region.plaquets().enumerate() {
            let w = omega.values[k];
            if w == 0.0 {
                continue;
            }
            let alpha = GaugeCoefficients::canonical(f, gauge, &region)
                .expect("plaquets of the box lie in the box");
            for &(i, c) in alpha.entries() {
                acc[i] += w * c;
            }
        }
        Self {
            region,
            values: acc.into_iter().map(wrap).collect(),
        }
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    /// Values on the forward arrows, indexed like [`BoxRegion::edge`].
    pub fn edge_values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, a: Arrow) -> Option<TorusAngle> {
        let (e, fwd) = a.edge();
        let i = self.region.edge_index(e)?;
        let v = self.values[i];
        Some(TorusAngle::new(if fwd { v } else { -v }))
    }

    /// `dA(f) = Σ_{a∈∂f} A(a)`.
    pub fn curl(&self, f: Plaquet) -> Result<TorusAngle> {
        if !self.region.contains_plaquet(f) {
            return Err(Error::PlaquetOutsideBox(f));
        }
        let s: f64 = f
            .boundary()
            .iter()
            .map(|a| self.get(*a).expect("boundary of an in-box plaquet").value())
            .sum();
        Ok(TorusAngle::new(s))
    }

    /// The magnetic field `dA` on all of `F_Λ`.
    pub fn flux_field(&self) -> FluxField {
        let values = self
            .region
            .plaquets()
            .map(|f| self.curl(f).expect("in-box plaquet").value())
            .collect();
        FluxField {
            region: self.region,
            values,
        }
    }

    /// `A + dλ` with `dλ(a) = λ(a_i) - λ(a_t)`.
    pub fn gauge_transform(&self, lambda: &GaugeFunction) -> Result<VectorPotential> {
        check_box(&self.region, &lambda.region)?;
        let values = self
            .region
            .edges()
            .zip(&self.values)
            .map(|(e, v)| {
                let li = lambda.values[self.region.index(e.base).unwrap()];
                let lt = lambda.values[self.region.index(e.tip()).unwrap()];
                wrap(v + li - lt)
            })
            .collect();
        Ok(Self {
            region: self.region,
            values,
        })
    }

    /// `A + s·α`, used for flux perturbations `ω_f → ω_f + s`.
    pub fn perturbed(&self, alpha: &GaugeCoefficients, s: f64) -> Result<VectorPotential> {
        check_box(&self.region, alpha.region())?;
        let mut out = self.clone();
        for &(i, c) in alpha.entries() {
            out.values[i] = wrap(out.values[i] + s * c);
        }
        Ok(out)
    }

    /// Pointwise torus sum, defined on the same box.
    pub fn sum(&self, other: &VectorPotential) -> Result<VectorPotential> {
        check_box(&self.region, &other.region)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| wrap(a + b))
            .collect();
        Ok(Self {
            region: self.region,
            values,
        })
    }
}

/// Torus-valued function on `F_Λ`: the plaquet fluxes `ω_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FluxFieldRepr", try_from = "FluxFieldRepr")]
pub struct FluxField {
    region: BoxRegion,
    values: Vec<f64>,
}

impl FluxField {
    /// Fluxes listed in plaquet order (row-major by corner); each is wrapped.
    pub fn new(region: BoxRegion, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.num_plaquets() {
            return Err(Error::InvalidConfig(format!(
                "flux field on {region} needs {} values, got {}",
                region.num_plaquets(),
                values.len()
            )));
        }
        Ok(Self {
            region,
            values: values.into_iter().map(wrap).collect(),
        })
    }

    pub fn constant(region: BoxRegion, theta: f64) -> Self {
        Self {
            values: vec![wrap(theta); region.num_plaquets()],
            region,
        }
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, f: Plaquet) -> Option<TorusAngle> {
        self.region
            .plaquet_index(f)
            .map(|i| TorusAngle(self.values[i]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Plaquet, TorusAngle)> + '_ {
        self.region
            .plaquets()
            .zip(self.values.iter().map(|v| TorusAngle(*v)))
    }

    /// Largest torus distance between two flux fields on the same box.
    pub fn max_distance(&self, other: &FluxField) -> Result<f64> {
        check_box(&self.region, &other.region)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max(torus_distance(*a, *b))))
    }

    /// Whether every flux lies in the closed set `T_b`.
    pub fn all_in_tb(&self, b: f64) -> bool {
        self.values.iter().all(|w| in_tb(*w, b))
    }
}

#[derive(Serialize, Deserialize)]
struct PlaquetFlux {
    corner: [i32; 2],
    flux: f64,
}

#[derive(Serialize, Deserialize)]
struct FluxFieldRepr {
    #[serde(rename = "box")]
    region: BoxRegion,
    plaquets: Vec<PlaquetFlux>,
}

impl From<FluxField> for FluxFieldRepr {
    fn from(field: FluxField) -> Self {
        let plaquets = field
            .iter()
            .map(|(f, w)| PlaquetFlux {
                corner: [f.corner.x1, f.corner.x2],
                flux: w.value(),
            })
            .collect();
        Self {
            region: field.region,
            plaquets,
        }
    }
}

impl TryFrom<FluxFieldRepr> for FluxField {
    type Error = Error;

    fn try_from(repr: FluxFieldRepr) -> Result<Self> {
        let region = repr.region;
        let mut values = vec![None; region.num_plaquets()];
        for p in repr.plaquets {
            let f = Plaquet::new(Site::new(p.corner[0], p.corner[1]));
            let i = region
                .plaquet_index(f)
                .ok_or(Error::PlaquetOutsideBox(f))?;
            if values[i].replace(wrap(p.flux)).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "plaquet {} listed twice",
                    f.corner
                )));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "flux missing for plaquet {}",
                        region.plaquet(i).corner
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { region, values })
    }
}

/// Torus-valued function on the sites of a box (`λ` in `A ↦ A + dλ`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunction {
    region: BoxRegion,
    values: Vec<f64>,
}

impl GaugeFunction {
    pub fn from_fn(region: BoxRegion, mut value: impl FnMut(Site) -> f64) -> Self {
        let values = region.sites().map(|x| wrap(value(x))).collect();
        Self { region, values }
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    /// Values in site order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
