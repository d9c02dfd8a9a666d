//! Lower bounds on eigenfunction currents below `E_crit`.
//!
//! Starting at a site `x₀` where `|ψ|` is maximal, the eigenvalue equation
//! forces large moduli on nearby sites. That yields a unit square `Q` on
//! which `|ψ| ≥ cM`. If the flux through `Q` stays away from `0` and `π`,
//! one of the four phase differences on `∂Q` does too, and the current on
//! that arrow is bounded below.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::current::{current_field, derivative_norm_squared};
use crate::error::{Error, Result};
use crate::gauge::{distance_from_zero_and_pi, in_tb, wrap, Gauge, VectorPotential};
use crate::lattice::{Arrow, BoxRegion, Plaquet, Site};
use crate::operator::{HamiltonianMatrix, E_CRIT};
use crate::randomfield::{sample, FluxDensity};
use crate::rng::mix_seed;

/// The threshold separating the two cases of the square search.
pub const DEFAULT_EPSILON: f64 = 0.1;

fn modulus(region: &BoxRegion, psi: &[Complex64], x: Site) -> f64 {
    region.index(x).map_or(0.0, |i| psi[i].norm())
}

/// The site of maximal modulus and its neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxSiteReport {
    pub x0: Site,
    pub max_modulus: f64,
    /// In-box neighbours of `x₀` with their moduli.
    pub neighbor_moduli: Vec<(Site, f64)>,
    /// `1/√N`, the exact floor on `M` for a normalised vector.
    pub normalization_floor: f64,
    /// The coarser `1/L` floor, recorded alongside.
    pub inverse_half_width: Option<f64>,
}

impl MaxSiteReport {
    pub fn new(region: &BoxRegion, psi: &[Complex64]) -> Self {
        let (mut best, mut m) = (0, -1.0);
        for (i, z) in psi.iter().enumerate() {
            if z.norm() > m {
                m = z.norm();
                best = i;
            }
        }
        let x0 = region.site(best);
        let neighbor_moduli = region
            .neighbors(x0)
            .map(|y| (y, modulus(region, psi, y)))
            .collect();
        Self {
            x0,
            max_modulus: m,
            neighbor_moduli,
            normalization_floor: 1.0 / (region.num_sites() as f64).sqrt(),
            inverse_half_width: region.half_width().map(|l| 1.0 / l as f64),
        }
    }
}

/// Margins of the three neighbour inequalities at `x₀` (nonnegative when
/// they hold), evaluated with the sharpest admissible `ε` and `κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborBoundsReport {
    pub energy: f64,
    pub max_site: MaxSiteReport,
    /// `max_y |ψ(y)| − (1 − E/4) M`.
    pub margin_a: f64,
    /// `min_{y ≠ ỹ₀} |ψ(y)| − (2 − E − ε) M` with `ε = |ψ(ỹ₀)|/M` and `ỹ₀` the
    /// weakest neighbour; `None` when `x₀` has a single neighbour.
    pub margin_b: Option<f64>,
    /// Minimum over neighbours `y₀` of
    /// `|ψ(y₀+t)| + |ψ(y₀−t)| − ((4−E)κ − 2) M` with `κ = |ψ(y₀)|/M`.
    pub margin_c: f64,
    /// `‖Hψ − Eψ‖`; large values flag a vector that is not an eigenvector.
    pub eigen_residual: f64,
}

impl NeighborBoundsReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.margin_a >= -tol && self.margin_b.map_or(true, |m| m >= -tol) && self.margin_c >= -tol
    }
}

pub fn neighbor_bounds(
    psi: &[Complex64],
    potential: &VectorPotential,
    energy: f64,
) -> Result<NeighborBoundsReport> {
    if !(0.0..=4.0).contains(&energy) {
        return Err(Error::Precondition(format!(
            "neighbour bounds need 0 ≤ E ≤ 4, got {energy}"
        )));
    }
    let region = potential.region();
    let h = HamiltonianMatrix::assemble(region, potential)?;
    if psi.len() != region.num_sites() {
        return Err(Error::Precondition("vector length does not match the box".into()));
    }
    let eigen_residual = h
        .apply(psi)
        .iter()
        .zip(psi)
        .map(|(hp, p)| (hp - energy * p).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let report = MaxSiteReport::new(region, psi);
    let m = report.max_modulus;
    let x0 = report.x0;
    let moduli: Vec<f64> = report.neighbor_moduli.iter().map(|(_, v)| *v).collect();
    let strongest = moduli.iter().cloned().fold(0.0, f64::max);
    let margin_a = strongest - (1.0 - energy / 4.0) * m;

    let margin_b = if moduli.len() >= 2 {
        let (weakest, eps_m) = moduli
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, *v))
            .unwrap();
        let others = moduli
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != weakest)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        Some(others - (2.0 - energy) * m + eps_m)
    } else {
        None
    };

    let margin_c = report
        .neighbor_moduli
        .iter()
        .map(|&(y0, v)| {
            let t = orthogonal_unit(y0 - x0);
            let side = modulus(region, psi, y0 + t) + modulus(region, psi, y0 - t);
            side - ((4.0 - energy) * v - 2.0 * m)
        })
        .fold(f64::INFINITY, f64::min);

    Ok(NeighborBoundsReport {
        energy,
        max_site: report,
        margin_a,
        margin_b,
        margin_c,
        eigen_residual,
    })
}

fn orthogonal_unit(step: Site) -> Site {
    Site::new(step.x2.abs(), step.x1.abs())
}

/// Which branch of the square search produced `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SquareCase {
    /// All neighbours of `x₀` exceed `εM`.
    Large,
    /// Some neighbour of `x₀` is at most `εM`.
    Small,
}

impl SquareCase {
    pub fn number(self) -> u8 {
        match self {
            SquareCase::Large => 1,
            SquareCase::Small => 2,
        }
    }
}

/// Guaranteed fraction `c` of `M` on the square, as a function of `E*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareConstants {
    pub epsilon: f64,
    /// Large-neighbour case: `min(ε, ½((4−E*)(1−E*/4) − 2))`.
    pub case_large: f64,
    /// Small-neighbour case floor for the opposite neighbour: `2 − E* − ε`.
    pub kappa_small: f64,
    /// Small-neighbour case: `min(κ, ½((4−E*)κ − 2))`.
    pub case_small: f64,
}

impl SquareConstants {
    pub fn new(e_star: f64, epsilon: f64) -> Self {
        let corner = 0.5 * ((4.0 - e_star) * (1.0 - e_star / 4.0) - 2.0);
        let kappa_small = 2.0 - e_star - epsilon;
        let far = 0.5 * ((4.0 - e_star) * kappa_small - 2.0);
        Self {
            epsilon,
            case_large: epsilon.min(corner).min(1.0 - e_star / 4.0),
            kappa_small,
            case_small: kappa_small.min(far),
        }
    }

    pub fn for_case(&self, case: SquareCase) -> f64 {
        match case {
            SquareCase::Large => self.case_large,
            SquareCase::Small => self.case_small,
        }
    }
}

/// A unit square with `min_{x∈Q} |ψ(x)| ≥ cM`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareCertificate {
    pub square: Plaquet,
    pub case: SquareCase,
    pub x0: Site,
    pub max_modulus: f64,
    /// The guaranteed `c` for this case at `E*`.
    pub lower_bound_c: f64,
    pub min_modulus_on_square: f64,
    /// True when the square came from the constructive argument; false when
    /// the opposite neighbour left the box and an in-box square was chosen
    /// by search instead.
    pub constructive: bool,
}

impl SquareCertificate {
    /// `min_{x∈Q}|ψ(x)| ≥ cM` (with a relative rounding slack).
    pub fn validates(&self) -> bool {
        self.constructive
            && self.min_modulus_on_square >= self.lower_bound_c * self.max_modulus * (1.0 - 1e-12)
    }
}

fn square_with(a: Site, b: Site, c: Site, d: Site) -> Plaquet {
    let x1 = a.x1.min(b.x1).min(c.x1).min(d.x1);
    let x2 = a.x2.min(b.x2).min(c.x2).min(d.x2);
    Plaquet::new(Site::new(x1, x2))
}

fn min_on(region: &BoxRegion, psi: &[Complex64], f: Plaquet) -> f64 {
    f.sites()
        .iter()
        .map(|x| modulus(region, psi, *x))
        .fold(f64::INFINITY, f64::min)
}

/// Picks `σ ∈ {−1, +1}` maximising `|ψ(y₀ + σt)|`; ties go to the smaller
/// site index.
fn pick_side(region: &BoxRegion, psi: &[Complex64], y0: Site, t: Site) -> Site {
    let candidates = [y0 - t, y0 + t];
    let key = |x: &Site| (modulus(region, psi, *x), region.index(*x));
    let [a, b] = candidates;
    let (ma, ia) = key(&a);
    let (mb, ib) = key(&b);
    if mb > ma || (mb == ma && ib.unwrap_or(usize::MAX) < ia.unwrap_or(usize::MAX)) {
        t
    } else {
        -t
    }
}

/// The square search at threshold `ε`, certified for energies `≤ E*`.
pub fn find_square_with_epsilon(
    region: &BoxRegion,
    psi: &[Complex64],
    energy: f64,
    e_star: f64,
    epsilon: f64,
) -> Result<SquareCertificate> {
    if energy > e_star {
        return Err(Error::Precondition(format!(
            "eigenvalue {energy} exceeds the threshold {e_star}"
        )));
    }
    if !(e_star < E_CRIT) {
        return Err(Error::Precondition(format!(
            "threshold {e_star} must lie below {E_CRIT}"
        )));
    }
    search_square(region, psi, e_star, epsilon)
}

/// The square search without the `E ≤ E* < E_crit` preconditions. Above
/// `E_crit` the constants go negative and the result certifies nothing; it
/// is meant for exploratory sweeps only.
pub fn find_square_exploratory(
    region: &BoxRegion,
    psi: &[Complex64],
    e_star: f64,
    epsilon: f64,
) -> Result<SquareCertificate> {
    search_square(region, psi, e_star, epsilon)
}

fn search_square(
    region: &BoxRegion,
    psi: &[Complex64],
    e_star: f64,
    epsilon: f64,
) -> Result<SquareCertificate> {
    let report = MaxSiteReport::new(region, psi);
    let (x0, m) = (report.x0, report.max_modulus);
    let constants = SquareConstants::new(e_star, epsilon);
    let by_index = |a: &(Site, f64), b: &(Site, f64)| region.index(a.0).cmp(&region.index(b.0));
    let weakest = report
        .neighbor_moduli
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(by_index(a, b)))
        .copied()
        .ok_or_else(|| Error::Precondition("box has a single site".into()))?;

    let (case, y0) = if weakest.1 > epsilon * m {
        let strongest = report
            .neighbor_moduli
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(by_index(b, a)))
            .copied()
            .expect("at least one neighbour");
        (SquareCase::Large, strongest.0)
    } else {
        (SquareCase::Small, x0 + x0 - weakest.0)
    };

    if region.contains(y0) {
        let t = orthogonal_unit(y0 - x0);
        let side = pick_side(region, psi, y0, t);
        let square = square_with(x0, x0 + side, y0, y0 + side);
        if !region.contains_plaquet(square) {
            return Err(Error::Certificate(format!(
                "constructed square at {} leaves the box",
                square.corner
            )));
        }
        return Ok(SquareCertificate {
            square,
            case,
            x0,
            max_modulus: m,
            lower_bound_c: constants.for_case(case),
            min_modulus_on_square: min_on(region, psi, square),
            constructive: true,
        });
    }

    // opposite neighbour outside the box: best in-box square at x₀
    let square = region
        .plaquets()
        .filter(|f| f.sites().contains(&x0))
        .max_by(|a, b| {
            min_on(region, psi, *a)
                .total_cmp(&min_on(region, psi, *b))
                .then(region.plaquet_index(*b).cmp(&region.plaquet_index(*a)))
        })
        .ok_or_else(|| Error::Certificate(format!("no square of the box contains {x0}")))?;
    Ok(SquareCertificate {
        square,
        case,
        x0,
        max_modulus: m,
        lower_bound_c: constants.for_case(case),
        min_modulus_on_square: min_on(region, psi, square),
        constructive: false,
    })
}

pub fn find_square(
    region: &BoxRegion,
    psi: &[Complex64],
    energy: f64,
    e_star: f64,
) -> Result<SquareCertificate> {
    find_square_with_epsilon(region, psi, energy, e_star, DEFAULT_EPSILON)
}

/// The chain `Σ_a |J|² ≥ Σ_{∂Q} |J|² ≥ 4 (cM)⁴ sin²(b/8)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentBound {
    pub energy: f64,
    pub square: SquareCertificate,
    /// `φ_a = A(a) + arg ψ(a_t) − arg ψ(a_i)` on the four arrows of `∂Q`.
    pub phases: [f64; 4],
    /// Wrapped `Σ_{∂Q} φ_a`.
    pub phase_sum: f64,
    pub flux_on_square: f64,
    pub pigeonhole_arrow: Arrow,
    pub sum_current_sq: f64,
    pub sum_current_sq_on_square: f64,
    /// `4 (cM)⁴ sin²(b/8)` with the actual `M`.
    pub bound: f64,
    /// `4 c⁴ (2L+1)⁻⁴ sin²(b/8)`, uniform over normalised eigenvectors.
    pub uniform_bound: f64,
}

impl CurrentBound {
    pub fn holds(&self) -> bool {
        self.square.validates()
            && self.sum_current_sq_on_square >= self.bound * (1.0 - 1e-12)
            && self.sum_current_sq >= self.sum_current_sq_on_square * (1.0 - 1e-12)
            && self.bound >= self.uniform_bound * (1.0 - 1e-12)
    }
}

/// Per-eigenpair certificate in export form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    #[serde(rename = "E")]
    pub energy: f64,
    pub case: u8,
    #[serde(rename = "Q_corner")]
    pub square_corner: [i32; 2],
    pub c: f64,
    pub min_on_q: f64,
    pub omega_q: f64,
    pub phases: [f64; 4],
    pub bound: f64,
    pub sum_j_sq: f64,
}

impl From<&CurrentBound> for CertificateRecord {
    fn from(b: &CurrentBound) -> Self {
        let corner = b.square.square.corner;
        Self {
            energy: b.energy,
            case: b.square.case.number(),
            square_corner: [corner.x1, corner.x2],
            c: b.square.lower_bound_c,
            min_on_q: b.square.min_modulus_on_square,
            omega_q: b.flux_on_square,
            phases: b.phases,
            bound: b.bound,
            sum_j_sq: b.sum_current_sq,
        }
    }
}

/// An arrow of `∂Q` whose phase lies in `T_{b/8}`, choosing the largest
/// `|sin φ|`.
pub fn pigeonhole_index(phases: &[f64; 4], b: f64) -> Option<usize> {
    (0..4)
        .filter(|&k| in_tb(phases[k], b / 8.0))
        .max_by(|&i, &j| phases[i].sin().abs().total_cmp(&phases[j].sin().abs()))
}

pub fn current_lower_bound(
    psi: &[Complex64],
    potential: &VectorPotential,
    energy: f64,
    e_star: f64,
    b: f64,
) -> Result<CurrentBound> {
    let region = potential.region();
    let flux = potential.flux_field();
    if !flux.all_in_tb(b) {
        return Err(Error::Precondition(format!(
            "some plaquet flux lies within {b} of 0 or π"
        )));
    }
    let square = find_square(region, psi, energy, e_star)?;
    let m = square.max_modulus;
    let arg = |x: Site| -> Result<f64> {
        let z = psi[region.index(x).expect("square inside box")];
        if z.norm() < 1e-14 * m {
            return Err(Error::Certificate(format!(
                "|ψ| vanishes at {x} on the certified square"
            )));
        }
        Ok(z.arg())
    };
    let boundary = square.square.boundary();
    let mut phases = [0.0; 4];
    for (k, a) in boundary.iter().enumerate() {
        let potential_value = potential.get(*a).expect("square inside box").value();
        phases[k] = wrap(potential_value + arg(a.terminal())? - arg(a.initial())?);
    }
    let phase_sum = wrap(phases.iter().sum());
    let flux_on_square = flux.get(square.square).expect("square inside box").value();
    if (wrap(phase_sum - flux_on_square)).abs() > 1e-9 {
        return Err(Error::Certificate(format!(
            "phase sum {phase_sum} differs from the flux {flux_on_square}"
        )));
    }
    let k = pigeonhole_index(&phases, b).ok_or_else(|| {
        Error::Certificate(format!(
            "no phase of {phases:?} lies in T_(b/8) although the flux {flux_on_square} lies in T_b"
        ))
    })?;

    let current = current_field(psi, potential)?;
    let sum_current_sq = current.norm_squared();
    // each arrow of ∂Q counted once, as in the sum over ∂Q
    let sum_current_sq_on_square = boundary.iter().map(|a| current.get(*a).powi(2)).sum();
    let c = square.lower_bound_c;
    let sin_sq = (b / 8.0).sin().powi(2);
    let bound = 4.0 * (c * m).powi(4) * sin_sq;
    let uniform_bound = 4.0 * c.powi(4) * (region.num_sites() as f64).powi(-2) * sin_sq;
    Ok(CurrentBound {
        energy,
        square,
        phases,
        phase_sum,
        flux_on_square,
        pigeonhole_arrow: boundary[k],
        sum_current_sq,
        sum_current_sq_on_square,
        bound,
        uniform_bound,
    })
}

/// Exhaustive check of the contrapositive of the pigeonhole step: phases
/// all within `b/8` of `{0, π}` sum to a point outside `T_b`. Returns the
/// number of grid points checked and the number of violations.
pub fn pigeonhole_grid_check(b: f64, points_per_arc: usize) -> (u64, u64) {
    let arc: Vec<f64> = (0..points_per_arc)
        .map(|i| -b / 8.0 + b / 4.0 * i as f64 / (points_per_arc - 1) as f64)
        .collect();
    let values: Vec<f64> = arc.iter().flat_map(|d| [*d, PI + d]).collect();
    let (mut checked, mut violations) = (0u64, 0u64);
    for p in &values {
        for q in &values {
            for r in &values {
                for s in &values {
                    checked += 1;
                    // exact multiples of π plus at most b/2: distance ≤ b/2 < b
                    if distance_from_zero_and_pi(p + q + r + s) > 0.5 * b + 1e-12 {
                        violations += 1;
                    }
                }
            }
        }
    }
    (checked, violations)
}

/// One row of the `L⁴ Σ_f ⟨Y_f H⟩²` scaling table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "L")]
    pub half_width: u32,
    pub samples: usize,
    pub eigenpairs: usize,
    /// Minimum over eigenpairs with `E ≤ E*` of `L⁴ Σ_f ⟨Y_f H⟩²`.
    pub min_scaled: f64,
    pub median_scaled: f64,
    pub max_scaled: f64,
    /// Minimum of `L⁴ Σ_a |J(a)|²`.
    pub min_scaled_current: f64,
}

/// Monte Carlo estimate of the floor of `L⁴ Σ_f ⟨Y_f H⟩²` over eigenpairs
/// with energy `≤ E*`.
pub fn scaling_study(
    half_widths: &[u32],
    samples: usize,
    e_star: f64,
    density: &FluxDensity,
    master_seed: u64,
) -> Result<Vec<ScalingRow>> {
    half_widths
        .iter()
        .map(|&l| {
            let region = BoxRegion::centered(l)?;
            let seed = mix_seed(master_seed, u64::from(l));
            let scale = f64::from(l).powi(4);
            let mut scaled = Vec::new();
            let mut min_current = f64::INFINITY;
            for s in 0..samples {
                let flux = sample(density, &region, seed, s as u64).flux_field;
                let potential = VectorPotential::from_flux(&flux, Gauge::default());
                let spectrum = HamiltonianMatrix::assemble(&region, &potential)?.eigendecompose()?;
                for k in 0..spectrum.len() {
                    if spectrum.eigenvalues[k] > e_star {
                        break;
                    }
                    let psi = spectrum.eigenvector(k).expect("eigenvectors computed");
                    let norms = derivative_norm_squared(psi, &potential, Gauge::default())?;
                    scaled.push(scale * norms.sum_derivative_sq);
                    min_current = min_current.min(scale * norms.sum_current_sq);
                }
            }
            scaled.sort_by(f64::total_cmp);
            let pick = |q: f64| {
                if scaled.is_empty() {
                    f64::NAN
                } else {
                    scaled[((scaled.len() - 1) as f64 * q).round() as usize]
                }
            };
            Ok(ScalingRow {
                half_width: l,
                samples,
                eigenpairs: scaled.len(),
                min_scaled: pick(0.0),
                median_scaled: pick(0.5),
                max_scaled: pick(1.0),
                min_scaled_current: min_current,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::FluxField;
    use crate::lattice::Direction;
    use crate::randomfield::DensityMode;
    use std::f64::consts::FRAC_PI_4;

    fn bump() -> FluxDensity {
        FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap()
    }

    fn instance(l: u32, seed: u64, index: u64) -> (VectorPotential, crate::operator::SpectrumResult) {
        let region = BoxRegion::centered(l).unwrap();
        let flux = sample(&bump(), &region, seed, index).flux_field;
        let potential = VectorPotential::from_flux(&flux, Gauge::Right);
        let spectrum = HamiltonianMatrix::assemble(&region, &potential)
            .unwrap()
            .eigendecompose()
            .unwrap();
        (potential, spectrum)
    }

    #[test]
    fn constants_at_unit_threshold() {
        let c = SquareConstants::new(1.0, 0.1);
        assert!((c.kappa_small - 0.9).abs() < 1e-15);
        // corner bound ½(3·0.75 − 2) = 0.125 is above ε
        assert!((c.case_large - 0.1).abs() < 1e-15);
        // ½(3·0.9 − 2)
        assert!((c.case_small - 0.35).abs() < 1e-15);
        let loose = SquareConstants::new(1.0, 0.2);
        assert!((loose.case_large - 0.125).abs() < 1e-15);
        // the large-neighbour corner bound closes at E_crit
        let near = SquareConstants::new(E_CRIT - 1e-9, 0.1);
        assert!(near.case_large < 1e-8);
    }

    #[test]
    fn neighbor_bounds_on_eigenvectors() {
        for index in 0..10 {
            let (potential, spectrum) = instance(4, 1, index);
            for k in 0..spectrum.len() {
                let e = spectrum.eigenvalues[k];
                if e > 4.0 {
                    break;
                }
                let r = neighbor_bounds(spectrum.eigenvector(k).unwrap(), &potential, e).unwrap();
                assert!(r.holds(1e-10), "{r:?}");
                assert!(r.max_site.max_modulus >= r.max_site.normalization_floor);
            }
        }
    }

    #[test]
    fn zero_flux_ground_state_satisfies_bounds() {
        let region = BoxRegion::centered(2).unwrap();
        let zero = VectorPotential::zero(region);
        let s = HamiltonianMatrix::assemble(&region, &zero).unwrap().eigendecompose().unwrap();
        let r = neighbor_bounds(s.eigenvector(0).unwrap(), &zero, s.eigenvalues[0]).unwrap();
        assert!(r.holds(1e-10));
        // ground state of the 5×5 grid: 4 − 4 cos(π/6)
        assert!((s.eigenvalues[0] - (4.0 - 4.0 * (PI / 6.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn synthetic_vector_is_flagged() {
        let region = BoxRegion::centered(2).unwrap();
        let zero = VectorPotential::zero(region);
        let mut psi = vec![Complex64::new(0.0, 0.0); 25];
        psi[12] = Complex64::new(1.0, 0.0);
        let r = neighbor_bounds(&psi, &zero, 0.5).unwrap();
        assert!(!r.holds(1e-10));
        assert!(r.eigen_residual > 1.0);
        assert!(neighbor_bounds(&psi, &zero, 4.5).is_err());
    }

    #[test]
    fn squares_certify_below_threshold() {
        for index in 0..20 {
            let (potential, spectrum) = instance(6, 2, index);
            for k in 0..spectrum.len() {
                let e = spectrum.eigenvalues[k];
                if e > 1.0 {
                    break;
                }
                let cert = find_square(potential.region(), spectrum.eigenvector(k).unwrap(), e, 1.0).unwrap();
                assert!(cert.validates(), "{cert:?}");
            }
        }
    }

    #[test]
    fn square_search_refuses_high_energy() {
        let (potential, spectrum) = instance(2, 3, 0);
        let psi = spectrum.eigenvector(20).unwrap();
        assert!(find_square(potential.region(), psi, spectrum.eigenvalues[20], 1.0).is_err());
        assert!(find_square(potential.region(), psi, 0.5, 1.2).is_err());
    }

    #[test]
    fn current_bound_chain() {
        let (potential, spectrum) = instance(4, 4, 0);
        let e = spectrum.eigenvalues[0];
        assert!(e <= 1.0);
        let b = current_lower_bound(spectrum.eigenvector(0).unwrap(), &potential, e, 1.0, FRAC_PI_4).unwrap();
        assert!(b.holds(), "{b:?}");
        assert!(b.bound > 0.0);
        let record = CertificateRecord::from(&b);
        let json = serde_json::to_value(&record).unwrap();
        for key in ["E", "case", "Q_corner", "c", "min_on_q", "omega_q", "phases", "bound", "sum_j_sq"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn current_bound_holds_across_samples() {
        let mut certified = 0;
        for index in 0..30 {
            let (potential, spectrum) = instance(4, 5, index);
            for k in 0..spectrum.len() {
                let e = spectrum.eigenvalues[k];
                if e > 1.0 {
                    break;
                }
                let psi = spectrum.eigenvector(k).unwrap();
                let b = current_lower_bound(psi, &potential, e, 1.0, FRAC_PI_4).unwrap();
                assert!(b.holds(), "{b:?}");
                certified += 1;
            }
        }
        assert!(certified > 30);
    }

    #[test]
    fn zero_flux_is_refused() {
        let region = BoxRegion::centered(2).unwrap();
        let zero = VectorPotential::zero(region);
        let s = HamiltonianMatrix::assemble(&region, &zero).unwrap().eigendecompose().unwrap();
        let psi = s.eigenvector(0).unwrap();
        assert!(current_field(psi, &zero).unwrap().max_abs() < 1e-12);
        assert!(matches!(
            current_lower_bound(psi, &zero, s.eigenvalues[0], 1.0, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn maximal_flux_has_real_eigenvectors() {
        let region = BoxRegion::centered(3).unwrap();
        let potential = VectorPotential::from_fn(region, |e| match e.dir {
            Direction::E1 => 0.0,
            Direction::E2 => PI * f64::from(e.base.x1),
        });
        let flux = potential.flux_field();
        assert!(flux.iter().all(|(_, w)| (w.value().abs() - PI).abs() < 1e-12));
        let s = HamiltonianMatrix::assemble(&region, &potential).unwrap().eigendecompose().unwrap();
        for cluster in s.clusters() {
            if cluster.len() == 1 {
                let psi = s.eigenvector(cluster.start).unwrap();
                assert!(current_field(psi, &potential).unwrap().max_abs() < 1e-10);
            }
        }
        assert!(!flux.all_in_tb(0.1));
    }

    #[test]
    fn pigeonhole_contrapositive() {
        let (checked, violations) = pigeonhole_grid_check(FRAC_PI_4, 26);
        assert_eq!(checked, 52u64.pow(4));
        assert_eq!(violations, 0);
    }

    #[test]
    fn pigeonhole_picks_phase_away_from_axis() {
        let b = 0.8;
        let phases: [f64; 4] = [0.01, PI - 0.02, 0.5, -0.05];
        assert_eq!(pigeonhole_index(&phases, b), Some(2));
        assert_eq!(pigeonhole_index(&[0.0f64, PI, 0.05, -0.05], b), None);
    }

    #[test]
    fn uniform_fraction_floor() {
        let region = BoxRegion::centered(3).unwrap();
        let flux = FluxField::constant(region, 1.0);
        let potential = VectorPotential::from_flux(&flux, Gauge::Above);
        let s = HamiltonianMatrix::assemble(&region, &potential).unwrap().eigendecompose().unwrap();
        for k in 0..s.len() {
            let r = MaxSiteReport::new(&region, s.eigenvector(k).unwrap());
            assert!(r.max_modulus >= 1.0 / 7.0 - 1e-15);
        }
    }

    #[test]
    fn scaling_floor_is_positive() {
        let rows = scaling_study(&[2, 3], 3, 1.0, &bump(), 7).unwrap();
        for r in rows {
            assert!(r.eigenpairs > 0);
            assert!(r.min_scaled > 0.0);
            assert!(r.min_scaled <= r.median_scaled && r.median_scaled <= r.max_scaled);
        }
    }
}
