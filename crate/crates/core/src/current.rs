//! Probability currents of eigenfunctions and flux derivatives of
//! eigenvalues.
//!
//! For a vector potential `A` and a plaquet `f`, moving `A` along the gauge
//! coefficients `α_f` shifts the flux through `f` alone. The first-order
//! response of an eigenvalue is `⟨Y_f H⟩_ψ = ½ Σ_a α_f(a) J_ψ(a)`, where
//! `J_ψ(a) = −2 Re ψ̄(a_i) i e^{iA(a)} ψ(a_t)` is the current.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{Gauge, GaugeCoefficients, VectorPotential};
use crate::lattice::{Arrow, BoxRegion, Direction, Plaquet, Site};
use crate::operator::{eigen, HamiltonianMatrix, SpectrumResult};

/// Current on the arrows of a box, stored on forward arrows.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentField {
    region: BoxRegion,
    values: Vec<f64>,
}

impl CurrentField {
    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    /// Values on forward arrows, indexed like [`BoxRegion::edge`].
    pub fn edge_values(&self) -> &[f64] {
        &self.values
    }

    /// `J(a)`; zero for arrows leaving the box.
    pub fn get(&self, a: Arrow) -> f64 {
        let (e, forward) = a.edge();
        match self.region.edge_index(e) {
            Some(i) if forward => self.values[i],
            Some(i) => -self.values[i],
            None => 0.0,
        }
    }

    /// `Σ_{y∼x} J(x, y)`.
    pub fn divergence(&self, x: Site) -> f64 {
        self.region
            .neighbors(x)
            .map(|y| self.get(Arrow::new(x, y).expect("neighbours")))
            .sum()
    }

    pub fn max_abs_divergence(&self) -> f64 {
        self.region
            .sites()
            .map(|x| self.divergence(x).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_{a∈A_Λ} |J(a)|²`, both orientations counted.
    pub fn norm_squared(&self) -> f64 {
        2.0 * self.values.iter().map(|j| j * j).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, j| m.max(j.abs()))
    }

    /// CSV with columns `a_i_x1, a_i_x2, a_t_x1, a_t_x2, J`, one row per
    /// arrow of the box.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["a_i_x1", "a_i_x2", "a_t_x1", "a_t_x2", "J"])?;
        for a in self.region.arrows() {
            let (i, t) = (a.initial(), a.terminal());
            w.serialize((i.x1, i.x2, t.x1, t.x2, self.get(a)))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_len(region: &BoxRegion, psi: &[Complex64]) -> Result<()> {
    if psi.len() != region.num_sites() {
        return Err(Error::Precondition(format!(
            "vector has {} entries but the box has {} sites",
            psi.len(),
            region.num_sites()
        )));
    }
    Ok(())
}

/// `J_ψ(a) = −2 Re ψ̄(a_i) i e^{iA(a)} ψ(a_t)` on every arrow of the box.
pub fn current_field(psi: &[Complex64], potential: &VectorPotential) -> Result<CurrentField> {
    let region = *potential.region();
    check_len(&region, psi)?;
    let values = region
        .edges()
        .zip(potential.edge_values())
        .map(|(e, a)| {
            let x = psi[region.index(e.base).expect("edge inside box")];
            let y = psi[region.index(e.tip()).expect("edge inside box")];
            -2.0 * (x.conj() * Complex64::i() * Complex64::from_polar(1.0, *a) * y).re
        })
        .collect();
    Ok(CurrentField { region, values })
}

/// `½ Σ_a α(a) J(a)` for an arbitrary coefficient field.
pub fn derivative_from_current(current: &CurrentField, alpha: &GaugeCoefficients) -> f64 {
    // α(ā)J(ā) = α(a)J(a), so the half sum over arrows is a sum over edges
    alpha
        .entries()
        .iter()
        .map(|&(i, c)| c * current.values[i])
        .sum()
}

/// `⟨Y_f H⟩_ψ` in gauge `τ`, evaluated as `½ Σ_a α_f(a) J_ψ(a)`.
pub fn hf_derivative(
    psi: &[Complex64],
    potential: &VectorPotential,
    f: Plaquet,
    gauge: Gauge,
) -> Result<f64> {
    let alpha = GaugeCoefficients::canonical(f, gauge, potential.region())?;
    Ok(derivative_from_current(&current_field(psi, potential)?, &alpha))
}

/// `⟨ψ, (Y H) φ⟩ = −Σ_{(x,y)} ψ̄(x) i α(x,y) e^{iA(x,y)} φ(y)` summed over
/// ordered neighbour pairs of the box.
pub fn derivative_matrix_element(
    psi: &[Complex64],
    phi: &[Complex64],
    potential: &VectorPotential,
    alpha: &GaugeCoefficients,
) -> Complex64 {
    let region = potential.region();
    let mut sum = Complex64::new(0.0, 0.0);
    for &(i, c) in alpha.entries() {
        let e = region.edge(i);
        let (x, y) = (region.index(e.base).unwrap(), region.index(e.tip()).unwrap());
        let a = potential.edge_values()[i];
        // forward (x, y) and reverse (y, x), where α and A flip sign
        sum += psi[x].conj() * c * Complex64::from_polar(1.0, a) * phi[y];
        sum -= psi[y].conj() * c * Complex64::from_polar(1.0, -a) * phi[x];
    }
    -Complex64::i() * sum
}

/// `⟨Y_f H⟩_ψ` from the double sum over ordered pairs, without the current.
pub fn hf_derivative_direct(
    psi: &[Complex64],
    potential: &VectorPotential,
    f: Plaquet,
    gauge: Gauge,
) -> Result<Complex64> {
    check_len(potential.region(), psi)?;
    let alpha = GaugeCoefficients::canonical(f, gauge, potential.region())?;
    Ok(derivative_matrix_element(psi, psi, potential, &alpha))
}

/// `(⟨Y_f H⟩_ψ)_{f∈F_Λ}` in plaquet order.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxDerivativeVector {
    pub region: BoxRegion,
    pub values: Vec<f64>,
}

impl FluxDerivativeVector {
    pub fn get(&self, f: Plaquet) -> Option<f64> {
        self.region.plaquet_index(f).map(|i| self.values[i])
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|y| y * y).sum()
    }
}

pub fn derivative_vector(
    psi: &[Complex64],
    potential: &VectorPotential,
    gauge: Gauge,
) -> Result<FluxDerivativeVector> {
    let region = *potential.region();
    let current = current_field(psi, potential)?;
    let values = region
        .plaquets()
        .map(|f| {
            let alpha = GaugeCoefficients::canonical(f, gauge, &region)?;
            Ok(derivative_from_current(&current, &alpha))
        })
        .collect::<Result<_>>()?;
    Ok(FluxDerivativeVector { region, values })
}

/// Gauge pairing for the current inversion at arrow `a` (forward edge
/// orientation): horizontal edges use the gauge reaching up, except on the
/// bottom row; vertical edges use the gauge reaching right, except on the
/// left column.
fn inversion_gauge(region: &BoxRegion, base: Site, dir: Direction) -> Gauge {
    match dir {
        Direction::E1 if base.x2 == region.lo().x2 => Gauge::Below,
        Direction::E1 => Gauge::Above,
        Direction::E2 if base.x1 == region.lo().x1 => Gauge::Left,
        Direction::E2 => Gauge::Right,
    }
}

/// `c_a ⟨Y_{f_a}H⟩_ψ − c_ā ⟨Y_{f_ā}H⟩_ψ`, where `c_a` indicates `f_a ∈ F_Λ`.
pub fn current_from_derivatives(
    psi: &[Complex64],
    potential: &VectorPotential,
    a: Arrow,
) -> Result<f64> {
    let region = potential.region();
    if !region.contains_arrow(a) {
        return Err(Error::Precondition(format!("arrow {a} leaves the box")));
    }
    let (edge, forward) = a.edge();
    let gauge = inversion_gauge(region, edge.base, edge.dir);
    let current = current_field(psi, potential)?;
    let term = |f: Plaquet| -> Result<f64> {
        if region.contains_plaquet(f) {
            let alpha = GaugeCoefficients::canonical(f, gauge, region)?;
            Ok(derivative_from_current(&current, &alpha))
        } else {
            Ok(0.0)
        }
    };
    let fwd = edge.forward();
    let value = term(fwd.plaquet())? - term(fwd.reverse().plaquet())?;
    Ok(if forward { value } else { -value })
}

/// `Σ_f ⟨Y_f H⟩²` next to `Σ_a |J(a)|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeNorms {
    pub sum_derivative_sq: f64,
    pub sum_current_sq: f64,
    /// `Σ_a |J|² / Σ_f ⟨Y_f H⟩²` (NaN when both vanish).
    pub ratio: f64,
    /// `32 Σ_f ⟨Y_f H⟩² ≥ Σ_a |J|²`.
    pub bound_holds: bool,
}

pub fn derivative_norm_squared(
    psi: &[Complex64],
    potential: &VectorPotential,
    gauge: Gauge,
) -> Result<DerivativeNorms> {
    let current = current_field(psi, potential)?;
    let region = *potential.region();
    let mut sum_derivative_sq = 0.0;
    for f in region.plaquets() {
        let alpha = GaugeCoefficients::canonical(f, gauge, &region)?;
        sum_derivative_sq += derivative_from_current(&current, &alpha).powi(2);
    }
    let sum_current_sq = current.norm_squared();
    let slack = 1e-12 * sum_current_sq.max(1e-300);
    Ok(DerivativeNorms {
        sum_derivative_sq,
        sum_current_sq,
        ratio: sum_current_sq / sum_derivative_sq,
        bound_holds: 32.0 * sum_derivative_sq + slack >= sum_current_sq,
    })
}

/// Dense `Y²H = ∂²_s H(A + sα)`, entries `α(x,y)² e^{iA(x,y)}` (the hopping
/// is `−e^{iA}`, so two derivatives flip its sign).
pub fn second_derivative_matrix(potential: &VectorPotential, alpha: &GaugeCoefficients) -> Vec<Complex64> {
    let region = potential.region();
    let n = region.num_sites();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for &(i, c) in alpha.entries() {
        let e = region.edge(i);
        let (x, y) = (region.index(e.base).unwrap(), region.index(e.tip()).unwrap());
        let a = potential.edge_values()[i];
        m[x * n + y] = c * c * Complex64::from_polar(1.0, a);
        m[y * n + x] = c * c * Complex64::from_polar(1.0, -a);
    }
    m
}

/// Spectral norm of `Y²H` and its max-row-sum bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivativeNorm {
    pub spectral_norm: f64,
    pub row_sum_bound: f64,
}

pub fn second_derivative_norm_for(
    potential: &VectorPotential,
    alpha: &GaugeCoefficients,
) -> Result<SecondDerivativeNorm> {
    let n = potential.region().num_sites();
    let m = second_derivative_matrix(potential, alpha);
    let values = eigen::hermitian_eigenvalues(&m, n)?;
    let spectral_norm = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(SecondDerivativeNorm {
        spectral_norm,
        row_sum_bound: crate::operator::inertia::norm_bound(&m, n),
    })
}

/// `‖Y_f² H‖` in gauge `τ`.
pub fn second_derivative_operator_norm(
    potential: &VectorPotential,
    f: Plaquet,
    gauge: Gauge,
) -> Result<SecondDerivativeNorm> {
    let alpha = GaugeCoefficients::canonical(f, gauge, potential.region())?;
    second_derivative_norm_for(potential, &alpha)
}

/// Eigenvalues of `H(A + sα)` matched to the eigenvectors of `base` by
/// maximal overlap rather than by sort order.
pub fn tracked_eigenvalues(
    base: &SpectrumResult,
    potential: &VectorPotential,
    alpha: &GaugeCoefficients,
    s: f64,
) -> Result<Vec<f64>> {
    let shifted = HamiltonianMatrix::assemble(potential.region(), &potential.perturbed(alpha, s)?)?;
    let perturbed = shifted.eigendecompose()?;
    let n = base.len();
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for l in 0..n {
        let psi = base
            .eigenvector(l)
            .ok_or_else(|| Error::Precondition("tracking needs eigenvectors".into()))?;
        let (mut best, mut best_overlap) = (0, -1.0);
        for k in 0..n {
            let phi = perturbed.eigenvector(k).expect("vectors computed");
            let overlap = psi
                .iter()
                .zip(phi)
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                .norm();
            if overlap > best_overlap {
                best_overlap = overlap;
                best = k;
            }
        }
        if taken[best] {
            return Err(Error::NearDegenerate {
                gap: min_gap_around(&base.eigenvalues, l),
            });
        }
        taken[best] = true;
        out.push(perturbed.eigenvalues[best]);
    }
    Ok(out)
}

fn min_gap_around(values: &[f64], l: usize) -> f64 {
    let left = if l > 0 { values[l] - values[l - 1] } else { f64::INFINITY };
    let right = values.get(l + 1).map_or(f64::INFINITY, |v| v - values[l]);
    left.min(right)
}

/// Centered difference `[λ(ω_f + h) − λ(ω_f − h)] / 2h` for every
/// eigenvalue, with overlap tracking.
pub fn finite_difference_derivatives(
    base: &SpectrumResult,
    potential: &VectorPotential,
    f: Plaquet,
    gauge: Gauge,
    h: f64,
) -> Result<Vec<f64>> {
    let alpha = GaugeCoefficients::canonical(f, gauge, potential.region())?;
    let plus = tracked_eigenvalues(base, potential, &alpha, h)?;
    let minus = tracked_eigenvalues(base, potential, &alpha, -h)?;
    Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect())
}

/// Step for the second differences of eigenvalues in the trace inequality.
pub const SECOND_DIFFERENCE_STEP: f64 = 1e-4;

/// Second derivatives `∂²λ_ℓ/∂ω_f²` by central differences at `h` and
/// `h/2`, combined by Richardson extrapolation.
pub fn second_difference_derivatives(
    base: &SpectrumResult,
    potential: &VectorPotential,
    alpha: &GaugeCoefficients,
    h: f64,
) -> Result<Vec<f64>> {
    let at = |s: f64| tracked_eigenvalues(base, potential, alpha, s);
    let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(0.5 * h)?, at(-0.5 * h)?);
    Ok((0..base.len())
        .map(|l| {
            let l0 = base.eigenvalues[l];
            let coarse = (p1[l] - 2.0 * l0 + m1[l]) / (h * h);
            let fine = (p2[l] - 2.0 * l0 + m2[l]) / (0.25 * h * h);
            (4.0 * fine - coarse) / 3.0
        })
        .collect())
}

/// `F(x) = ∫_{−∞}^x χ_{E,η}` for the closed window `[E − η/2, E + η/2]`.
pub fn window_ramp(x: f64, energy: f64, eta: f64) -> f64 {
    (x - (energy - 0.5 * eta)).clamp(0.0, eta)
}

/// `G(x) = ∫_{−∞}^x F`.
pub fn window_ramp_integral(x: f64, energy: f64, eta: f64) -> f64 {
    let t = x - (energy - 0.5 * eta);
    if t <= 0.0 {
        0.0
    } else if t <= eta {
        0.5 * t * t
    } else {
        0.5 * eta * eta + eta * (t - eta)
    }
}

/// Both sides of `Tr (Y²H) F(H) ≤ Σ_ℓ (Y²λ_ℓ) F(λ_ℓ)` and the size of
/// `Tr G(H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTrickReport {
    pub lhs: f64,
    pub rhs: f64,
    pub trace_g: f64,
    /// `Tr G(H) / (N η)`; at most `max(λ) − (E − η/2)` and hence `≤ 8`.
    pub g_constant: f64,
    /// Smallest gap among eigenvalues with `F(λ) > 0`.
    pub min_gap: f64,
}

/// Gap below which the finite-difference second derivatives are not
/// trusted.
pub const TRACKING_GAP: f64 = 1e-6;

pub fn trace_trick_check(
    potential: &VectorPotential,
    f: Plaquet,
    gauge: Gauge,
    energy: f64,
    eta: f64,
) -> Result<TraceTrickReport> {
    if eta < 0.0 {
        return Err(Error::Precondition(format!("window width must be ≥ 0, got {eta}")));
    }
    let region = potential.region();
    let h = HamiltonianMatrix::assemble(region, potential)?;
    let spectrum = h.eigendecompose()?;
    let n = spectrum.len();
    let ramp: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .map(|l| window_ramp(*l, energy, eta))
        .collect();
    let trace_g: f64 = spectrum
        .eigenvalues
        .iter()
        .map(|l| window_ramp_integral(*l, energy, eta))
        .sum();
    let g_constant = if eta > 0.0 { trace_g / (n as f64 * eta) } else { 0.0 };

    // F = η above the window and Σ_ℓ Y²λ_ℓ = Tr Y²H, so the constant part
    // of F is taken exactly and only F − η is weighted eigenvalue by eigenvalue
    let active: Vec<usize> = (0..n).filter(|&l| ramp[l] < eta).collect();
    let alpha = GaugeCoefficients::canonical(f, gauge, region)?;
    let y2 = second_derivative_matrix(potential, &alpha);
    let trace_y2: f64 = (0..n).map(|x| y2[x * n + x].re).sum();
    if active.is_empty() {
        return Ok(TraceTrickReport {
            lhs: eta * trace_y2,
            rhs: eta * trace_y2,
            trace_g,
            g_constant,
            min_gap: f64::INFINITY,
        });
    }
    let min_gap = active
        .iter()
        .map(|&l| min_gap_around(&spectrum.eigenvalues, l))
        .fold(f64::INFINITY, f64::min);
    if min_gap < TRACKING_GAP {
        return Err(Error::NearDegenerate { gap: min_gap });
    }

    let lhs: f64 = eta * trace_y2
        + active
            .iter()
            .map(|&l| {
                let psi = spectrum.eigenvector(l).unwrap();
                let quad: f64 = (0..n)
                    .map(|x| {
                        let row: Complex64 = (0..n).map(|y| y2[x * n + y] * psi[y]).sum();
                        (psi[x].conj() * row).re
                    })
                    .sum();
                quad * (ramp[l] - eta)
            })
            .sum::<f64>();
    let second = second_difference_derivatives(&spectrum, potential, &alpha, SECOND_DIFFERENCE_STEP)?;
    let rhs: f64 = eta * trace_y2 + active.iter().map(|&l| second[l] * (ramp[l] - eta)).sum::<f64>();
    Ok(TraceTrickReport {
        lhs,
        rhs,
        trace_g,
        g_constant,
        min_gap,
    })
}

/// `Tr T²` against `Σ_h ⟨Y_f H⟩²_{φ_h}` for `T = P (Y_f H) P` on a
/// degenerate eigenspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub multiplicity: usize,
    pub trace_t_sq: f64,
    pub sum_diagonal_sq: f64,
}

pub fn jensen_cluster_check(
    spectrum: &SpectrumResult,
    cluster: std::ops::Range<usize>,
    potential: &VectorPotential,
    f: Plaquet,
    gauge: Gauge,
) -> Result<JensenReport> {
    let alpha = GaugeCoefficients::canonical(f, gauge, potential.region())?;
    let vec = |k: usize| {
        spectrum
            .eigenvector(k)
            .ok_or_else(|| Error::Precondition("cluster check needs eigenvectors".into()))
    };
    let mut trace_t_sq = 0.0;
    let mut sum_diagonal_sq = 0.0;
    for a in cluster.clone() {
        for b in cluster.clone() {
            let t = derivative_matrix_element(vec(a)?, vec(b)?, potential, &alpha);
            trace_t_sq += t.norm_sqr();
            if a == b {
                sum_diagonal_sq += t.re * t.re;
            }
        }
    }
    Ok(JensenReport {
        multiplicity: cluster.len(),
        trace_t_sq,
        sum_diagonal_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{FluxField, GaugeFunction};
    use crate::randomfield::{sample, DensityMode, FluxDensity};
    use crate::rng::CounterStream;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn random_potential(l: u32, seed: u64, gauge: Gauge) -> VectorPotential {
        let region = BoxRegion::centered(l).unwrap();
        let mut s = CounterStream::new(seed, 0);
        let values = (0..region.num_plaquets())
            .map(|k| 2.0 * PI * s.uniform_at(k as u64) - PI)
            .collect();
        VectorPotential::from_flux(&FluxField::new(region, values).unwrap(), gauge)
    }

    fn spectrum(potential: &VectorPotential) -> SpectrumResult {
        HamiltonianMatrix::assemble(potential.region(), potential)
            .unwrap()
            .eigendecompose()
            .unwrap()
    }

    #[test]
    fn real_vector_without_field_has_no_current() {
        let region = BoxRegion::centered(2).unwrap();
        let a = VectorPotential::zero(region);
        let psi: Vec<Complex64> = (0..25).map(|i| Complex64::new(i as f64 - 3.0, 0.0)).collect();
        let j = current_field(&psi, &a).unwrap();
        assert_eq!(j.max_abs(), 0.0);
        for f in region.plaquets() {
            assert_eq!(hf_derivative(&psi, &a, f, Gauge::Right).unwrap(), 0.0);
        }
    }

    #[test]
    fn antisymmetry_and_divergence() {
        let a = random_potential(2, 1, Gauge::Right);
        let s = spectrum(&a);
        for k in [0, 7, 24] {
            let j = current_field(s.eigenvector(k).unwrap(), &a).unwrap();
            for arrow in a.region().arrows() {
                assert_eq!(j.get(arrow), -j.get(arrow.reverse()));
            }
            assert!(j.max_abs_divergence() < 1e-10);
            assert!(j.max_abs() > 1e-6);
        }
    }

    #[test]
    fn current_is_gauge_invariant() {
        let a = random_potential(2, 2, Gauge::Above);
        let region = *a.region();
        let mut s = CounterStream::new(5, 5);
        let lambda_values: Vec<f64> = (0..25).map(|k| 6.0 * s.uniform_at(k)).collect();
        let lambda = GaugeFunction::from_fn(region, |x| lambda_values[region.index(x).unwrap()]);
        let transformed = a.gauge_transform(&lambda).unwrap();
        let psi = spectrum(&a).eigenvector(3).unwrap().to_vec();
        let u_psi: Vec<Complex64> = psi
            .iter()
            .zip(&lambda_values)
            .map(|(p, l)| p * Complex64::from_polar(1.0, *l))
            .collect();
        let j = current_field(&psi, &a).unwrap();
        let j2 = current_field(&u_psi, &transformed).unwrap();
        for (x, y) in j.edge_values().iter().zip(j2.edge_values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_forms_agree_and_are_gauge_independent() {
        let a = random_potential(2, 3, Gauge::Right);
        let s = spectrum(&a);
        for k in 0..s.len() {
            let psi = s.eigenvector(k).unwrap();
            for f in a.region().plaquets() {
                let half_sum = hf_derivative(psi, &a, f, Gauge::Right).unwrap();
                let direct = hf_derivative_direct(psi, &a, f, Gauge::Right).unwrap();
                assert!((half_sum - direct.re).abs() < 1e-12);
                assert!(direct.im.abs() < 1e-12);
                for g in Gauge::ALL {
                    assert!((hf_derivative(psi, &a, f, g).unwrap() - half_sum).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hellmann_feynman_matches_finite_differences() {
        let a = random_potential(2, 4, Gauge::Right);
        let s = spectrum(&a);
        let f = a.region().plaquet(5);
        let fd = finite_difference_derivatives(&s, &a, f, Gauge::Right, 1e-5).unwrap();
        for k in 0..s.len() {
            let hf = hf_derivative(s.eigenvector(k).unwrap(), &a, f, Gauge::Right).unwrap();
            assert!((hf - fd[k]).abs() < 1e-6, "k={k}: {hf} vs {}", fd[k]);
        }
    }

    #[test]
    fn current_inversion_on_every_arrow() {
        let a = random_potential(2, 6, Gauge::Below);
        let s = spectrum(&a);
        for k in [0, 12] {
            let psi = s.eigenvector(k).unwrap();
            let j = current_field(psi, &a).unwrap();
            for arrow in a.region().arrows() {
                let inv = current_from_derivatives(psi, &a, arrow).unwrap();
                assert!((inv - j.get(arrow)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn current_inversion_on_boundary_uses_one_plaquet() {
        let a = random_potential(2, 7, Gauge::Right);
        let region = *a.region();
        let psi = spectrum(&a).eigenvector(1).unwrap().to_vec();
        // bottom row, horizontal: f_ā lies below the box
        let arrow = Arrow::new(Site::new(0, -2), Site::new(1, -2)).unwrap();
        assert!(!region.contains_plaquet(arrow.reverse().plaquet()));
        let single = hf_derivative(&psi, &a, arrow.plaquet(), Gauge::Right).unwrap();
        assert!((current_from_derivatives(&psi, &a, arrow).unwrap() - single).abs() < 1e-10);
        assert!(
            (current_from_derivatives(&psi, &a, arrow.reverse()).unwrap() + single).abs() < 1e-10
        );
    }

    #[test]
    fn derivative_norms() {
        let region = BoxRegion::centered(2).unwrap();
        let zero = VectorPotential::zero(region);
        let s = spectrum(&zero);
        // zero field: real eigenvectors exist; the solver's are real up to phase
        let psi = s.eigenvector(0).unwrap();
        let phase = psi.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        let real: Vec<Complex64> = psi.iter().map(|p| p * phase.conj() / phase.norm()).collect();
        let n = derivative_norm_squared(&real, &zero, Gauge::Right).unwrap();
        assert!(n.sum_derivative_sq < 1e-24 && n.sum_current_sq < 1e-24);

        let d = FluxDensity::bump(FRAC_PI_4, DensityMode::Symmetric).unwrap();
        let a = VectorPotential::from_flux(&sample(&d, &region, 9, 0).flux_field, Gauge::Right);
        let s = spectrum(&a);
        for k in 0..s.len() {
            let n = derivative_norm_squared(s.eigenvector(k).unwrap(), &a, Gauge::Right).unwrap();
            assert!(n.bound_holds, "k={k}: ratio {}", n.ratio);
            if s.eigenvalues[k] <= 1.0 {
                assert!(n.sum_derivative_sq > 0.0);
            }
        }
    }

    #[test]
    fn second_derivative_norm() {
        let a = random_potential(2, 10, Gauge::Right);
        for f in a.region().plaquets() {
            for g in Gauge::ALL {
                let n = second_derivative_operator_norm(&a, f, g).unwrap();
                assert!(n.spectral_norm <= 4.0);
                // α² is a matching, so the row-sum bound is attained
                assert!((n.spectral_norm - n.row_sum_bound).abs() < 1e-12);
            }
        }
        let zero = GaugeCoefficients::zero(*a.region());
        assert_eq!(second_derivative_norm_for(&a, &zero).unwrap().spectral_norm, 0.0);
    }

    #[test]
    fn trace_inequality() {
        let a = random_potential(2, 12, Gauge::Right);
        let f = a.region().plaquet(6);
        let r = trace_trick_check(&a, f, Gauge::Right, 3.1, 0.7).unwrap();
        assert!(r.lhs <= r.rhs + 1e-6, "{r:?}");
        assert!(r.g_constant <= 8.0);
        let empty = trace_trick_check(&a, f, Gauge::Right, 3.1, 0.0).unwrap();
        assert_eq!((empty.lhs, empty.rhs), (0.0, 0.0));
    }

    #[test]
    fn ramp_functions() {
        assert_eq!(window_ramp(0.0, 1.0, 0.5), 0.0);
        assert_eq!(window_ramp(1.0, 1.0, 0.5), 0.25);
        assert_eq!(window_ramp(2.0, 1.0, 0.5), 0.5);
        // G is the integral of F
        let (e, eta) = (1.0, 0.5);
        let mut acc = 0.0;
        let dx = 1e-5;
        for i in 0..200_000 {
            let x = i as f64 * dx;
            acc += window_ramp(x + 0.5 * dx, e, eta) * dx;
        }
        assert!((acc - window_ramp_integral(2.0, e, eta)).abs() < 1e-8);
    }

    #[test]
    fn jensen_on_degenerate_cluster() {
        let region = BoxRegion::centered(2).unwrap();
        let zero = VectorPotential::zero(region);
        let s = spectrum(&zero);
        let cluster = s.clusters().into_iter().find(|c| c.len() > 1).unwrap();
        for f in region.plaquets() {
            let r = jensen_cluster_check(&s, cluster.clone(), &zero, f, Gauge::Right).unwrap();
            assert!(r.trace_t_sq + 1e-14 >= r.sum_diagonal_sq);
        }
    }

    #[test]
    fn csv_export() {
        let a = random_potential(1, 1, Gauge::Right);
        let psi = spectrum(&a).eigenvector(0).unwrap().to_vec();
        let mut out = Vec::new();
        current_field(&psi, &a).unwrap().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("a_i_x1,a_i_x2,a_t_x1,a_t_x2,J\n"));
        assert_eq!(text.lines().count(), 1 + 24);
    }
}
