//! The magnetic lattice Laplacian `H_Λ(A)` with simple boundary conditions,
//! its spectrum and spectral-window counts.

pub mod eigen;
pub mod inertia;

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{FluxField, Gauge, GaugeFunction, VectorPotential};
use crate::lattice::{Arrow, BoxRegion};

/// `4 − √8`: localization regime threshold at the bottom of the spectrum.
pub const E_CRIT: f64 = 4.0 - 2.828_427_124_746_190_1;

/// Lower edge `4(1 − cos(c/4))` of the almost-sure spectrum when all fluxes
/// stay at distance `≥ c` from zero.
pub fn e0(c: f64) -> f64 {
    4.0 * (1.0 - (c / 4.0).cos())
}

/// Eigenvalues closer than this are treated as one cluster.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Deliberate defects used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyFault {
    #[default]
    None,
    /// Use `e^{iA}` with the forward-edge value for both orientations and
    /// keep the Hermitian part, i.e. hopping `−cos A`. Gauge invariance is
    /// lost.
    BreakAntisymmetry,
}

/// Dense `H_Λ(A)` in the row-major site order of the box.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    region: BoxRegion,
    entries: Vec<Complex64>,
    gauge: Option<Gauge>,
    flux: FluxField,
    /// Neighbour indices per site, for sparse products.
    neighbors: Vec<Vec<usize>>,
}

impl HamiltonianMatrix {
    /// `(Hψ)(x) = 4ψ(x) − Σ_{y∼x, y∈Λ} e^{iA(x,y)} ψ(y)`.
    pub fn assemble(region: &BoxRegion, potential: &VectorPotential) -> Result<Self> {
        Self::assemble_with_fault(region, potential, AssemblyFault::None)
    }

    pub fn assemble_with_fault(
        region: &BoxRegion,
        potential: &VectorPotential,
        fault: AssemblyFault,
    ) -> Result<Self> {
        if potential.region() != region {
            return Err(Error::BoxMismatch {
                expected: region.to_string(),
                found: potential.region().to_string(),
            });
        }
        let n = region.num_sites();
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        let mut neighbors = vec![Vec::with_capacity(4); n];
        for (i, x) in region.sites().enumerate() {
            entries[i * n + i] = Complex64::new(4.0, 0.0);
            for y in region.neighbors(x) {
                let j = region.index(y).expect("neighbour inside box");
                let a = Arrow::new(x, y)?;
                let phase = potential.get(a).expect("arrow inside box").value();
                entries[i * n + j] = match fault {
                    AssemblyFault::None => -Complex64::from_polar(1.0, phase),
                    AssemblyFault::BreakAntisymmetry => {
                        let (_, forward) = a.edge();
                        let edge_value = if forward { phase } else { -phase };
                        Complex64::new(-edge_value.cos(), 0.0)
                    }
                };
                neighbors[i].push(j);
            }
        }
        let matrix = Self {
            region: *region,
            entries,
            gauge: None,
            flux: potential.flux_field(),
            neighbors,
        };
        let defect = matrix.hermiticity_defect();
        if defect > 1e-14 {
            return Err(Error::NotHermitian(defect));
        }
        Ok(matrix)
    }

    /// Assembles `H(A)` for `A` built from `flux` in the given gauge.
    pub fn from_flux(flux: &FluxField, gauge: Gauge) -> Result<Self> {
        let potential = VectorPotential::from_flux(flux, gauge);
        let mut h = Self::assemble(flux.region(), &potential)?;
        h.gauge = Some(gauge);
        Ok(h)
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.region.num_sites()
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim() + j]
    }

    pub fn gauge(&self) -> Option<Gauge> {
        self.gauge
    }

    pub fn flux_field(&self) -> &FluxField {
        &self.flux
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for &j in &self.neighbors[i] {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
            worst = worst.max(self.entry(i, i).im.abs());
        }
        worst
    }

    /// `Hψ` using the nearest-neighbour structure.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(psi.len(), n);
        (0..n)
            .map(|i| {
                self.neighbors[i]
                    .iter()
                    .fold(self.entry(i, i) * psi[i], |acc, &j| acc + self.entry(i, j) * psi[j])
            })
            .collect()
    }

    /// `(ψ, Hψ)`.
    pub fn quadratic_form(&self, psi: &[Complex64]) -> f64 {
        self.apply(psi)
            .iter()
            .zip(psi)
            .map(|(hp, p)| (p.conj() * hp).re)
            .sum()
    }

    /// Upper bound on `‖H‖` (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        inertia::norm_bound(&self.entries, self.dim())
    }

    pub fn eigendecompose(&self) -> Result<SpectrumResult> {
        let n = self.dim();
        let (eigenvalues, vectors) = eigen::hermitian_eigen(&self.entries, n)?;
        let mut result = SpectrumResult {
            eigenvalues,
            eigenvectors: Some(vectors),
            max_residual: 0.0,
            degeneracy_tolerance: DEGENERACY_TOLERANCE,
        };
        result.max_residual = (0..n)
            .map(|k| {
                let v = result.eigenvector(k).expect("vectors present");
                let lambda = result.eigenvalues[k];
                self.apply(v)
                    .iter()
                    .zip(v)
                    .map(|(hv, vi)| (hv - lambda * vi).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        Ok(result)
    }

    /// Eigenvalues only, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigen::hermitian_eigenvalues(&self.entries, self.dim())
    }

    /// `Tr χ_{E,η}(H)` for the closed window `[E − η/2, E + η/2]`, from the
    /// inertia of `H − (E ± η/2)`.
    pub fn count_in_window(&self, energy: f64, eta: f64) -> usize {
        inertia::count_in_interval(
            &self.entries,
            self.dim(),
            energy - 0.5 * eta,
            energy + 0.5 * eta,
        )
    }

    pub fn inertia(&self, shift: f64) -> inertia::Inertia {
        inertia::inertia(&self.entries, self.dim(), shift)
    }
}

/// Sorted spectrum with optional orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// Eigenvector `k` occupies `[k·N, (k+1)·N)`; entry `i` is the value at
    /// site index `i`.
    pub eigenvectors: Option<Vec<Complex64>>,
    pub max_residual: f64,
    pub degeneracy_tolerance: f64,
}

impl SpectrumResult {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Self {
        Self {
            eigenvalues,
            eigenvectors: None,
            max_residual: f64::NAN,
            degeneracy_tolerance: DEGENERACY_TOLERANCE,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, k: usize) -> Option<&[Complex64]> {
        let n = self.len();
        self.eigenvectors
            .as_deref()
            .filter(|_| k < n)
            .map(|v| &v[k * n..(k + 1) * n])
    }

    /// Number of eigenvalues in `[E − η/2, E + η/2]`.
    pub fn count_in_window(&self, energy: f64, eta: f64) -> usize {
        let (lo, hi) = (energy - 0.5 * eta, energy + 0.5 * eta);
        let start = self.eigenvalues.partition_point(|x| *x < lo);
        let end = self.eigenvalues.partition_point(|x| *x <= hi);
        end.saturating_sub(start)
    }

    /// Number of eigenvalues `≤ energy`.
    pub fn count_below(&self, energy: f64) -> usize {
        self.eigenvalues.partition_point(|x| *x <= energy)
    }

    /// Index ranges of eigenvalue clusters (gaps below the degeneracy
    /// tolerance).
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.len() {
            if k == self.len()
                || self.eigenvalues[k] - self.eigenvalues[k - 1] >= self.degeneracy_tolerance
            {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// `max |⟨v_a, v_b⟩ − δ_ab|`; quadratic in the number of vectors.
    pub fn orthonormality_defect(&self) -> Option<f64> {
        let n = self.len();
        self.eigenvectors.as_ref()?;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            let va = self.eigenvector(a)?;
            for b in 0..=a {
                let vb = self.eigenvector(b)?;
                let dot: Complex64 = va.iter().zip(vb).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        Some(worst)
    }

    /// CSV rows `(sample_index, k, eigenvalue)`.
    pub fn write_csv<W: Write>(&self, out: W, sample_index: u64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample_index", "k", "eigenvalue"])?;
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            w.serialize((sample_index, k, lambda))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian `f64` pairs `(re, im)`; eigenvector `k` is written as
    /// row `k`, entries in site order.
    pub fn write_eigenvectors<W: Write>(&self, mut out: W) -> Result<()> {
        let vectors = self
            .eigenvectors
            .as_ref()
            .ok_or_else(|| Error::Precondition("spectrum was computed without eigenvectors".into()))?;
        let mut buf = Vec::with_capacity(vectors.len() * 16);
        for z in vectors {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }
}

/// Reads a dump produced by [`SpectrumResult::write_eigenvectors`].
pub fn read_eigenvectors<R: Read>(mut input: R) -> Result<Vec<Complex64>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Precondition(format!(
            "eigenvector dump length {} is not a multiple of 16",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

/// `max_k |λ_k − μ_k|` for two sorted spectra of equal length.
pub fn max_spectral_deviation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Spectra of `H` assembled in all four canonical gauges and after an
/// additional gauge transform `λ`; returns the largest deviation between any
/// of them.
pub fn gauge_invariance_check(
    flux: &FluxField,
    transform: &GaugeFunction,
    fault: AssemblyFault,
) -> Result<f64> {
    let region = flux.region();
    let mut spectra = Vec::with_capacity(5);
    for gauge in Gauge::ALL {
        let potential = VectorPotential::from_flux(flux, gauge);
        spectra.push(HamiltonianMatrix::assemble_with_fault(region, &potential, fault)?.eigenvalues()?);
    }
    let potential = VectorPotential::from_flux(flux, Gauge::default()).gauge_transform(transform)?;
    spectra.push(HamiltonianMatrix::assemble_with_fault(region, &potential, fault)?.eigenvalues()?);
    let mut worst: f64 = 0.0;
    for i in 0..spectra.len() {
        for j in 0..i {
            worst = worst.max(max_spectral_deviation(&spectra[i], &spectra[j]));
        }
    }
    Ok(worst)
}
