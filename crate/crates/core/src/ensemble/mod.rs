//! Monte Carlo experiments over disorder realisations: window counts, the
//! integrated density of states and eigenfunction localisation.
//!
//! Every per-sample quantity is a pure function of the configuration, the
//! box and the sample index, and results are merged in sample order.

pub mod output;
pub mod parallel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::lattice::{BoxRegion, Site};
use crate::operator::{e0, HamiltonianMatrix, SpectrumResult, E_CRIT};
use crate::randomfield::Disorder;
use crate::regularity::{find_square_exploratory, SquareConstants, DEFAULT_EPSILON};
use crate::rng::mix_seed;

pub use parallel::{run_parallel, shard, PartialRun, RunOptions};

/// Shared configuration of the disorder experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(rename = "L_list")]
    pub half_widths: Vec<u32>,
    #[serde(rename = "E_grid")]
    pub energies: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub samples: u64,
    #[serde(rename = "density")]
    pub disorder: Disorder,
    pub master_seed: u64,
    #[serde(rename = "E_star")]
    pub e_star: f64,
    pub worker_count: usize,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_retries() -> usize {
    2
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let b = std::f64::consts::FRAC_PI_4;
        Self {
            half_widths: vec![4, 6, 8, 10],
            energies: linspace(e0(b), 1.1, 12),
            eta_grid: vec![0.02, 0.05, 0.1],
            samples: 200,
            disorder: Disorder::bump(b).expect("π/4 is admissible"),
            master_seed: 0,
            e_star: 1.16,
            worker_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            max_retries: default_retries(),
        }
    }
}

impl ExperimentConfig {
    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            workers: self.worker_count,
            max_retries: self.max_retries,
        }
    }

    /// Checks shared by every experiment.
    pub fn validate(&self) -> Result<()> {
        if self.half_widths.is_empty() || self.half_widths.contains(&0) {
            return Err(Error::InvalidConfig("L_list needs positive half-widths".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be positive".into()));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidConfig("worker_count must be at least 1".into()));
        }
        if !(self.e_star < E_CRIT) {
            return Err(Error::InvalidConfig(format!(
                "E_star = {} must be below E_crit = 4 - sqrt(8) = {E_CRIT}",
                self.e_star
            )));
        }
        Ok(())
    }

    /// Window constraint of the Wegner estimate: `E + η/2 ≤ E*`, or the
    /// mirrored `E − η/2 ≥ 8 − E*`.
    pub fn validate_windows(&self) -> Result<()> {
        self.validate()?;
        if self.energies.is_empty() || self.eta_grid.is_empty() {
            return Err(Error::InvalidConfig("E_grid and eta_grid must be nonempty".into()));
        }
        for &eta in &self.eta_grid {
            if !(eta >= 0.0) {
                return Err(Error::InvalidConfig(format!("eta = {eta} must be nonnegative")));
            }
            for &e in &self.energies {
                let lower = e + 0.5 * eta <= self.e_star;
                let upper = e - 0.5 * eta >= 8.0 - self.e_star;
                if !(lower || upper) {
                    return Err(Error::InvalidConfig(format!(
                        "window violates E + eta/2 <= E_star: E = {e}, eta = {eta}, E_star = {}",
                        self.e_star
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-box seed; experiments sharing a master seed see the same disorder.
    pub fn box_seed(&self, half_width: u32) -> u64 {
        mix_seed(self.master_seed, u64::from(half_width))
    }

    /// The Hamiltonian of sample `index` on `Λ_L`.
    pub fn hamiltonian(&self, half_width: u32, index: u64) -> Result<HamiltonianMatrix> {
        let region = BoxRegion::centered(half_width)?;
        let flux = self
            .disorder
            .sample(&region, self.box_seed(half_width), index)
            .flux_field;
        HamiltonianMatrix::from_flux(&flux, Gauge::default())
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares line `y = a + s x`; returns `(a, s, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (intercept, slope, r2)
}

fn run_samples<T: Send>(
    config: &ExperimentConfig,
    job: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    run_parallel(config.samples, config.run_options(), None, job).map_err(Error::from)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WegnerRow {
    #[serde(rename = "L")]
    pub half_width: u32,
    #[serde(rename = "E")]
    pub energy: f64,
    pub eta: f64,
    pub mean_count: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Fitted exponent of `mean_count ~ L^p` at fixed `(E, η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeExponent {
    #[serde(rename = "E")]
    pub energy: f64,
    pub eta: f64,
    pub exponent: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerTable {
    pub rows: Vec<WegnerRow>,
    /// Smallest `Ĉ` with `mean_count ≤ Ĉ η L⁸` on every row with `η > 0`.
    pub fitted_constant: f64,
    /// Largest `Ĉ η L⁸ / mean_count` over rows with a nonzero mean, the slack
    /// of the bound where it is loosest.
    pub max_slack: Option<f64>,
    pub volume_exponents: Vec<VolumeExponent>,
}

impl WegnerTable {
    pub fn row(&self, half_width: u32, energy: f64, eta: f64) -> Option<&WegnerRow> {
        self.rows
            .iter()
            .find(|r| r.half_width == half_width && r.energy == energy && r.eta == eta)
    }

    /// Ratios of mean counts between consecutive `η` values at fixed `(L, E)`,
    /// with a first-order standard error.
    pub fn eta_ratios(&self, half_width: u32, energy: f64) -> Vec<EtaRatio> {
        let mut rows: Vec<&WegnerRow> = self
            .rows
            .iter()
            .filter(|r| r.half_width == half_width && r.energy == energy && r.eta > 0.0)
            .collect();
        rows.sort_by(|a, b| a.eta.total_cmp(&b.eta));
        rows.windows(2)
            .map(|w| {
                let ratio = w[1].mean_count / w[0].mean_count;
                let rel = ((w[0].stderr / w[0].mean_count).powi(2)
                    + (w[1].stderr / w[1].mean_count).powi(2))
                .sqrt();
                EtaRatio {
                    eta_lo: w[0].eta,
                    eta_hi: w[1].eta,
                    ratio,
                    stderr: ratio * rel,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRatio {
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub ratio: f64,
    pub stderr: f64,
}

/// Mean window counts `E Tr χ_{[E−η/2, E+η/2]}(H_L)` over the ensemble.
pub fn wegner_experiment(config: &ExperimentConfig) -> Result<WegnerTable> {
    config.validate_windows()?;
    let mut rows = Vec::new();
    for &l in &config.half_widths {
        // per sample: counts for every (E, η) pair, E outer
        let counts = run_samples(config, |s| {
            let spectrum = SpectrumResult::from_eigenvalues(config.hamiltonian(l, s)?.eigenvalues()?);
            Ok(config
                .energies
                .iter()
                .flat_map(|&e| config.eta_grid.iter().map(move |&eta| (e, eta)))
                .map(|(e, eta)| spectrum.count_in_window(e, eta) as f64)
                .collect::<Vec<f64>>())
        })?;
        let pairs = config
            .energies
            .iter()
            .flat_map(|&e| config.eta_grid.iter().map(move |&eta| (e, eta)));
        for (j, (e, eta)) in pairs.enumerate() {
            let column: Vec<f64> = counts.iter().map(|c| c[j]).collect();
            let (mean, stderr) = mean_and_stderr(&column);
            rows.push(WegnerRow {
                half_width: l,
                energy: e,
                eta,
                mean_count: mean,
                stderr,
                n: config.samples,
            });
        }
    }

    let volume_bound = |r: &WegnerRow| r.eta * f64::from(r.half_width).powi(8);
    let fitted_constant = rows
        .iter()
        .filter(|r| r.eta > 0.0)
        .map(|r| r.mean_count / volume_bound(r))
        .fold(0.0, f64::max);
    let max_slack = rows
        .iter()
        .filter(|r| r.eta > 0.0 && r.mean_count > 0.0)
        .map(|r| fitted_constant * volume_bound(r) / r.mean_count)
        .reduce(f64::max);

    let mut volume_exponents = Vec::new();
    for &e in &config.energies {
        for &eta in &config.eta_grid {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.energy == e && r.eta == eta && r.mean_count > 0.0)
                .map(|r| (f64::from(r.half_width).ln(), r.mean_count.ln()))
                .unzip();
            if x.len() >= 2 {
                volume_exponents.push(VolumeExponent {
                    energy: e,
                    eta,
                    exponent: linear_fit(&x, &y).1,
                    points: x.len(),
                });
            }
        }
    }
    Ok(WegnerTable {
        rows,
        fitted_constant,
        max_slack,
        volume_exponents,
    })
}

/// Averaged eigenvalue-counting fraction `k̂(E) = #{λ ≤ E} / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsCurve {
    #[serde(rename = "L")]
    pub half_width: u32,
    pub samples: u64,
    #[serde(rename = "E_grid")]
    pub energies: Vec<f64>,
    pub k_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `max_E |k̂_L − k̂_L'|` between the two largest boxes.
    pub drift: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdsRow {
    #[serde(rename = "L")]
    pub half_width: u32,
    #[serde(rename = "E")]
    pub energy: f64,
    pub k_hat: f64,
    pub stderr: f64,
}

impl IdsCurve {
    pub fn rows(&self) -> Vec<IdsRow> {
        self.energies
            .iter()
            .zip(&self.k_hat)
            .zip(&self.stderr)
            .map(|((&energy, &k_hat), &stderr)| IdsRow {
                half_width: self.half_width,
                energy,
                k_hat,
                stderr,
            })
            .collect()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.k_hat.windows(2).all(|w| w[0] <= w[1])
    }

    /// `k̂` at the grid point closest to `energy`.
    pub fn at(&self, energy: f64) -> Option<f64> {
        self.energies
            .iter()
            .zip(&self.k_hat)
            .min_by(|a, b| (a.0 - energy).abs().total_cmp(&(b.0 - energy).abs()))
            .map(|(_, k)| *k)
    }
}

fn ids_for(config: &ExperimentConfig, half_width: u32) -> Result<IdsCurve> {
    let counts = run_samples(config, |s| {
        let spectrum = SpectrumResult::from_eigenvalues(config.hamiltonian(half_width, s)?.eigenvalues()?);
        Ok(config
            .energies
            .iter()
            .map(|&e| spectrum.count_below(e))
            .collect::<Vec<usize>>())
    })?;
    let sites = BoxRegion::centered(half_width)?.num_sites() as f64;
    let (k_hat, stderr) = (0..config.energies.len())
        .map(|j| {
            // mean from the integer total so that a constant field is exact
            let total: usize = counts.iter().map(|c| c[j]).sum();
            let fractions: Vec<f64> = counts.iter().map(|c| c[j] as f64 / sites).collect();
            (total as f64 / (sites * counts.len() as f64), mean_and_stderr(&fractions).1)
        })
        .unzip();
    Ok(IdsCurve {
        half_width,
        samples: config.samples,
        energies: config.energies.clone(),
        k_hat,
        stderr,
        drift: None,
    })
}

/// The counting fraction at the largest box, with its drift from the
/// second-largest.
pub fn ids_estimate(config: &ExperimentConfig) -> Result<IdsCurve> {
    config.validate()?;
    let mut widths = config.half_widths.clone();
    widths.sort_unstable();
    widths.dedup();
    let largest = *widths.last().expect("validated nonempty");
    let mut curve = ids_for(config, largest)?;
    if widths.len() >= 2 {
        let previous = ids_for(config, widths[widths.len() - 2])?;
        curve.drift = Some(
            curve
                .k_hat
                .iter()
                .zip(&previous.k_hat)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    Ok(curve)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LifshitzRow {
    #[serde(rename = "E")]
    pub energy: f64,
    pub e_minus_e0: f64,
    pub k_hat: f64,
    /// `log(−log k̂) / log(E − E₀)`.
    pub ratio: Option<f64>,
    pub skipped: Option<String>,
}

/// The Lifshitz-tail ratio on the grid points above `E₀(b)`. Points where the
/// ratio is undefined are kept with a reason and no value.
pub fn lifshitz_diagnostic(ids: &IdsCurve, b: f64) -> Vec<LifshitzRow> {
    let bottom = e0(b);
    ids.energies
        .iter()
        .zip(&ids.k_hat)
        .filter(|(e, _)| **e > bottom)
        .map(|(&energy, &k_hat)| {
            let gap = energy - bottom;
            let skipped = if k_hat <= 0.0 {
                Some("k_hat = 0")
            } else if k_hat >= 1.0 {
                Some("k_hat = 1")
            } else if gap == 1.0 {
                Some("E - E0 = 1")
            } else {
                None
            };
            LifshitzRow {
                energy,
                e_minus_e0: gap,
                k_hat,
                ratio: skipped.is_none().then(|| (-k_hat.ln()).ln() / gap.ln()),
                skipped: skipped.map(str::to_string),
            }
        })
        .collect()
}

/// Which eigenpairs of each sample enter the localisation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSelection {
    /// The `count` lowest eigenpairs.
    Lowest { count: usize },
    /// Eigenpairs with `E₀ ≤ E ≤ E₀ + width`.
    Window { width: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    #[serde(rename = "L")]
    pub half_width: u32,
    pub sample: u64,
    pub k: usize,
    pub energy: f64,
    /// `−slope` of `log max_{|x−x₀|_∞ = r} |ψ(x)|` against `r`.
    pub decay_rate: Option<f64>,
    pub fit_r2: Option<f64>,
    pub ipr: f64,
    pub shells: usize,
}

/// Shell profile and participation of one normalised eigenvector.
pub fn shell_fit(region: &BoxRegion, psi: &[f64]) -> (Option<f64>, Option<f64>, usize, f64) {
    let (x0, m) = psi
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let x0: Site = region.site(x0);
    let mut shell_max: Vec<f64> = Vec::new();
    for (i, &v) in psi.iter().enumerate() {
        let r = region.site(i).linf_distance(x0) as usize;
        if shell_max.len() <= r {
            shell_max.resize(r + 1, 0.0);
        }
        shell_max[r] = shell_max[r].max(v);
    }
    let (r, log_m): (Vec<f64>, Vec<f64>) = shell_max
        .iter()
        .enumerate()
        // below this the shell maxima are rounding noise
        .filter(|(_, v)| **v > 1e-13 * m)
        .map(|(r, v)| (r as f64, v.ln()))
        .unzip();
    let ipr = psi.iter().map(|v| v.powi(4)).sum();
    if r.len() < 4 {
        return (None, None, r.len(), ipr);
    }
    let (_, slope, r2) = linear_fit(&r, &log_m);
    (Some(-slope), Some(r2), r.len(), ipr)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    #[serde(rename = "L")]
    pub half_width: u32,
    pub states: usize,
    pub mean_ipr: f64,
    pub stderr_ipr: f64,
    /// Fraction of states with a fit, positive decay rate and `r² > 0.9`.
    pub good_fit_fraction: f64,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub rows: Vec<LocalizationRow>,
    pub summaries: Vec<LocalizationSummary>,
}

pub const GOOD_FIT_R2: f64 = 0.9;

pub fn localization_diagnostics(
    config: &ExperimentConfig,
    selection: StateSelection,
) -> Result<LocalizationReport> {
    config.validate()?;
    let bottom = e0(config.disorder.b());
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &l in &config.half_widths {
        let per_sample = run_samples(config, |s| {
            let h = config.hamiltonian(l, s)?;
            let spectrum = h.eigendecompose()?;
            let picked: Vec<usize> = match selection {
                StateSelection::Lowest { count } => (0..count.min(spectrum.len())).collect(),
                StateSelection::Window { width } => (0..spectrum.len())
                    .filter(|&k| {
                        let e = spectrum.eigenvalues[k];
                        e >= bottom && e <= bottom + width
                    })
                    .collect(),
            };
            Ok(picked
                .into_iter()
                .map(|k| {
                    let moduli: Vec<f64> = spectrum
                        .eigenvector(k)
                        .expect("eigenvectors computed")
                        .iter()
                        .map(|z| z.norm())
                        .collect();
                    let (decay_rate, fit_r2, shells, ipr) = shell_fit(h.region(), &moduli);
                    LocalizationRow {
                        half_width: l,
                        sample: s,
                        k,
                        energy: spectrum.eigenvalues[k],
                        decay_rate,
                        fit_r2,
                        ipr,
                        shells,
                    }
                })
                .collect::<Vec<_>>())
        })?;
        let block: Vec<LocalizationRow> = per_sample.into_iter().flatten().collect();
        let iprs: Vec<f64> = block.iter().map(|r| r.ipr).collect();
        let (mean_ipr, stderr_ipr) = if iprs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_and_stderr(&iprs)
        };
        let good = block
            .iter()
            .filter(|r| {
                matches!((r.decay_rate, r.fit_r2), (Some(d), Some(q)) if d > 0.0 && q > GOOD_FIT_R2)
            })
            .count();
        summaries.push(LocalizationSummary {
            half_width: l,
            states: block.len(),
            mean_ipr,
            stderr_ipr,
            good_fit_fraction: good as f64 / block.len().max(1) as f64,
            flagged: block.iter().filter(|r| r.decay_rate.is_none()).count(),
        });
        rows.extend(block);
    }
    Ok(LocalizationReport { rows, summaries })
}

/// Square-search outcome at one threshold `E*`, possibly above `E_crit`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    #[serde(rename = "E_star")]
    pub e_star: f64,
    pub above_critical: bool,
    /// `c(E*)`; negative above `E_crit`, where nothing is certified.
    pub constant: f64,
    pub eigenpairs: usize,
    /// Eigenpairs whose square has `min |ψ| ≥ max(c, 0) M`.
    pub validated: usize,
    /// Smallest observed `min_{x∈Q} |ψ(x)| / M`.
    pub min_ratio: f64,
}

/// Exploratory sweep of the square search over thresholds, including
/// thresholds beyond `E_crit` where the argument gives no constant.
pub fn threshold_sweep(config: &ExperimentConfig, thresholds: &[f64]) -> Result<Vec<ThresholdRow>> {
    let l = *config
        .half_widths
        .first()
        .ok_or_else(|| Error::InvalidConfig("L_list is empty".into()))?;
    let spectra = run_samples(config, |s| config.hamiltonian(l, s)?.eigendecompose())?;
    let region = BoxRegion::centered(l)?;
    thresholds
        .iter()
        .map(|&e_star| {
            let constants = SquareConstants::new(e_star, DEFAULT_EPSILON);
            let mut row = ThresholdRow {
                e_star,
                above_critical: e_star >= E_CRIT,
                constant: constants.case_large.min(constants.case_small),
                eigenpairs: 0,
                validated: 0,
                min_ratio: f64::INFINITY,
            };
            for spectrum in &spectra {
                for k in 0..spectrum.len() {
                    if spectrum.eigenvalues[k] > e_star {
                        break;
                    }
                    let psi = spectrum.eigenvector(k).expect("eigenvectors computed");
                    let cert = find_square_exploratory(&region, psi, e_star, DEFAULT_EPSILON)?;
                    let ratio = cert.min_modulus_on_square / cert.max_modulus;
                    row.eigenpairs += 1;
                    if cert.constructive && ratio >= cert.lower_bound_c.max(0.0) {
                        row.validated += 1;
                    }
                    row.min_ratio = row.min_ratio.min(ratio);
                }
            }
            Ok(row)
        })
        .collect()
}

/// Used by the particle–hole check: the same windows reflected about 4.
pub fn mirrored(config: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        energies: config.energies.iter().map(|e| 8.0 - e).collect(),
        ..config.clone()
    }
}
