//! Monte Carlo and shifted rank-1 lattice baselines with a shared
//! replicate-based error estimate.
//!
//! Both estimators produce S independent replicates; the relative error
//! is the replicate standard deviation divided by the replicate mean.
//! Replicate sums run in a fixed pairwise order so results are
//! reproducible for a given seed regardless of chunking.

use crate::error::{CrossError, Result};
use crate::Scalar;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

/// Sums in a fixed pairwise order: halve until blocks of at most eight
/// values, then add left to right.
pub fn pairwise_sum(values: &[Scalar]) -> Scalar {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// A batch of independent replicate estimates with summary statistics.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateBatch {
    /// One estimate per replicate, in replicate order.
    pub estimates: Vec<Scalar>,
    /// Pairwise mean of the replicates.
    pub mean: Scalar,
    /// Sample standard deviation over the mean, or the absolute standard
    /// deviation when the mean is exactly zero.
    pub rel_std: Scalar,
    /// True when the mean was zero and `rel_std` is absolute.
    pub std_is_absolute: bool,
    /// Integrand evaluations per replicate.
    pub n_eval_per_estimate: u64,
}

/// Mean, relative (or absolute, flagged) sample standard deviation.
pub fn std_estimate(estimates: &[Scalar]) -> Result<(Scalar, Scalar, bool)> {
    if estimates.len() < 2 {
        return Err(CrossError::invalid(
            "error estimation needs at least two replicates",
        ));
    }
    let s = estimates.len() as Scalar;
    let mean = pairwise_sum(estimates) / s;
    let squares: Vec<Scalar> = estimates.iter().map(|e| (e - mean) * (e - mean)).collect();
    let std = (pairwise_sum(&squares) / (s - 1.0)).sqrt();
    if mean == 0.0 {
        Ok((mean, std, true))
    } else {
        Ok((mean, std / mean.abs(), false))
    }
}

fn batch_from(estimates: Vec<Scalar>, n_eval_per_estimate: u64) -> Result<EstimateBatch> {
    let (mean, rel_std, std_is_absolute) = std_estimate(&estimates)?;
    Ok(EstimateBatch {
        estimates,
        mean,
        rel_std,
        std_is_absolute,
        n_eval_per_estimate,
    })
}

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn mc_replicate<F>(f: &F, d: usize, n: u64, rng: &mut ChaCha8Rng) -> Scalar
where
    F: Fn(&[Scalar]) -> Scalar + ?Sized,
{
    let mut x = vec![0.0; d];
    let mut values = Vec::with_capacity(n as usize);
    for _ in 0..n {
        for xi in &mut x {
            *xi = rng.random::<f64>();
        }
        values.push(f(&x));
    }
    pairwise_sum(&values) / n as Scalar
}

/// One Monte Carlo estimate of the mean of `f` over [0,1]^d from N
/// uniform points.
pub fn mc_integrate<F>(f: &F, d: usize, n: u64, seed: u64) -> Result<Scalar>
where
    F: Fn(&[Scalar]) -> Scalar + ?Sized,
{
    if d == 0 || n == 0 {
        return Err(CrossError::invalid(
            "Monte Carlo needs d >= 1 and at least one point",
        ));
    }
    Ok(mc_replicate(f, d, n, &mut replicate_rng(seed, 0)))
}

/// S independent Monte Carlo replicates, one RNG stream per replicate.
pub fn mc_batch<F>(f: &F, d: usize, n: u64, replicates: u64, seed: u64) -> Result<EstimateBatch>
where
    F: Fn(&[Scalar]) -> Scalar + ?Sized,
{
    if d == 0 || n == 0 {
        return Err(CrossError::invalid(
            "Monte Carlo needs d >= 1 and at least one point",
        ));
    }
    let estimates: Vec<Scalar> = (0..replicates)
        .map(|rep| mc_replicate(f, d, n, &mut replicate_rng(seed, rep)))
        .collect();
    batch_from(estimates, n)
}

/// Generating vector of a rank-1 lattice rule, with the point count it
/// was designed for when known.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeRule {
    q: Vec<u64>,
    n_design: Option<u64>,
}

impl LatticeRule {
    pub fn new(q: Vec<u64>, n_design: Option<u64>) -> Result<Self> {
        if q.is_empty() {
            return Err(CrossError::invalid("lattice rule needs at least one component"));
        }
        if q.contains(&0) {
            return Err(CrossError::invalid("lattice components must be positive"));
        }
        Ok(LatticeRule { q, n_design })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn n_design(&self) -> Option<u64> {
        self.n_design
    }

    pub fn components(&self) -> &[u64] {
        &self.q
    }

    /// The first d components, for integrating in a lower dimension.
    pub fn for_dim(&self, d: usize) -> Result<&[u64]> {
        if d == 0 || d > self.q.len() {
            return Err(CrossError::invalid(format!(
                "lattice rule has {} components, cannot serve dimension {d}",
                self.q.len()
            )));
        }
        Ok(&self.q[..d])
    }

    /// Reads a rule from a text file: an optional first line
    /// `# dim=<D> n=<N>`, then one positive integer component per line.
    /// Blank lines are ignored; parse errors carry 1-based line numbers.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut q = Vec::new();
        let mut n_design = None;
        let mut dim_header = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if lineno != 1 {
                    return Err(CrossError::LatticeFile(format!(
                        "line {lineno}: only line 1 may be a header"
                    )));
                }
                for token in header.split_whitespace() {
                    let (key, value) = token.split_once('=').ok_or_else(|| {
                        CrossError::LatticeFile(format!(
                            "line 1: malformed header token {token:?}"
                        ))
                    })?;
                    let parsed: u64 = value.parse().map_err(|_| {
                        CrossError::LatticeFile(format!(
                            "line 1: header value {value:?} is not an integer"
                        ))
                    })?;
                    match key {
                        "dim" => dim_header = Some(parsed),
                        "n" => n_design = Some(parsed),
                        other => {
                            return Err(CrossError::LatticeFile(format!(
                                "line 1: unknown header key {other:?}"
                            )));
                        }
                    }
                }
                continue;
            }
            let component: u64 = line.parse().map_err(|_| {
                CrossError::LatticeFile(format!(
                    "line {lineno}: {line:?} is not a positive integer"
                ))
            })?;
            if component == 0 {
                return Err(CrossError::LatticeFile(format!(
                    "line {lineno}: components must be positive"
                )));
            }
            q.push(component);
        }
        if let Some(dh) = dim_header {
            if dh as usize != q.len() {
                return Err(CrossError::LatticeFile(format!(
                    "header says dim={dh} but the file holds {} components",
                    q.len()
                )));
            }
        }
        LatticeRule::new(q, n_design)
    }
}

/// The N shifted lattice points for one replicate, streamed one at a
/// time. Point i has coordinates frac((i q_k mod N)/N + s_k).
pub struct QmcPoints<'a> {
    q: &'a [u64],
    shift: Vec<Scalar>,
    n: u64,
    i: u64,
}

impl Iterator for QmcPoints<'_> {
    type Item = Vec<Scalar>;

    fn next(&mut self) -> Option<Vec<Scalar>> {
        if self.i == self.n {
            return None;
        }
        self.i += 1;
        let i = self.i;
        let point = self
            .q
            .iter()
            .zip(&self.shift)
            .map(|(&qk, &sk)| {
                let base = ((i as u128 * qk as u128) % self.n as u128) as Scalar / self.n as Scalar;
                let x = base + sk;
                if x >= 1.0 {
                    x - 1.0
                } else {
                    x
                }
            })
            .collect();
        Some(point)
    }
}

/// Streams the N points of the shifted rank-1 lattice rule in dimension
/// d. The shift must have one coordinate in [0,1) per dimension.
pub fn qmc_points<'a>(
    rule: &'a LatticeRule,
    d: usize,
    n: u64,
    shift: &[Scalar],
) -> Result<QmcPoints<'a>> {
    if n == 0 {
        return Err(CrossError::invalid("lattice rule needs at least one point"));
    }
    if shift.len() != d {
        return Err(CrossError::invalid(format!(
            "shift has {} coordinates, expected {d}",
            shift.len()
        )));
    }
    if shift.iter().any(|s| !(0.0..1.0).contains(s)) {
        return Err(CrossError::invalid("shift coordinates must lie in [0,1)"));
    }
    Ok(QmcPoints {
        q: rule.for_dim(d)?,
        shift: shift.to_vec(),
        n,
        i: 0,
    })
}

/// S randomly shifted replicates of the N-point lattice rule, one RNG
/// stream per replicate for the shifts.
pub fn qmc_integrate<F>(
    f: &F,
    rule: &LatticeRule,
    d: usize,
    n: u64,
    replicates: u64,
    seed: u64,
) -> Result<EstimateBatch>
where
    F: Fn(&[Scalar]) -> Scalar + ?Sized,
{
    let mut estimates = Vec::with_capacity(replicates as usize);
    for rep in 0..replicates {
        let mut rng = replicate_rng(seed, rep);
        let shift: Vec<Scalar> = (0..d).map(|_| rng.random::<f64>()).collect();
        let values: Vec<Scalar> = qmc_points(rule, d, n, &shift)?.map(|x| f(&x)).collect();
        estimates.push(pairwise_sum(&values) / n as Scalar);
    }
    batch_from(estimates, n)
}

/// Least-squares slope and intercept of ln(y) against ln(x).
pub fn fit_loglog(xs: &[Scalar], ys: &[Scalar]) -> Result<(Scalar, Scalar)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CrossError::invalid(
            "log-log fit needs two equal-length samples of at least two points",
        ));
    }
    if xs.iter().chain(ys).any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(CrossError::invalid(
            "log-log fit needs positive finite coordinates",
        ));
    }
    let lx: Vec<Scalar> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<Scalar> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as Scalar;
    let mx = pairwise_sum(&lx) / m;
    let my = pairwise_sum(&ly) / m;
    let sxx: Vec<Scalar> = lx.iter().map(|x| (x - mx) * (x - mx)).collect();
    let sxy: Vec<Scalar> = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).collect();
    let denom = pairwise_sum(&sxx);
    if denom == 0.0 {
        return Err(CrossError::invalid(
            "log-log fit needs at least two distinct abscissas",
        ));
    }
    let slope = pairwise_sum(&sxy) / denom;
    Ok((slope, my - slope * mx))
}
