//! Exact-enumeration simulation at small `N`.
//!
//! All `b^N` configurations are visited in a fixed order, streaming the
//! per-index disorder lookups instead of materializing an energy array. The
//! last block is traversed in binary-reflected Gray order when `b = 2`, so
//! consecutive configurations differ in one spin and its block sum is
//! updated in place; only indices that contain the last block are looked up
//! again. The visit range is cut into contiguous chunks that are reduced
//! independently and merged in chunk order, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;

use crate::disorder::scaled_binary_mean_rate;
use crate::error::{Error, Result};
use crate::model::{block_partition, sample_disorder, ModelSpec, Realization};
use crate::seed;

pub const DEFAULT_MAX_N: u32 = 28;
pub const HARD_MAX_N: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Enumeration is refused beyond `2^max_n` configurations.
    pub max_n: u32,
    /// Configurations per reduction chunk.
    pub chunk_len: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_n: DEFAULT_MAX_N, chunk_len: 1 << 16 }
    }
}

impl SimOptions {
    pub fn with_max_n(max_n: u32) -> Result<Self> {
        if max_n == 0 || max_n > HARD_MAX_N {
            return Err(Error::Argument(format!("enumeration cap must be in 1..={HARD_MAX_N}, got {max_n}")));
        }
        Ok(SimOptions { max_n, ..Default::default() })
    }

    fn check(&self, branching: u32, n_spins: u32) -> Result<()> {
        let configs = (branching as f64).powi(n_spins as i32);
        if configs > (1u64 << self.max_n) as f64 {
            return Err(Error::EnumerationCap { configs, max_n: self.max_n });
        }
        Ok(())
    }
}

/// Disorder values and block sums of the configuration being visited.
pub struct ConfigView<'a> {
    /// `xi(s, sigma(s))` for every index, in spec order.
    pub xi: &'a [f64],
    /// `sigma_bar_i` per block; all zero when `b != 2`.
    pub block_sums: &'a [i64],
}

struct TermPlan<'a> {
    table: &'a [f64],
    /// `(block, multiplier)` for every block of the index except the last block
    outer: Vec<(usize, u64)>,
    inner_mult: Option<u64>,
}

struct Enumerator<'a> {
    binary: bool,
    sizes: Vec<u32>,
    radices: Vec<u64>,
    terms: Vec<TermPlan<'a>>,
    inner_terms: Vec<usize>,
    total: u64,
}

impl<'a> Enumerator<'a> {
    fn new(spec: &ModelSpec, realization: &'a Realization, opts: &SimOptions) -> Result<Self> {
        realization.check_compatible(spec)?;
        opts.check(spec.branching(), realization.n_spins())?;
        let b = spec.branching() as u64;
        let sizes = realization.partition().sizes().to_vec();
        let radices: Vec<u64> = sizes.iter().map(|&k| b.pow(k)).collect();
        let last = sizes.len() - 1;
        let mut terms = Vec::new();
        let mut inner_terms = Vec::new();
        for (i, t) in spec.terms().iter().enumerate() {
            let blocks = t.blocks();
            let mut outer = Vec::new();
            let mut inner_mult = None;
            for (pos, &j) in blocks.iter().enumerate() {
                let mult: u64 = blocks[pos + 1..].iter().map(|&l| radices[l]).product();
                if j == last {
                    inner_mult = Some(mult);
                } else {
                    outer.push((j, mult));
                }
            }
            if inner_mult.is_some() {
                inner_terms.push(i);
            }
            terms.push(TermPlan { table: realization.table(i), outer, inner_mult });
        }
        Ok(Enumerator {
            binary: spec.branching() == 2,
            total: radices.iter().product(),
            sizes,
            radices,
            terms,
            inner_terms,
        })
    }

    fn visit_range<A, F: Fn(&mut A, &ConfigView)>(&self, start: u64, end: u64, acc: &mut A, f: &F) {
        let nb = self.sizes.len();
        let last = nb - 1;
        let inner_radix = self.radices[last];
        let k_last = self.sizes[last] as i64;
        let mut values = vec![0u64; nb];
        let mut xi = vec![0.0; self.terms.len()];
        let mut base = vec![0u64; self.terms.len()];
        let mut sums = vec![0i64; nb];
        let mut c = start;
        while c < end {
            let outer = c / inner_radix;
            let t0 = c % inner_radix;
            let t1 = inner_radix.min(t0 + (end - c));
            let mut rest = outer;
            for j in (0..last).rev() {
                values[j] = rest % self.radices[j];
                rest /= self.radices[j];
            }
            for (s, plan) in self.terms.iter().enumerate() {
                let key: u64 = plan.outer.iter().map(|&(j, m)| values[j] * m).sum();
                base[s] = key;
                if plan.inner_mult.is_none() {
                    xi[s] = plan.table[key as usize];
                }
            }
            let mut inner = if self.binary { t0 ^ (t0 >> 1) } else { t0 };
            if self.binary {
                for j in 0..last {
                    sums[j] = self.sizes[j] as i64 - 2 * values[j].count_ones() as i64;
                }
                sums[last] = k_last - 2 * inner.count_ones() as i64;
            }
            for t in t0..t1 {
                if t > t0 {
                    if self.binary {
                        let bit = t.trailing_zeros();
                        inner ^= 1 << bit;
                        sums[last] += if (inner >> bit) & 1 == 1 { -2 } else { 2 };
                    } else {
                        inner = t;
                    }
                }
                for &s in &self.inner_terms {
                    let plan = &self.terms[s];
                    let key = base[s] + inner * plan.inner_mult.unwrap_or(0);
                    xi[s] = plan.table[key as usize];
                }
                f(acc, &ConfigView { xi: &xi, block_sums: &sums });
            }
            c += t1 - t0;
        }
    }

    /// Per-chunk accumulators in chunk order.
    fn chunks<A, I, F>(&self, chunk_len: u64, init: I, f: F) -> Vec<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &ConfigView) + Sync,
    {
        let len = chunk_len.max(1);
        let n_chunks = self.total.div_ceil(len);
        (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let start = ci * len;
                let end = self.total.min(start + len);
                let mut acc = init();
                self.visit_range(start, end, &mut acc, &f);
                acc
            })
            .collect()
    }
}

/// Calls `f` on every configuration in visit order (single-threaded).
pub fn for_each_configuration<F>(spec: &ModelSpec, realization: &Realization, opts: &SimOptions, mut f: F) -> Result<()>
where
    F: FnMut(&ConfigView),
{
    let e = Enumerator::new(spec, realization, opts)?;
    let cell = std::cell::RefCell::new(&mut f);
    e.visit_range(0, e.total, &mut (), &|_, v| (cell.borrow_mut())(v));
    Ok(())
}

/// Energy of the visited configuration; matches [`crate::model::hamiltonian`].
#[inline]
fn energy(view: &ConfigView, weights: &[f64], n_spins: f64, field: Option<f64>) -> f64 {
    let mut lin = 0.0;
    for (w, x) in weights.iter().zip(view.xi) {
        lin += w * x;
    }
    let mut e = n_spins * lin;
    if let Some(h) = field {
        let total: i64 = view.block_sums.iter().sum();
        e += h * total as f64;
    }
    e
}

/// Running `(max, sum exp(x - max))`.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    const EMPTY: LogSumExp = LogSumExp { max: f64::NEG_INFINITY, sum: 0.0 };

    #[inline]
    fn push(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn merge(self, other: LogSumExp) -> LogSumExp {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        let m = self.max.max(other.max);
        LogSumExp { max: m, sum: self.sum * (self.max - m).exp() + other.sum * (other.max - m).exp() }
    }

    fn value(self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// `log Z_N(beta)` for several inverse temperatures in one pass.
pub fn log_partition_multi(
    spec: &ModelSpec,
    realization: &Realization,
    betas: &[f64],
    opts: &SimOptions,
) -> Result<Vec<f64>> {
    if let Some(b) = betas.iter().find(|b| !b.is_finite()) {
        return Err(Error::Argument(format!("beta must be finite, got {b}")));
    }
    let e = Enumerator::new(spec, realization, opts)?;
    let n = realization.n_spins() as f64;
    let exact = n * (spec.branching() as f64).ln();
    let active: Vec<f64> = betas.iter().copied().filter(|&b| b != 0.0).collect();
    let mut merged = vec![LogSumExp::EMPTY; active.len()];
    if !active.is_empty() {
        let weights: Vec<f64> = spec.terms().iter().map(|t| t.weight()).collect();
        let field = spec.has_magnetizations().then(|| spec.field());
        let parts = e.chunks(
            opts.chunk_len,
            || vec![LogSumExp::EMPTY; active.len()],
            |acc, view| {
                let h = energy(view, &weights, n, field);
                for (a, &beta) in acc.iter_mut().zip(&active) {
                    a.push(-beta * h);
                }
            },
        );
        for part in parts {
            for (m, p) in merged.iter_mut().zip(part) {
                *m = m.merge(p);
            }
        }
    }
    let mut it = merged.into_iter();
    Ok(betas
        .iter()
        .map(|&b| if b == 0.0 { exact } else { it.next().expect("one per active beta").value() })
        .collect())
}

/// `log sum_sigma exp(-beta H_N(sigma))` by exact enumeration with a
/// max-shift. At `beta = 0` this is `N log b`.
pub fn log_partition(spec: &ModelSpec, realization: &Realization, beta: f64, opts: &SimOptions) -> Result<f64> {
    Ok(log_partition_multi(spec, realization, &[beta], opts)?[0])
}

/// Smallest energy over all configurations.
pub fn min_energy(spec: &ModelSpec, realization: &Realization, opts: &SimOptions) -> Result<f64> {
    let e = Enumerator::new(spec, realization, opts)?;
    let n = realization.n_spins() as f64;
    let weights: Vec<f64> = spec.terms().iter().map(|t| t.weight()).collect();
    let field = spec.has_magnetizations().then(|| spec.field());
    let parts = e.chunks(opts.chunk_len, || f64::INFINITY, |m, v| *m = m.min(energy(v, &weights, n, field)));
    Ok(parts.into_iter().fold(f64::INFINITY, f64::min))
}

/// One finite-size free-energy value `(1/N) log Z_N(beta)` for one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergySample {
    pub n_spins: u32,
    pub beta: f64,
    pub seed: u64,
    pub value: f64,
}

/// Disorder average over replicas at fixed `(N, beta)`. A single replica
/// reports zero standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub n_spins: u32,
    pub beta: f64,
    pub mean: f64,
    pub stderr: f64,
    pub samples: Vec<FreeEnergySample>,
}

fn summarize(n_spins: u32, beta: f64, samples: Vec<FreeEnergySample>) -> McEstimate {
    // Welford: identical samples reproduce the value exactly with zero spread
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, s) in samples.iter().enumerate() {
        let d = s.value - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (s.value - mean);
    }
    let r = samples.len() as f64;
    let var = if samples.len() > 1 { m2 / (r - 1.0) } else { 0.0 };
    McEstimate { n_spins, beta, mean, stderr: (var / r).sqrt(), samples }
}

/// Monte-Carlo disorder averages of `(1/N) log Z_N` at several `beta`, sharing
/// each replica's realization across temperatures. Replica `r` uses seed
/// [`seed::replica_seed`]`(seed, r)`.
pub fn free_energy_mc_multi(
    spec: &ModelSpec,
    n_spins: u32,
    betas: &[f64],
    replicas: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<McEstimate>> {
    if replicas == 0 {
        return Err(Error::Argument("at least one replica is needed".into()));
    }
    opts.check(spec.branching(), n_spins)?;
    let ln_b = (spec.branching() as f64).ln();
    let n = n_spins as f64;
    let mut per_beta: Vec<Vec<FreeEnergySample>> = vec![Vec::with_capacity(replicas); betas.len()];
    for r in 0..replicas {
        let rs = seed::replica_seed(seed, r as u64);
        let realization = sample_disorder(spec, n_spins, rs)?;
        let logs = log_partition_multi(spec, &realization, betas, opts)?;
        for ((out, &beta), lz) in per_beta.iter_mut().zip(betas).zip(logs) {
            let value = if beta == 0.0 { ln_b } else { lz / n };
            out.push(FreeEnergySample { n_spins, beta, seed: rs, value });
        }
    }
    Ok(betas.iter().zip(per_beta).map(|(&beta, s)| summarize(n_spins, beta, s)).collect())
}

pub fn free_energy_mc(
    spec: &ModelSpec,
    n_spins: u32,
    beta: f64,
    replicas: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<McEstimate> {
    Ok(free_energy_mc_multi(spec, n_spins, &[beta], replicas, seed, opts)?.remove(0))
}

/// Product of closed intervals over the coordinate space `R^S x R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordBox {
    intervals: Vec<(f64, f64)>,
}

impl CoordBox {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Argument("a box needs at least one interval".into()));
        }
        for &(a, b) in &intervals {
            if a.is_nan() || b.is_nan() || a > b {
                return Err(Error::Argument(format!("invalid interval [{a}, {b}]")));
            }
        }
        Ok(CoordBox { intervals })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    /// The whole space of the given dimension.
    pub fn full(dim: usize) -> Self {
        CoordBox { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY); dim] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim() && self.intervals.iter().zip(point).all(|(&(a, b), &x)| a <= x && x <= b)
    }

    fn check_dim(&self, spec: &ModelSpec) -> Result<()> {
        let expected = spec.coordinate_dim();
        if self.dim() != expected {
            return Err(Error::Dimension { expected, got: self.dim() });
        }
        Ok(())
    }
}

impl std::fmt::Display for CoordBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (a, b)) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{a},{b}]")?;
        }
        Ok(())
    }
}

/// Empirical mass `mu_N(box)`: the fraction of configurations whose
/// coordinate vector lies in the box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCount {
    pub region: CoordBox,
    pub n_spins: u32,
    pub count: u64,
    pub mass: f64,
}

/// Masses of several boxes in a single enumeration pass.
pub fn empirical_box_masses(
    spec: &ModelSpec,
    realization: &Realization,
    boxes: &[CoordBox],
    opts: &SimOptions,
) -> Result<Vec<BoxCount>> {
    for b in boxes {
        b.check_dim(spec)?;
    }
    let e = Enumerator::new(spec, realization, opts)?;
    let n = realization.n_spins() as f64;
    let m = spec.terms().len();
    let mags = spec.has_magnetizations();
    let parts = e.chunks(
        opts.chunk_len,
        || vec![0u64; boxes.len()],
        |acc, view| {
            for (count, bx) in acc.iter_mut().zip(boxes) {
                let iv = bx.intervals();
                let inside = view.xi.iter().zip(&iv[..m]).all(|(&x, &(a, b))| a <= x && x <= b)
                    && (!mags
                        || view
                            .block_sums
                            .iter()
                            .zip(&iv[m..])
                            .all(|(&s, &(a, b))| {
                                let y = s as f64 / n;
                                a <= y && y <= b
                            }));
                if inside {
                    *count += 1;
                }
            }
        },
    );
    let mut counts = vec![0u64; boxes.len()];
    for part in parts {
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    let total = e.total as f64;
    Ok(boxes
        .iter()
        .zip(counts)
        .map(|(bx, count)| BoxCount { region: bx.clone(), n_spins: realization.n_spins(), count, mass: count as f64 / total })
        .collect())
}

pub fn empirical_box_mass(
    spec: &ModelSpec,
    realization: &Realization,
    region: &CoordBox,
    opts: &SimOptions,
) -> Result<BoxCount> {
    Ok(empirical_box_masses(spec, realization, std::slice::from_ref(region), opts)?.remove(0))
}

/// `(1/N) log mu_N(box)`, with an explicit marker for empty boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogMass {
    Empty,
    Finite(f64),
}

impl LogMass {
    pub fn from_mass(mass: f64, n_spins: u32) -> Self {
        if mass > 0.0 {
            LogMass::Finite(mass.ln() / n_spins as f64)
        } else {
            LogMass::Empty
        }
    }

    pub fn is_empty(self) -> bool {
        matches!(self, LogMass::Empty)
    }
}

impl std::fmt::Display for LogMass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogMass::Empty => write!(f, "-inf"),
            LogMass::Finite(v) => write!(f, "{v:.16e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxRatePoint {
    pub n_spins: u32,
    pub mass: f64,
    pub log_rate: LogMass,
}

fn check_increasing(n_list: &[u32]) -> Result<()> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("N list must be non-empty and strictly increasing".into()));
    }
    Ok(())
}

/// One realization per `N` (all from `seed`), and the box's empirical rate.
pub fn box_rate_trajectory(
    spec: &ModelSpec,
    region: &CoordBox,
    n_list: &[u32],
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<BoxRatePoint>> {
    check_increasing(n_list)?;
    region.check_dim(spec)?;
    n_list
        .iter()
        .map(|&n| {
            let realization = sample_disorder(spec, n, seed)?;
            let bc = empirical_box_mass(spec, &realization, region, opts)?;
            Ok(BoxRatePoint { n_spins: n, mass: bc.mass, log_rate: LogMass::from_mass(bc.mass, n) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The box is eventually empty.
    Extinct,
    /// The empirical mass tracks `lambda_N(box)`.
    Concentrated,
    Indeterminate,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Extinct => "extinct",
            Regime::Concentrated => "concentrated",
            Regime::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyRow {
    pub n_spins: u32,
    /// `log c_N`, the log of the expected number of configurations in the box
    /// for the most restrictive block subset (`-inf` on underflow).
    pub log_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dichotomy {
    pub rows: Vec<DichotomyRow>,
    pub regime: Regime,
    /// Limit of `(1/N) log mu_N(box)` implied by the regime: `-inf_box J` when
    /// concentrated, empty when extinct, unknown when indeterminate.
    pub predicted_rate: Option<LogMass>,
}

/// Log of `P(sigma_bar / N in [a, b])` for a block of `k` fair spins.
fn ln_block_mean_prob(k: u32, n_spins: u32, a: f64, b: f64) -> f64 {
    let nf = n_spins as f64;
    let mut binom = 1.0f64;
    let mut total = 0.0;
    for m in 0..=k {
        if m > 0 {
            binom = binom * (k - m + 1) as f64 / m as f64;
        }
        let y = (k as f64 - 2.0 * m as f64) / nf;
        if a <= y && y <= b {
            total += binom;
        }
    }
    if total == 0.0 {
        f64::NEG_INFINITY
    } else {
        total.ln() - k as f64 * std::f64::consts::LN_2
    }
}

fn y_rate_inf(p: f64, a: f64, b: f64) -> f64 {
    let (a, b) = (a.max(-p), b.min(p));
    if a > b {
        f64::INFINITY
    } else if a <= 0.0 && b >= 0.0 {
        0.0
    } else if a > 0.0 {
        scaled_binary_mean_rate(p, a)
    } else {
        scaled_binary_mean_rate(p, b)
    }
}

fn y_rate_sup(p: f64, a: f64, b: f64) -> f64 {
    let (a, b) = (a.max(-p), b.min(p));
    if a > b {
        f64::INFINITY
    } else {
        scaled_binary_mean_rate(p, a).max(scaled_binary_mean_rate(p, b))
    }
}

/// Extinction/concentration prediction for a box.
///
/// For each `N` the expected count `c_N = min_A b^{k(A,N)} prod_{s in S_A}
/// lambda^s_N(box_s)` (with the exact block-magnetization probabilities for
/// the `y` coordinates) is computed over all nonempty block subsets `A`.
/// The box is predicted extinct when `c_N` decays along `n_list` and the
/// rates on the box exceed some subset's capacity; concentrated when `c_N`
/// grows and every subset's rates stay strictly below capacity on the
/// closed box; indeterminate otherwise, in particular for boxes that touch
/// the level set where a constraint is tight.
pub fn dichotomy_diagnostic(spec: &ModelSpec, region: &CoordBox, n_list: &[u32]) -> Result<Dichotomy> {
    check_increasing(n_list)?;
    region.check_dim(spec)?;
    let nb = spec.n_blocks();
    let m = spec.terms().len();
    let iv = region.intervals();
    let ln_b = (spec.branching() as f64).ln();
    let p = spec.proportions();

    let masks: Vec<u32> = spec.terms().iter().map(|t| t.mask()).collect();
    let x_inf: Vec<f64> = spec.terms().iter().zip(iv).map(|(t, &(a, b))| t.family().rate_inf(a, b)).collect();
    let x_sup: Vec<f64> = spec.terms().iter().zip(iv).map(|(t, &(a, b))| t.family().rate_sup(a, b)).collect();
    let mags = spec.has_magnetizations();
    let (y_inf, y_sup): (Vec<f64>, Vec<f64>) = if mags {
        (0..nb).map(|i| (y_rate_inf(p[i], iv[m + i].0, iv[m + i].1), y_rate_sup(p[i], iv[m + i].0, iv[m + i].1))).unzip()
    } else {
        (vec![0.0; nb], vec![0.0; nb])
    };

    let mut any_over = false;
    let mut all_under = true;
    let mut infimum = 0.0;
    for a_mask in 1u32..(1 << nb) {
        let cap = spec.capacity(a_mask);
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (s, &ms) in masks.iter().enumerate() {
            if ms & !a_mask == 0 {
                lo += x_inf[s];
                hi += x_sup[s];
            }
        }
        for i in (0..nb).filter(|i| a_mask & (1 << i) != 0) {
            lo += y_inf[i];
            hi += y_sup[i];
        }
        any_over |= lo > cap;
        all_under &= hi < cap;
        if a_mask == (1 << nb) - 1 {
            infimum = lo;
        }
    }

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let part = block_partition(spec, n)?;
        let ln_lambda: Vec<f64> = spec
            .terms()
            .iter()
            .zip(iv)
            .map(|(t, &(a, b))| t.family().interval_prob(n, a, b).ln())
            .collect();
        let ln_alpha: Vec<f64> = if mags {
            (0..nb).map(|i| ln_block_mean_prob(part.sizes()[i], n, iv[m + i].0, iv[m + i].1)).collect()
        } else {
            vec![0.0; nb]
        };
        let mut worst = f64::INFINITY;
        for a_mask in 1u32..(1 << nb) {
            let mut v = part.size_of(a_mask) as f64 * ln_b;
            for (s, &ms) in masks.iter().enumerate() {
                if ms & !a_mask == 0 {
                    v += ln_lambda[s];
                }
            }
            for i in (0..nb).filter(|i| a_mask & (1 << i) != 0) {
                v += ln_alpha[i];
            }
            worst = worst.min(v);
        }
        rows.push(DichotomyRow { n_spins: n, log_count: worst });
    }

    let trend = count_trend(&rows);
    let regime = match trend {
        Some(t) if t < 0.0 && any_over => Regime::Extinct,
        Some(t) if t > 0.0 && all_under => Regime::Concentrated,
        _ => Regime::Indeterminate,
    };
    let predicted_rate = match regime {
        Regime::Extinct => Some(LogMass::Empty),
        Regime::Concentrated => Some(LogMass::Finite(-infimum)),
        Regime::Indeterminate => None,
    };
    Ok(Dichotomy { rows, regime, predicted_rate })
}

/// Least-squares slope of `log c_N` against `N`; `-inf` entries count as
/// decay when they come last. `None` when there is no usable trend.
fn count_trend(rows: &[DichotomyRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let last = rows.last().expect("non-empty").log_count;
    if last == f64::NEG_INFINITY {
        return Some(-f64::INFINITY);
    }
    if rows.iter().any(|r| !r.log_count.is_finite()) {
        return None;
    }
    let k = rows.len() as f64;
    let mx = rows.iter().map(|r| r.n_spins as f64).sum::<f64>() / k;
    let my = rows.iter().map(|r| r.log_count).sum::<f64>() / k;
    let sxy: f64 = rows.iter().map(|r| (r.n_spins as f64 - mx) * (r.log_count - my)).sum();
    let sxx: f64 = rows.iter().map(|r| (r.n_spins as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    const FLAT: f64 = 1e-3;
    if slope.abs() < FLAT {
        None
    } else {
        Some(slope)
    }
}
