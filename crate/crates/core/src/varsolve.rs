//! Limiting rate functions, their supports and the variational free energy
//!
//! ```text
//! f(beta) = log b + sup_{z in Supp J} { -beta L(z) - sum of rates(z) },
//! L(z) = sum_s a_s x_s + h sum_i y_i.
//! ```
//!
//! A point `z = (x_S, y_I)` lies in the support when, for every nonempty
//! block subset `A`,
//!
//! ```text
//! sum_{s : set(s) ⊆ A} I_s(x_s) + sum_{i in A} p_i I0(y_i / p_i) <= (sum_{i in A} p_i) log b.
//! ```
//!
//! For GREM chains these reduce to the prefix constraints and for the REM to
//! the single constraint `I(x) <= log b`.

use rayon::prelude::*;

use crate::disorder::{scaled_binary_mean_rate, FamilyKind};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Variant};
use crate::sim::{free_energy_mc_multi, SimOptions};

/// Largest number of free coordinates the grid solver accepts.
pub const MAX_ACTIVE: usize = 12;
/// Upper bound on the points of the initial grid.
const MAX_GRID_POINTS: f64 = (1u64 << 22) as f64;
/// Bracketing gives up beyond this distance from the origin.
const BRACKET_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Points per coordinate on the initial grid (reduced in high dimension).
    pub points: usize,
    pub min_step: f64,
    pub max_refinements: u32,
    /// Slack on the sublevel bound while bracketing effective intervals.
    pub margin: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { points: 64, min_step: 1e-6, max_refinements: 20, margin: 1e-6 }
    }
}

impl GridOptions {
    pub fn with_min_step(min_step: f64) -> Result<Self> {
        if !(min_step > 0.0 && min_step.is_finite()) {
            return Err(Error::Argument(format!("grid step must be positive and finite, got {min_step}")));
        }
        Ok(GridOptions { min_step, ..Default::default() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Grid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergyResult {
    pub beta: f64,
    pub value: f64,
    /// Maximizer in `R^S x R^n`.
    pub argmax: Vec<f64>,
    pub method: Method,
    /// Final per-coordinate step (0 for closed forms).
    pub step: f64,
    pub refinements: u32,
    /// Whether the maximizer sits on the support boundary, within one step.
    pub on_boundary: bool,
}

fn check_point(spec: &ModelSpec, point: &[f64]) -> Result<()> {
    let expected = spec.coordinate_dim();
    if point.len() != expected {
        return Err(Error::Dimension { expected, got: point.len() });
    }
    if point.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("point has NaN coordinates".into()));
    }
    Ok(())
}

/// Per-coordinate rates; `y` coordinates carry `p_i I0(y_i / p_i)`.
fn coordinate_rates(spec: &ModelSpec, point: &[f64]) -> Vec<f64> {
    let m = spec.terms().len();
    let mut rates: Vec<f64> = spec.terms().iter().zip(point).map(|(t, &x)| t.family().rate(x)).collect();
    if spec.has_magnetizations() {
        rates.extend(spec.proportions().iter().zip(&point[m..]).map(|(&p, &y)| scaled_binary_mean_rate(p, y)));
    }
    rates
}

/// Constraint sums for every block subset, indexed by mask.
fn subset_sums(spec: &ModelSpec, rates: &[f64]) -> Vec<f64> {
    let nb = spec.n_blocks();
    let m = spec.terms().len();
    let mut g = vec![0.0; 1 << nb];
    for (t, &r) in spec.terms().iter().zip(rates) {
        g[t.mask() as usize] += r;
    }
    for (i, &r) in rates[m..].iter().enumerate() {
        g[1 << i] += r;
    }
    // subset-sum transform: g[A] <- sum over B ⊆ A
    for i in 0..nb {
        for a in 0..(1usize << nb) {
            if a & (1 << i) != 0 {
                g[a] += g[a ^ (1 << i)];
            }
        }
    }
    g
}

/// Membership in the support of the rate function.
pub fn support_member(spec: &ModelSpec, point: &[f64]) -> Result<bool> {
    check_point(spec, point)?;
    let rates = coordinate_rates(spec, point);
    if rates.iter().any(|r| r.is_infinite()) {
        return Ok(false);
    }
    let sums = subset_sums(spec, &rates);
    Ok((1..sums.len()).all(|a| sums[a] <= spec.capacity(a as u32)))
}

/// Truncated rate: the sum of component rates on the support, `+inf` off it.
pub fn rate_j(spec: &ModelSpec, point: &[f64]) -> Result<f64> {
    if !support_member(spec, point)? {
        return Ok(f64::INFINITY);
    }
    Ok(coordinate_rates(spec, point).iter().sum())
}

/// `log b + beta^2 / 2` below `sqrt(2 log 2)`, `|beta| sqrt(2 log 2)` above.
pub fn rem_gaussian_closed_form(beta: f64) -> f64 {
    gaussian_rem(beta, std::f64::consts::LN_2).0
}

/// `log 2 * max(1, |beta|)` for the two-sided exponential family.
pub fn rem_exponential_closed_form(beta: f64) -> f64 {
    exponential_rem(beta, std::f64::consts::LN_2).0
}

fn gaussian_rem(c: f64, ln_b: f64) -> (f64, f64, bool) {
    let edge = (2.0 * ln_b).sqrt();
    if c.abs() <= edge {
        (ln_b + 0.5 * c * c, -c, c.abs() == edge)
    } else {
        (c.abs() * edge, -c.signum() * edge, true)
    }
}

fn exponential_rem(c: f64, ln_b: f64) -> (f64, f64, bool) {
    if c.abs() <= 1.0 {
        (ln_b, 0.0, false)
    } else {
        (c.abs() * ln_b, -c.signum() * ln_b, true)
    }
}

/// Closed-form free energy for single-index models with Gaussian or
/// two-sided exponential disorder, any weight and branching number.
pub fn closed_form(spec: &ModelSpec, beta: f64) -> Option<FreeEnergyResult> {
    if spec.variant() != Variant::Rem || !beta.is_finite() {
        return None;
    }
    let term = &spec.terms()[0];
    let c = beta * term.weight();
    let ln_b = (spec.branching() as f64).ln();
    let (value, x, on_boundary) = match term.family().kind() {
        FamilyKind::Gaussian => gaussian_rem(c, ln_b),
        FamilyKind::TwoSidedExp => exponential_rem(c, ln_b),
        FamilyKind::OneSidedWeibull { .. } if c >= 0.0 => (ln_b, 0.0, false),
        _ => return None,
    };
    Some(FreeEnergyResult {
        beta,
        value,
        argmax: vec![x],
        method: Method::ClosedForm,
        step: 0.0,
        refinements: 0,
        on_boundary,
    })
}

/// Free coordinate, parametrized by its rate level `u in [0, umax]`.
///
/// The coordinate sits at `dir * extent(u)`, the farthest point on its
/// half-line whose rate does not exceed `u`. In these variables every
/// support constraint is a linear inequality on the rate levels.
#[derive(Debug, Clone)]
struct Active {
    /// Position in the full coordinate vector.
    coord: usize,
    /// Linear coefficient in the objective (`beta a_s` or `beta h`).
    coef: f64,
    /// Direction in which `-coef * z` grows.
    dir: f64,
    umax: f64,
    /// `extent(umax)`
    tmax: f64,
}

struct Constraint {
    members: Vec<usize>,
    cap: f64,
}

struct Problem<'a> {
    spec: &'a ModelSpec,
    ln_b: f64,
    active: Vec<Active>,
    constraints: Vec<Constraint>,
}

/// One grid point after mapping rate levels back to coordinates.
struct Mapped {
    z: Vec<f64>,
    rates: Vec<f64>,
}

impl Mapped {
    fn new(d: usize) -> Self {
        Mapped { z: vec![0.0; d], rates: vec![0.0; d] }
    }
}

impl Problem<'_> {
    fn coordinate_rate(&self, coord: usize, z: f64) -> f64 {
        let m = self.spec.terms().len();
        if coord < m {
            self.spec.terms()[coord].family().rate(z)
        } else {
            scaled_binary_mean_rate(self.spec.proportions()[coord - m], z)
        }
    }

    /// `sup { t in [0, tmax] : rate(dir t) <= u }`.
    fn extent(&self, a: &Active, u: f64) -> f64 {
        if u >= a.umax {
            return a.tmax;
        }
        let rate = |t: f64| self.coordinate_rate(a.coord, a.dir * t);
        let m = self.spec.terms().len();
        let guess = if a.coord < m {
            match self.spec.terms()[a.coord].family().kind() {
                FamilyKind::Gaussian => Some((2.0 * u).sqrt()),
                FamilyKind::TwoSidedExp => Some(u),
                FamilyKind::Weibull { shape } => Some(u.powf(1.0 / shape)),
                FamilyKind::OneSidedWeibull { shape } => Some(if a.dir > 0.0 { u.powf(1.0 / shape) } else { 0.0 }),
                FamilyKind::Custom => None,
            }
        } else {
            None
        };
        if let Some(mut t) = guess {
            // closed-form inverses can overshoot by rounding
            for _ in 0..8 {
                if rate(t) <= u {
                    return t.min(a.tmax);
                }
                t = t.next_down();
            }
        }
        let (mut lo, mut hi) = (0.0, a.tmax);
        while hi - lo > f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if rate(mid) <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if rate(hi) <= u {
            hi
        } else {
            lo
        }
    }

    fn objective(&self, m: &Mapped) -> f64 {
        for c in &self.constraints {
            let s: f64 = c.members.iter().map(|&j| m.rates[j]).sum();
            if s > c.cap {
                return f64::NEG_INFINITY;
            }
        }
        let mut obj = self.ln_b;
        for ((a, &z), &r) in self.active.iter().zip(&m.z).zip(&m.rates) {
            obj -= a.coef * z + r;
        }
        obj
    }

    /// Objective at rate levels `u`; `-inf` off the support.
    fn eval(&self, u: &[f64], m: &mut Mapped) -> f64 {
        for (j, a) in self.active.iter().enumerate() {
            let t = self.extent(a, u[j]);
            m.z[j] = a.dir * t;
            m.rates[j] = self.coordinate_rate(a.coord, m.z[j]);
        }
        self.objective(m)
    }

    fn full_point(&self, z: &[f64]) -> Vec<f64> {
        let mut point = vec![0.0; self.spec.coordinate_dim()];
        for (a, &v) in self.active.iter().zip(z) {
            point[a.coord] = v;
        }
        point
    }
}

/// Largest `t >= 0` with `rate(dir t) <= cap`, bracketed by doubling.
fn bracket<F: Fn(f64) -> f64>(rate: F, dir: f64, cap: f64, margin: f64, what: &str) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while rate(dir * hi) <= cap + margin {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(Error::Unbounded(format!(
                "sublevel set of {what} at level {cap} extends beyond {BRACKET_LIMIT}; the support is not compact"
            )));
        }
    }
    if rate(dir * lo) > cap {
        lo = 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate(dir * mid) <= cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn build_problem<'a>(spec: &'a ModelSpec, beta: f64, grid: &GridOptions) -> Result<Problem<'a>> {
    let ln_b = (spec.branching() as f64).ln();
    let nb = spec.n_blocks();
    let m = spec.terms().len();
    let mut active = Vec::new();
    for (s, t) in spec.terms().iter().enumerate() {
        let coef = beta * t.weight();
        if coef == 0.0 {
            continue;
        }
        let dir = -coef.signum();
        let umax = spec.capacity(t.mask());
        let label = format!("index {}", t.label());
        let tmax = bracket(|x| t.family().rate(x), dir, umax, grid.margin, &label)?;
        if tmax > 0.0 {
            active.push(Active { coord: s, coef, dir, umax, tmax });
        }
    }
    if spec.has_magnetizations() {
        let coef = beta * spec.field();
        if coef != 0.0 {
            let dir = -coef.signum();
            for (i, &p) in spec.proportions().iter().enumerate() {
                let umax = spec.capacity(1 << i);
                let tmax = bracket(|y| scaled_binary_mean_rate(p, y), dir, umax, grid.margin, "magnetization")?;
                active.push(Active { coord: m + i, coef, dir, umax, tmax });
            }
        }
    }
    if active.len() > MAX_ACTIVE {
        return Err(Error::Argument(format!(
            "grid solver supports at most {MAX_ACTIVE} free coordinates, this problem has {}",
            active.len()
        )));
    }

    // one constraint per distinct member set, keeping the smallest capacity
    let mut constraints: Vec<Constraint> = Vec::new();
    for a_mask in 1u32..(1 << nb) {
        let members: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|(_, a)| {
                let mask = if a.coord < m { spec.terms()[a.coord].mask() } else { 1 << (a.coord - m) };
                mask & !a_mask == 0
            })
            .map(|(j, _)| j)
            .collect();
        if members.is_empty() {
            continue;
        }
        let cap = spec.capacity(a_mask);
        match constraints.iter_mut().find(|c| c.members == members) {
            Some(c) => c.cap = c.cap.min(cap),
            None => constraints.push(Constraint { members, cap }),
        }
    }
    Ok(Problem { spec, ln_b, active, constraints })
}

/// Variational free energy by grid search and local refinement.
///
/// Coordinates whose linear coefficient vanishes are fixed at 0, and the
/// others are confined to the half-line where `-coef * z >= 0`, since the
/// rates are minimal at the origin and nondecreasing away from it. Each free
/// coordinate's effective interval is bracketed by doubling and bisection.
/// The search runs over rate levels rather than raw coordinates, so the
/// support is a polytope with 0/1 normals: a lexicographic scan over the
/// product grid picks the incumbent (ties go to the smallest grid point),
/// which is improved on a `3^d` stencil whose step halves whenever no
/// neighbour is strictly better. Steps are reported in rate units.
pub fn free_energy_variational(spec: &ModelSpec, beta: f64, grid: &GridOptions) -> Result<FreeEnergyResult> {
    if !beta.is_finite() {
        return Err(Error::Argument(format!("beta must be finite, got {beta}")));
    }
    if grid.points < 2 || !(grid.min_step > 0.0) {
        return Err(Error::Argument("grid needs at least 2 points and a positive minimum step".into()));
    }
    let problem = build_problem(spec, beta, grid)?;
    let d = problem.active.len();
    if d == 0 {
        return Ok(FreeEnergyResult {
            beta,
            value: problem.ln_b,
            argmax: vec![0.0; spec.coordinate_dim()],
            method: Method::Grid,
            step: 0.0,
            refinements: 0,
            on_boundary: false,
        });
    }

    let mut points = grid.points;
    while points > 3 && (points as f64).powi(d as i32) > MAX_GRID_POINTS {
        points -= 1;
    }
    let level = |a: &Active, k: usize| if k + 1 == points { a.umax } else { a.umax * k as f64 / (points - 1) as f64 };
    // per-axis coordinates and rates, shared by every grid point
    let axes: Vec<Vec<(f64, f64)>> = problem
        .active
        .iter()
        .map(|a| {
            (0..points)
                .map(|k| {
                    let z = a.dir * problem.extent(a, level(a, k));
                    (z, problem.coordinate_rate(a.coord, z))
                })
                .collect()
        })
        .collect();
    let total = (points as u64).pow(d as u32);
    let decode = |mut k: u64, idx: &mut [usize]| {
        for j in (0..d).rev() {
            idx[j] = (k % points as u64) as usize;
            k /= points as u64;
        }
    };

    const CHUNK: u64 = 1 << 12;
    let best = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut idx = vec![0usize; d];
            let mut mp = Mapped::new(d);
            let mut best = (f64::NEG_INFINITY, u64::MAX);
            for k in c * CHUNK..total.min((c + 1) * CHUNK) {
                decode(k, &mut idx);
                for j in 0..d {
                    (mp.z[j], mp.rates[j]) = axes[j][idx[j]];
                }
                let v = problem.objective(&mp);
                if v > best.0 {
                    best = (v, k);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    // grid index 0 is the origin, which is always feasible
    let mut idx = vec![0usize; d];
    decode(best.1, &mut idx);
    let mut u: Vec<f64> = problem.active.iter().zip(&idx).map(|(a, &k)| level(a, k)).collect();
    let mut mp = Mapped::new(d);
    let mut value = problem.eval(&u, &mut mp);

    let mut steps: Vec<f64> = problem.active.iter().map(|a| a.umax / (points - 1) as f64).collect();
    let mut refinements = 0;
    let stencil = 3usize.pow(d as u32);
    let mut cand = vec![0.0; d];
    let mut moves = 0u32;
    const MAX_MOVES: u32 = 100_000;
    loop {
        let max_step = steps.iter().cloned().fold(0.0, f64::max);
        if max_step < grid.min_step || refinements >= grid.max_refinements {
            break;
        }
        let mut improved: Option<(f64, Vec<f64>)> = None;
        for code in 0..stencil {
            let mut c = code;
            for j in (0..d).rev() {
                let delta = (c % 3) as f64 - 1.0;
                c /= 3;
                cand[j] = (u[j] + delta * steps[j]).clamp(0.0, problem.active[j].umax);
            }
            let v = problem.eval(&cand, &mut mp);
            let incumbent = improved.as_ref().map_or(value, |(bv, _)| *bv);
            if v > incumbent {
                improved = Some((v, cand.clone()));
            }
        }
        match improved {
            Some((v, p)) if moves < MAX_MOVES => {
                value = v;
                u = p;
                moves += 1;
            }
            _ => {
                for s in steps.iter_mut() {
                    *s *= 0.5;
                }
                refinements += 1;
            }
        }
    }

    let on_boundary = problem.active.iter().enumerate().any(|(j, a)| {
        let out = u[j] + steps[j];
        if out > a.umax {
            return true;
        }
        let mut probe = u.clone();
        probe[j] = out;
        problem.eval(&probe, &mut mp) == f64::NEG_INFINITY
    });
    problem.eval(&u, &mut mp);
    let step = steps.iter().cloned().fold(0.0, f64::max);
    Ok(FreeEnergyResult {
        beta,
        value,
        argmax: problem.full_point(&mp.z),
        method: Method::Grid,
        step,
        refinements,
        on_boundary,
    })
}

/// Inverse temperature where the maximizer reaches the support boundary,
/// located by bisection on [`FreeEnergyResult::on_boundary`]. `None` when
/// the indicator agrees at both ends of the range.
pub fn critical_point(spec: &ModelSpec, beta_range: (f64, f64), grid: &GridOptions) -> Result<Option<f64>> {
    let (mut lo, mut hi) = beta_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Argument(format!("invalid beta range [{lo}, {hi}]")));
    }
    let flag = |b: f64| free_energy_variational(spec, b, grid).map(|r| r.on_boundary);
    let f_lo = flag(lo)?;
    if f_lo == flag(hi)? {
        return Ok(None);
    }
    const TOL: f64 = 1e-5;
    while hi - lo > TOL {
        let mid = 0.5 * (lo + hi);
        if flag(mid)? == f_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub beta: f64,
    pub n_spins: u32,
    pub variational: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    /// `mc_mean - variational`
    pub gap: f64,
}

/// Variational value against Monte-Carlo disorder averages, one row per
/// `(beta, N)` ordered by `beta` then `N`.
#[allow(clippy::too_many_arguments)]
pub fn free_energy_compare(
    spec: &ModelSpec,
    betas: &[f64],
    n_list: &[u32],
    replicas: usize,
    seed: u64,
    grid: &GridOptions,
    sim: &SimOptions,
) -> Result<Vec<CompareRow>> {
    let variational: Vec<f64> = betas
        .iter()
        .map(|&b| free_energy_variational(spec, b, grid).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mc: Vec<_> = n_list
        .iter()
        .map(|&n| free_energy_mc_multi(spec, n, betas, replicas, seed, sim))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(betas.len() * n_list.len());
    for (bi, &beta) in betas.iter().enumerate() {
        for (ni, &n) in n_list.iter().enumerate() {
            let est = &mc[ni][bi];
            let v = variational[bi];
            rows.push(CompareRow {
                beta,
                n_spins: n,
                variational: v,
                mc_mean: est.mean,
                mc_stderr: est.stderr,
                gap: est.mean - v,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderFamily;
    use crate::model::IndexTerm;
    use std::f64::consts::LN_2;

    fn gauss() -> DisorderFamily {
        DisorderFamily::gaussian()
    }

    #[test]
    fn rem_support_examples() {
        let spec = ModelSpec::rem(gauss());
        assert!(support_member(&spec, &[1.0]).unwrap());
        assert!(!support_member(&spec, &[1.2]).unwrap());
        assert_eq!(rate_j(&spec, &[1.0]).unwrap(), 0.5);
        assert_eq!(rate_j(&spec, &[1.2]).unwrap(), f64::INFINITY);
        assert_eq!(rate_j(&spec, &[0.0]).unwrap(), 0.0);
        assert!(matches!(support_member(&spec, &[0.0, 1.0]), Err(Error::Dimension { expected: 1, got: 2 })));
    }

    #[test]
    fn grem_point_from_brute_force() {
        let spec = ModelSpec::grem(vec![0.5, 0.5], vec![(1.0, gauss()), (1.0, gauss())], 2).unwrap();
        // 0.32 <= 0.5 log 2 and 0.64 <= log 2
        assert!(support_member(&spec, &[0.8, 0.8]).unwrap());
        assert!((rate_j(&spec, &[0.8, 0.8]).unwrap() - 0.64).abs() < 1e-15);
        assert!(!support_member(&spec, &[0.9, 0.1]).unwrap());
    }

    #[test]
    fn external_field_magnetization_bounds() {
        let spec = ModelSpec::external_field(vec![0.5, 0.5], vec![IndexTerm::new(vec![0], 1.0, gauss())], 0.5).unwrap();
        assert!(support_member(&spec, &[0.0, 0.5, -0.5]).unwrap());
        assert!(!support_member(&spec, &[0.0, 0.51, 0.0]).unwrap());
        assert!((rate_j(&spec, &[0.0, 0.5, 0.0]).unwrap() - 0.5 * LN_2).abs() < 1e-15);
    }

    #[test]
    fn gaussian_closed_form_values() {
        assert_eq!(rem_gaussian_closed_form(0.0), LN_2);
        let bc = (2.0 * LN_2).sqrt();
        assert!((rem_gaussian_closed_form(bc) - 2.0 * LN_2).abs() < 1e-15);
        assert!((rem_gaussian_closed_form(2.0) - 2.354821).abs() < 1e-6);
        assert!((rem_gaussian_closed_form(0.5) - 0.818147).abs() < 1e-6);
    }

    #[test]
    fn variational_matches_closed_forms() {
        let g = GridOptions::default();
        let spec = ModelSpec::rem(gauss());
        for k in 0..=10 {
            let beta = 0.25 * k as f64;
            let r = free_energy_variational(&spec, beta, &g).unwrap();
            assert!((r.value - rem_gaussian_closed_form(beta)).abs() < 1e-6, "{beta}: {}", r.value);
        }
        let spec = ModelSpec::rem(DisorderFamily::two_sided_exp());
        let r = free_energy_variational(&spec, 3.0, &g).unwrap();
        assert!((r.value - 2.079442).abs() < 1e-6);
    }

    #[test]
    fn beta_zero_is_log_b_at_origin() {
        let g = GridOptions::default();
        for b in [2, 3, 5] {
            let spec = ModelSpec::rem_with(gauss(), b, 1.0).unwrap();
            let r = free_energy_variational(&spec, 0.0, &g).unwrap();
            assert_eq!(r.value, (b as f64).ln());
            assert_eq!(r.argmax, vec![0.0]);
        }
    }

    #[test]
    fn closed_form_general_weight_and_branching() {
        let g = GridOptions::default();
        for (b, a, beta) in [(3u32, 0.7, 1.4), (2, 2.0, 0.9), (4, 1.0, -0.6)] {
            for fam in [gauss(), DisorderFamily::two_sided_exp()] {
                let spec = ModelSpec::rem_with(fam, b, a).unwrap();
                let cf = closed_form(&spec, beta).unwrap();
                let r = free_energy_variational(&spec, beta, &g).unwrap();
                assert!((cf.value - r.value).abs() < 1e-6, "{b} {a} {beta}: {} vs {}", cf.value, r.value);
                assert!((cf.argmax[0] - r.argmax[0]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn critical_points() {
        let g = GridOptions::default();
        let bc = critical_point(&ModelSpec::rem(gauss()), (0.0, 3.0), &g).unwrap().unwrap();
        assert!((bc - (2.0 * LN_2).sqrt()).abs() < 1e-4, "{bc}");
        let be = critical_point(&ModelSpec::rem(DisorderFamily::two_sided_exp()), (0.0, 3.0), &g).unwrap().unwrap();
        assert!((be - 1.0).abs() < 1e-4, "{be}");
        let one_sided = ModelSpec::rem(DisorderFamily::one_sided_weibull(1.5).unwrap());
        assert_eq!(critical_point(&one_sided, (0.0, 5.0), &g).unwrap(), None);
    }

    #[test]
    fn unbounded_sublevel_set_is_refused() {
        use crate::disorder::{Convexity, CustomFamily};
        // rate saturates below log 2, so {I <= log 2} is the whole line
        let fam = DisorderFamily::custom(CustomFamily {
            name: "saturating".into(),
            rate: Box::new(|x: f64| 0.5 * (1.0 - (-x * x).exp())),
            sampler: Box::new(|_, _| 0.0),
            interval_prob: Box::new(|n, a, b| {
                let r = |x: f64| 0.5 * (1.0 - (-x * x).exp());
                let inf = if a <= 0.0 && b >= 0.0 { 0.0 } else { r(a.abs().min(b.abs())) };
                (-(n as f64) * inf).exp()
            }),
            convexity: Convexity::Unimodal,
        })
        .unwrap();
        let spec = ModelSpec::rem(fam);
        assert!(matches!(free_energy_variational(&spec, 1.0, &GridOptions::default()), Err(Error::Unbounded(_))));
    }

    #[test]
    fn compare_rows_and_zero_gap_at_beta_zero() {
        let spec = ModelSpec::rem(gauss());
        let rows = free_energy_compare(
            &spec,
            &[0.0, 0.5],
            &[8, 10],
            3,
            1,
            &GridOptions::default(),
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].beta, rows[0].n_spins), (0.0, 8));
        assert_eq!((rows[1].beta, rows[1].n_spins), (0.0, 10));
        assert_eq!(rows[0].gap, 0.0);
        assert_eq!(rows[1].gap, 0.0);
    }
}
