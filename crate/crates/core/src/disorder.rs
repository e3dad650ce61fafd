//! Scaled disorder families `lambda_N` and their large-deviation rates.
//!
//! Every family is a sequence of laws indexed by the system size `N` that
//! concentrates at the origin, together with the speed-`N` rate function
//! `I` of that sequence. Families are immutable; sampling always takes an
//! explicit generator.

use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::quad;

/// Shape of a rate function beyond `I(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    Convex,
    /// Nonincreasing on the negative half-line, nondecreasing on the positive one.
    Unimodal,
}

/// Descriptor of the family behind a [`DisorderFamily`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    /// `N(0, 1/N)`, rate `x^2 / 2`.
    Gaussian,
    /// Density `N/2 exp(-N|y|)`, rate `|x|`.
    TwoSidedExp,
    /// Symmetric, `P(|Y| > x) = exp(-N x^shape)`, rate `|x|^shape`.
    Weibull { shape: f64 },
    /// Non-negative, `P(Y > x) = exp(-N x^shape)`, rate `x^shape` on `x >= 0`.
    OneSidedWeibull { shape: f64 },
    Custom,
}

pub type RateFn = dyn Fn(f64) -> f64 + Send + Sync;
pub type SamplerFn = dyn Fn(u32, &mut dyn RngCore) -> f64 + Send + Sync;
pub type IntervalProbFn = dyn Fn(u32, f64, f64) -> f64 + Send + Sync;

/// User-supplied family, validated by [`DisorderFamily::custom`].
pub struct CustomFamily {
    pub name: String,
    pub rate: Box<RateFn>,
    pub sampler: Box<SamplerFn>,
    pub interval_prob: Box<IntervalProbFn>,
    pub convexity: Convexity,
}

#[derive(Clone)]
enum Repr {
    Gaussian,
    TwoSidedExp,
    Weibull(f64),
    OneSidedWeibull(f64),
    Custom(Arc<CustomFamily>),
}

#[derive(Clone)]
pub struct DisorderFamily {
    repr: Repr,
}

impl fmt::Debug for DisorderFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Custom(c) => write!(f, "Custom({})", c.name),
            _ => write!(f, "{:?}", self.kind()),
        }
    }
}

impl PartialEq for DisorderFamily {
    fn eq(&self, other: &Self) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Custom(a), Repr::Custom(b)) => Arc::ptr_eq(a, b),
            _ => self.kind() == other.kind(),
        }
    }
}

fn check_shape(shape: f64) -> Result<()> {
    if shape.is_finite() && shape > 0.0 {
        Ok(())
    } else {
        Err(Error::Family(format!("Weibull shape must be positive, got {shape}")))
    }
}

impl DisorderFamily {
    pub fn gaussian() -> Self {
        DisorderFamily { repr: Repr::Gaussian }
    }

    pub fn two_sided_exp() -> Self {
        DisorderFamily { repr: Repr::TwoSidedExp }
    }

    pub fn weibull(shape: f64) -> Result<Self> {
        check_shape(shape)?;
        Ok(DisorderFamily { repr: Repr::Weibull(shape) })
    }

    pub fn one_sided_weibull(shape: f64) -> Result<Self> {
        check_shape(shape)?;
        Ok(DisorderFamily { repr: Repr::OneSidedWeibull(shape) })
    }

    /// Accepts a user family only after checking `I(0) = 0`, unimodality of
    /// the rate and agreement of the rate with the family's own `lambda_N`
    /// (see [`validate_rate`]).
    pub fn custom(family: CustomFamily) -> Result<Self> {
        let fam = DisorderFamily { repr: Repr::Custom(Arc::new(family)) };
        validate_rate(&fam)?;
        Ok(fam)
    }

    /// Custom family whose interval probabilities come from a density by
    /// adaptive quadrature. A density that underflows on the whole interval
    /// gives an exact zero.
    pub fn custom_from_density<D>(
        name: &str,
        rate: Box<RateFn>,
        sampler: Box<SamplerFn>,
        density: D,
        convexity: Convexity,
    ) -> Result<Self>
    where
        D: Fn(u32, f64) -> f64 + Send + Sync + 'static,
    {
        let interval_prob = Box::new(move |n: u32, a: f64, b: f64| {
            quad::integrate(|x| density(n, x), a, b).clamp(0.0, 1.0)
        });
        Self::custom(CustomFamily {
            name: name.to_string(),
            rate,
            sampler,
            interval_prob,
            convexity,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        match &self.repr {
            Repr::Gaussian => FamilyKind::Gaussian,
            Repr::TwoSidedExp => FamilyKind::TwoSidedExp,
            Repr::Weibull(shape) => FamilyKind::Weibull { shape: *shape },
            Repr::OneSidedWeibull(shape) => FamilyKind::OneSidedWeibull { shape: *shape },
            Repr::Custom(_) => FamilyKind::Custom,
        }
    }

    pub fn convexity(&self) -> Convexity {
        match &self.repr {
            Repr::Gaussian | Repr::TwoSidedExp => Convexity::Convex,
            Repr::Weibull(a) | Repr::OneSidedWeibull(a) => {
                if *a >= 1.0 {
                    Convexity::Convex
                } else {
                    Convexity::Unimodal
                }
            }
            Repr::Custom(c) => c.convexity,
        }
    }

    /// Rate function `I(x)`; `f64::INFINITY` outside the effective domain.
    pub fn rate(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Gaussian => 0.5 * x * x,
            Repr::TwoSidedExp => x.abs(),
            Repr::Weibull(a) => x.abs().powf(*a),
            Repr::OneSidedWeibull(a) => {
                if x < 0.0 {
                    f64::INFINITY
                } else {
                    x.powf(*a)
                }
            }
            Repr::Custom(c) => (c.rate)(x),
        }
    }

    /// One draw from `lambda_N`.
    pub fn sample<R: RngCore + ?Sized>(&self, n: u32, rng: &mut R) -> f64 {
        let nf = n as f64;
        match &self.repr {
            Repr::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                z / nf.sqrt()
            }
            Repr::TwoSidedExp => {
                let e: f64 = Exp1.sample(rng);
                let neg: bool = rng.random();
                let v = e / nf;
                if neg {
                    -v
                } else {
                    v
                }
            }
            Repr::Weibull(a) => {
                let e: f64 = Exp1.sample(rng);
                let neg: bool = rng.random();
                let v = (e / nf).powf(1.0 / a);
                if neg {
                    -v
                } else {
                    v
                }
            }
            Repr::OneSidedWeibull(a) => {
                let e: f64 = Exp1.sample(rng);
                (e / nf).powf(1.0 / a)
            }
            Repr::Custom(c) => {
                let mut dynrng = DynRng(rng);
                (c.sampler)(n, &mut dynrng)
            }
        }
    }

    pub fn sample_into<R: RngCore + ?Sized>(&self, n: u32, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.sample(n, rng);
        }
    }

    /// `lambda_N([a, b])`. Bounds may be infinite; an empty interval has
    /// probability zero.
    pub fn interval_prob(&self, n: u32, a: f64, b: f64) -> f64 {
        if a.is_nan() || b.is_nan() || !(a < b) {
            return 0.0;
        }
        let nf = n as f64;
        let p = match &self.repr {
            Repr::Gaussian => {
                let s = (nf / 2.0).sqrt();
                // P(X > x) = erfc(x sqrt(N/2)) / 2
                let upper = |x: f64| 0.5 * libm::erfc(x * s);
                split_interval(a, b, upper, |x| upper(-x))
            }
            Repr::TwoSidedExp => symmetric_stretched(nf, 1.0, a, b),
            Repr::Weibull(shape) => symmetric_stretched(nf, *shape, a, b),
            Repr::OneSidedWeibull(shape) => {
                let lo = a.max(0.0);
                if b <= lo {
                    0.0
                } else {
                    // exp(-N lo^s) - exp(-N b^s)
                    let ta = nf * lo.powf(*shape);
                    let tb = nf * b.powf(*shape);
                    -(-ta).exp() * (-(tb - ta)).exp_m1()
                }
            }
            Repr::Custom(c) => (c.interval_prob)(n, a, b),
        };
        p.clamp(0.0, 1.0)
    }

    /// Infimum of the rate over `[a, b]`, using unimodality around the origin.
    pub fn rate_inf(&self, a: f64, b: f64) -> f64 {
        if a <= 0.0 && b >= 0.0 {
            self.rate(0.0)
        } else if a > 0.0 {
            self.rate(a)
        } else {
            self.rate(b)
        }
    }

    /// Supremum of the rate over `[a, b]`, attained at an endpoint.
    pub fn rate_sup(&self, a: f64, b: f64) -> f64 {
        self.rate(a).max(self.rate(b))
    }
}

/// `P(a <= X <= b)` from the two tail functions without subtracting from one
/// unless the interval contains the origin.
fn split_interval<U, L>(a: f64, b: f64, upper: U, lower: L) -> f64
where
    U: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    if a >= 0.0 {
        upper(a) - upper(b)
    } else if b <= 0.0 {
        lower(b) - lower(a)
    } else {
        1.0 - lower(a) - upper(b)
    }
}

/// Interval probability for `P(|Y| > x) = exp(-N x^shape)`, symmetric.
fn symmetric_stretched(nf: f64, shape: f64, a: f64, b: f64) -> f64 {
    let tail_exp = |x: f64| nf * x.abs().powf(shape);
    // mass between |u| < |v| on one side: (exp(-T(u)) - exp(-T(v))) / 2
    let one_side = |near: f64, far: f64| {
        let tn = tail_exp(near);
        let tf = tail_exp(far);
        -0.5 * (-tn).exp() * (-(tf - tn)).exp_m1()
    };
    if a >= 0.0 {
        one_side(a, b)
    } else if b <= 0.0 {
        one_side(b, a)
    } else {
        1.0 - 0.5 * (-tail_exp(a)).exp() - 0.5 * (-tail_exp(b)).exp()
    }
}

struct DynRng<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Cramér rate of the mean of fair `+-1` spins:
/// `I0(y) = (1+y)/2 log(1+y) + (1-y)/2 log(1-y)` on `[-1, 1]`.
///
/// The endpoints return `log 2` exactly; `|y| > 1` is a domain error
/// (the rate is infinite there).
pub fn binary_mean_rate(y: f64) -> Result<f64> {
    if y.is_nan() || y.abs() > 1.0 {
        return Err(Error::Domain(format!("binary mean rate needs |y| <= 1, got {y}")));
    }
    if y.abs() == 1.0 {
        return Ok(LN_2);
    }
    Ok(0.5 * (1.0 + y) * y.ln_1p() + 0.5 * (1.0 - y) * (-y).ln_1p())
}

/// The same rate written as a Legendre transform of `log cosh`:
/// `y atanh(y) - log cosh(atanh(y))`.
pub fn binary_mean_rate_legendre(y: f64) -> Result<f64> {
    if y.is_nan() || y.abs() > 1.0 {
        return Err(Error::Domain(format!("binary mean rate needs |y| <= 1, got {y}")));
    }
    if y.abs() == 1.0 {
        return Ok(LN_2);
    }
    let t = y.atanh();
    Ok(y * t - t.cosh().ln())
}

/// `p * I0(y / p)`, the rate of a block magnetization `sigma_bar_i / N` for a
/// block holding a fraction `p` of the spins. Infinite for `|y| > p`.
pub fn scaled_binary_mean_rate(p: f64, y: f64) -> f64 {
    match binary_mean_rate(y / p) {
        Ok(v) => p * v,
        Err(_) => f64::INFINITY,
    }
}

/// Per-`N` empirical rate `-(1/N) log lambda_N([a, b])` for each `N` in
/// `n_list`. Probabilities that underflow to zero give `+inf`.
pub fn empirical_rate_check(
    family: &DisorderFamily,
    interval: (f64, f64),
    n_list: &[u32],
) -> Result<Vec<(u32, f64)>> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::Argument(format!("degenerate interval [{a}, {b}]")));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list.contains(&0) {
        return Err(Error::Argument("N list must be positive and increasing".into()));
    }
    Ok(n_list
        .iter()
        .map(|&n| {
            let p = family.interval_prob(n, a, b);
            let r = if p > 0.0 { -p.ln() / n as f64 } else { f64::INFINITY };
            (n, r)
        })
        .collect())
}

/// Constant `C` in the `C log(N) / N` finite-size band used by
/// [`validate_rate`].
pub const RATE_BAND: f64 = 1.0;

const PROBES: [(f64, f64); 4] = [(0.5, 1.0), (-1.0, -0.5), (0.2, 0.4), (-0.4, -0.2)];
const PROBE_N: [u32; 3] = [64, 128, 256];

/// Checks that a family's rate function is admissible and describes its own
/// `lambda_N`: `I(0) = 0`, unimodal around zero, and on fixed probe
/// intervals `-(1/N) log lambda_N` sits within `RATE_BAND log(N)/N` of the
/// infimum of the rate.
pub fn validate_rate(family: &DisorderFamily) -> Result<()> {
    let r0 = family.rate(0.0);
    if r0 != 0.0 {
        return Err(Error::Family(format!("rate(0) must be 0, got {r0}")));
    }
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.025).collect();
    let mut prev_pos = 0.0;
    let mut prev_neg = 0.0;
    for &x in &grid {
        let rp = family.rate(x);
        let rn = family.rate(-x);
        if rp.is_nan() || rn.is_nan() || rp < 0.0 || rn < 0.0 {
            return Err(Error::Family(format!("rate must be non-negative near x = +-{x}")));
        }
        if rp < prev_pos || rn < prev_neg {
            return Err(Error::Family(format!("rate is not unimodal around 0 (x = +-{x})")));
        }
        prev_pos = rp;
        prev_neg = rn;
    }
    for &(a, b) in &PROBES {
        let target = family.rate_inf(a, b);
        let checks = empirical_rate_check(family, (a, b), &PROBE_N)?;
        for (n, emp) in checks {
            let nf = n as f64;
            if target.is_infinite() {
                if emp.is_finite() {
                    return Err(Error::Family(format!(
                        "rate is infinite on [{a}, {b}] but lambda_{n} gives mass there"
                    )));
                }
                continue;
            }
            // beyond this the probability underflows and carries no information
            if target * nf > 600.0 {
                continue;
            }
            let band = RATE_BAND * nf.ln() / nf;
            if !(emp - target).abs().le(&band) {
                return Err(Error::Family(format!(
                    "on [{a}, {b}] at N = {n}: -(1/N) log lambda_N = {emp:.6}, rate gives {target:.6}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    #[test]
    fn gaussian_rate_values() {
        let g = DisorderFamily::gaussian();
        assert_eq!(g.rate(0.0), 0.0);
        assert_eq!(g.rate(1.0), 0.5);
        assert_eq!(g.convexity(), Convexity::Convex);
    }

    #[test]
    fn two_sided_exp_values() {
        let e = DisorderFamily::two_sided_exp();
        assert_eq!(e.rate(-0.7), 0.7);
        assert_eq!(e.rate(0.0), 0.0);
        for n in [1, 7, 64] {
            assert!((e.interval_prob(n, 0.0, f64::INFINITY) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn two_sided_exp_rate_from_density() {
        // -(1/N) log lambda_N([-0.7 - d, -0.7 + d]) approaches 0.7
        let e = DisorderFamily::two_sided_exp();
        let d = 1e-3;
        let n = 1000;
        let p = e.interval_prob(n, -0.7 - d, -0.7 + d);
        let r = -p.ln() / n as f64;
        assert!((r - 0.7).abs() < 2e-3, "{r}");
    }

    #[test]
    fn weibull_values() {
        let w1 = DisorderFamily::weibull(1.0).unwrap();
        let e = DisorderFamily::two_sided_exp();
        for x in [-2.0, -0.3, 0.0, 0.4, 1.7] {
            assert_eq!(w1.rate(x), e.rate(x));
            assert!((w1.interval_prob(9, x, x + 0.5) - e.interval_prob(9, x, x + 0.5)).abs() < 1e-15);
        }
        let w2 = DisorderFamily::weibull(2.0).unwrap();
        assert_eq!(w2.rate(1.0), 1.0);
        let w05 = DisorderFamily::weibull(0.5).unwrap();
        assert_eq!(w05.convexity(), Convexity::Unimodal);
        assert_eq!(w2.convexity(), Convexity::Convex);
    }

    #[test]
    fn weibull_rejects_bad_shape() {
        assert!(DisorderFamily::weibull(0.0).is_err());
        assert!(DisorderFamily::weibull(-1.0).is_err());
        assert!(DisorderFamily::weibull(f64::NAN).is_err());
        assert!(DisorderFamily::one_sided_weibull(0.0).is_err());
    }

    #[test]
    fn one_sided_weibull_is_non_negative() {
        let f = DisorderFamily::one_sided_weibull(1.5).unwrap();
        assert_eq!(f.rate(-0.1), f64::INFINITY);
        assert_eq!(f.interval_prob(10, -1.0, 0.0), 0.0);
        assert!((f.interval_prob(10, -1.0, f64::INFINITY) - 1.0).abs() < 1e-15);
        let mut rng = SplitMix64::seed_from_u64(3);
        for _ in 0..1000 {
            assert!(f.sample(12, &mut rng) >= 0.0);
        }
    }

    #[test]
    fn binary_mean_rate_values() {
        assert_eq!(binary_mean_rate(0.0).unwrap(), 0.0);
        assert_eq!(binary_mean_rate(1.0).unwrap(), LN_2);
        assert_eq!(binary_mean_rate(-1.0).unwrap(), LN_2);
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((binary_mean_rate(0.5).unwrap() - expected).abs() < 1e-15);
        assert!((binary_mean_rate(0.5).unwrap() - 0.130812).abs() < 1e-6);
        assert!(matches!(binary_mean_rate(1.0 + 1e-12), Err(Error::Domain(_))));
        assert_eq!(scaled_binary_mean_rate(0.5, 0.6), f64::INFINITY);
        assert_eq!(scaled_binary_mean_rate(0.5, 0.5), 0.5 * LN_2);
    }

    #[test]
    fn binary_mean_rate_near_endpoints_is_continuous() {
        let v = binary_mean_rate(1.0 - 1e-12).unwrap();
        assert!((v - LN_2).abs() < 1e-10, "{v}");
    }

    #[test]
    fn binary_mean_rate_forms_agree_on_grid() {
        for i in 0..1000 {
            let y = -1.0 + 2.0 * (i as f64 + 0.5) / 1000.0;
            let a = binary_mean_rate(y).unwrap();
            let b = binary_mean_rate_legendre(y).unwrap();
            assert!((a - b).abs() <= 1e-12, "y={y}: {a} vs {b}");
            assert_eq!(a, binary_mean_rate(-y).unwrap());
        }
    }

    #[test]
    fn empirical_rate_check_validates_input() {
        let g = DisorderFamily::gaussian();
        assert!(empirical_rate_check(&g, (1.0, 1.0), &[4]).is_err());
        assert!(empirical_rate_check(&g, (0.0, 1.0), &[8, 4]).is_err());
        let rows = empirical_rate_check(&g, (0.5, 0.6), &[256]).unwrap();
        assert_eq!(rows[0].0, 256);
    }

    #[test]
    fn empirical_rate_reports_underflow_as_infinite() {
        let g = DisorderFamily::gaussian();
        let rows = empirical_rate_check(&g, (30.0, 31.0), &[64]).unwrap();
        assert_eq!(rows[0].1, f64::INFINITY);
    }

    #[test]
    fn interval_containing_zero_has_vanishing_rate() {
        for fam in [
            DisorderFamily::gaussian(),
            DisorderFamily::two_sided_exp(),
            DisorderFamily::weibull(0.5).unwrap(),
        ] {
            let rows = empirical_rate_check(&fam, (-0.3, 0.2), &[64, 256, 1024]).unwrap();
            assert!(rows.last().unwrap().1 < 1e-3, "{fam:?}: {rows:?}");
        }
        let os = DisorderFamily::one_sided_weibull(2.0).unwrap();
        let rows = empirical_rate_check(&os, (-0.3, 0.2), &[64, 256, 1024]).unwrap();
        assert!(rows.last().unwrap().1 < 1e-3);
    }

    #[test]
    fn builtins_pass_validation() {
        for fam in [
            DisorderFamily::gaussian(),
            DisorderFamily::two_sided_exp(),
            DisorderFamily::weibull(0.5).unwrap(),
            DisorderFamily::weibull(3.0).unwrap(),
            DisorderFamily::one_sided_weibull(1.0).unwrap(),
        ] {
            validate_rate(&fam).unwrap_or_else(|e| panic!("{fam:?}: {e}"));
        }
    }

    fn gaussian_sampler() -> Box<SamplerFn> {
        Box::new(|n, rng| {
            let z: f64 = StandardNormal.sample(rng);
            z / (n as f64).sqrt()
        })
    }

    fn gaussian_density(n: u32, x: f64) -> f64 {
        let nf = n as f64;
        (nf / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * nf * x * x).exp()
    }

    #[test]
    fn custom_family_with_correct_rate_is_accepted() {
        let fam = DisorderFamily::custom_from_density(
            "gauss",
            Box::new(|x| 0.5 * x * x),
            gaussian_sampler(),
            gaussian_density,
            Convexity::Convex,
        )
        .unwrap();
        assert_eq!(fam.kind(), FamilyKind::Custom);
        let g = DisorderFamily::gaussian();
        let p = fam.interval_prob(64, 0.5, 0.6);
        let q = g.interval_prob(64, 0.5, 0.6);
        assert!((p - q).abs() <= 1e-9 * q, "{p} vs {q}");
    }

    #[test]
    fn custom_family_with_wrong_rate_is_rejected() {
        let err = DisorderFamily::custom_from_density(
            "gauss-wrong",
            Box::new(|x| x * x),
            gaussian_sampler(),
            gaussian_density,
            Convexity::Convex,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Family(_)), "{err}");
    }

    #[test]
    fn custom_family_requires_zero_at_origin() {
        let err = DisorderFamily::custom(CustomFamily {
            name: "shifted".into(),
            rate: Box::new(|x| 0.5 * (x - 1.0) * (x - 1.0)),
            sampler: gaussian_sampler(),
            interval_prob: Box::new(|_, _, _| 0.5),
            convexity: Convexity::Convex,
        })
        .unwrap_err();
        assert!(err.to_string().contains("rate(0)"));
    }

    #[test]
    fn custom_family_must_be_unimodal() {
        let err = DisorderFamily::custom(CustomFamily {
            name: "bimodal".into(),
            rate: Box::new(|x: f64| if x == 0.0 { 0.0 } else { (x * x - 1.0).abs() }),
            sampler: gaussian_sampler(),
            interval_prob: Box::new(|_, _, _| 0.5),
            convexity: Convexity::Unimodal,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Family(_)));
    }
}
