//! Spherical primitives: von Mises-Fisher log densities, the modified Bessel
//! function behind their normalizer, and the tangent-space projection and
//! retraction used by Riemannian SGD on the unit sphere.
//!
//! Densities are only exposed in log space. For `p = 100` and `κ ≈ 1e3` both
//! `I_ν(κ)` and `exp(κ cos θ)` overflow an `f64`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-6;

/// Below this argument (or below the order, whichever is larger) the
/// ascending series is used.
const SERIES_CUTOFF: f64 = 20.0;

/// Orders at or above this use the uniform asymptotic expansion for large
/// arguments; smaller orders fall back to the Hankel expansion.
const UNIFORM_MIN_ORDER: f64 = 20.0;

/// Coefficients (ascending powers of t) of the Debye polynomials u_0..u_6.
const DEBYE_U: [&[f64]; 7] = [
    &[1.0],
    &[0.0, 0.125, 0.0, -0.20833333333333334],
    &[0.0, 0.0, 0.0703125, 0.0, -0.4010416666666667, 0.0, 0.3342013888888889],
    &[
        0.0,
        0.0,
        0.0,
        0.0732421875,
        0.0,
        -0.8912109375,
        0.0,
        1.8464626736111112,
        0.0,
        -1.0258125964506173,
    ],
    &[
        0.0,
        0.0,
        0.0,
        0.0,
        0.112152099609375,
        0.0,
        -2.3640869140625,
        0.0,
        8.78912353515625,
        0.0,
        -11.207002616222994,
        0.0,
        4.669584423426247,
    ],
    &[
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.22710800170898438,
        0.0,
        -7.368794359479632,
        0.0,
        42.53499874538846,
        0.0,
        -91.81824154324002,
        0.0,
        84.63621767460073,
        0.0,
        -28.212072558200244,
    ],
    &[
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.5725014209747314,
        0.0,
        -26.491430486951554,
        0.0,
        218.1905117442116,
        0.0,
        -699.5796273761325,
        0.0,
        1059.9904525279999,
        0.0,
        -765.2524681411817,
        0.0,
        212.57013003921713,
    ],
];

/// A point on the unit sphere S^{p-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps `coords`, which must already have unit norm (within 1e-6).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm = norm(&coords);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Domain(format!("vector norm {norm} is not 1")));
        }
        Ok(UnitVector(coords))
    }

    /// Rescales `coords` onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        coords.iter_mut().for_each(|x| *x /= n);
        Ok(UnitVector(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A vector in the tangent space of the sphere at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub coords: Vec<f64>,
    pub base: UnitVector,
}

/// Parameters of a von Mises-Fisher distribution on S^{dim-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams {
    mean: UnitVector,
    kappa: f64,
}

impl VmfParams {
    pub fn new(mean: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
        }
        if mean.dim() < 2 {
            return Err(Error::Domain(format!(
                "vMF needs dim >= 2, got {}",
                mean.dim()
            )));
        }
        Ok(VmfParams { mean, kappa })
    }

    pub fn mean(&self) -> &UnitVector {
        &self.mean
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) || kappa.is_infinite() {
        return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
    }
    Ok(())
}

/// `log I_order(kappa)`, the modified Bessel function of the first kind.
///
/// Finite for `kappa` in `[0, 1e6]` and orders up to 500. `log I_ν(0)` is
/// `0` for `ν = 0` and `-inf` otherwise.
pub fn log_bessel_i(order: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(order >= 0.0) || order.is_infinite() {
        return Err(Error::Domain(format!("order must be >= 0, got {order}")));
    }
    if kappa == 0.0 {
        return Ok(if order == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(match BesselBranch::select(order, kappa) {
        BesselBranch::Series => {
            order * (0.5 * kappa).ln() - libm::lgamma(order + 1.0) + log_series_sum(order, kappa)
        }
        BesselBranch::Hankel => log_bessel_hankel(order, kappa),
        BesselBranch::Debye => log_bessel_debye(order, kappa),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BesselBranch {
    Series,
    Hankel,
    Debye,
}

impl BesselBranch {
    fn select(order: f64, kappa: f64) -> Self {
        if kappa < order.max(SERIES_CUTOFF) {
            BesselBranch::Series
        } else if order >= UNIFORM_MIN_ORDER {
            BesselBranch::Debye
        } else if kappa >= (2.0 * order * order).max(SERIES_CUTOFF) {
            BesselBranch::Hankel
        } else {
            BesselBranch::Series
        }
    }
}

/// `log Σ_k (κ²/4)^k Γ(ν+1) / (k! Γ(k+ν+1))`, summed with running rescaling
/// so intermediate terms never overflow.
fn log_series_sum(order: f64, kappa: f64) -> f64 {
    const RESCALE_AT: f64 = 1e280;
    let q = 0.25 * kappa * kappa;
    let mut log_scale = 0.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let ratio = q / (k * (k + order));
        term *= ratio;
        sum += term;
        if sum > RESCALE_AT {
            sum /= RESCALE_AT;
            term /= RESCALE_AT;
            log_scale += RESCALE_AT.ln();
        }
        if ratio < 1.0 && term < sum * 1e-17 {
            break;
        }
    }
    log_scale + sum.ln()
}

/// Large-argument expansion `e^x / sqrt(2πx) Σ (-1)^k a_k(ν) / x^k`.
fn log_bessel_hankel(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * k * x);
        if next == 0.0 || next.abs() >= term.abs() {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// Uniform asymptotic expansion in the order.
fn log_bessel_debye(order: f64, kappa: f64) -> f64 {
    let z = kappa / order;
    let root = (1.0 + z * z).sqrt();
    let t = 1.0 / root;
    let eta = root + z.ln() - (1.0 + root).ln();
    let mut sum = 0.0;
    let mut inv_pow = 1.0;
    for coeffs in DEBYE_U {
        let u = coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
        sum += u * inv_pow;
        inv_pow /= order;
    }
    order * eta - 0.5 * (2.0 * PI * order).ln() - 0.5 * root.ln() + sum.ln()
}

/// `-log` of the surface area of S^{dim-1}, i.e. the log density of the
/// uniform distribution on the sphere.
pub fn log_uniform_sphere_density(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    -(2f64.ln() + half * PI.ln() - libm::lgamma(half))
}

/// `log n_p(κ) = (p/2 - 1) log κ - (p/2) log 2π - log I_{p/2-1}(κ)`.
///
/// At `κ = 0` this is the uniform-density limit.
pub fn log_vmf_normalizer(dim: usize, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if dim < 2 {
        return Err(Error::Domain(format!("vMF needs dim >= 2, got {dim}")));
    }
    if kappa == 0.0 {
        return Ok(log_uniform_sphere_density(dim));
    }
    let order = dim as f64 / 2.0 - 1.0;
    let log_two_pi = (2.0 * PI).ln() * dim as f64 / 2.0;
    Ok(match BesselBranch::select(order, kappa) {
        // κ^ν cancels against the series prefactor (κ/2)^ν analytically.
        BesselBranch::Series => {
            order * 2f64.ln() + libm::lgamma(order + 1.0)
                - log_series_sum(order, kappa)
                - log_two_pi
        }
        _ => order * kappa.ln() - log_two_pi - log_bessel_i(order, kappa)?,
    })
}

/// `log f(x; μ, κ) = log n_p(κ) + κ ⟨x, μ⟩`.
pub fn log_vmf_density(x: &UnitVector, params: &VmfParams) -> Result<f64> {
    check_dims(params.dim(), x.dim())?;
    let log_norm = log_vmf_normalizer(params.dim(), params.kappa)?;
    Ok(log_norm + params.kappa * dot(x.as_slice(), params.mean.as_slice()))
}

/// Riemannian gradient `(I - θθᵀ) grad`.
pub fn project_to_tangent(theta: &UnitVector, grad: &[f64]) -> Result<TangentVector> {
    check_dims(theta.dim(), grad.len())?;
    let mut coords = grad.to_vec();
    project_in_place(theta.as_slice(), &mut coords);
    Ok(TangentVector {
        coords,
        base: theta.clone(),
    })
}

/// Removes the radial component of `grad` at `theta` in place.
#[inline]
pub fn project_in_place(theta: &[f64], grad: &mut [f64]) {
    let radial = dot(theta, grad);
    grad.iter_mut().zip(theta).for_each(|(g, t)| *g -= radial * t);
}

/// First-order retraction `R_x(z) = (x + z) / ‖x + z‖`.
pub fn retract(x: &UnitVector, step: &[f64]) -> Result<UnitVector> {
    check_dims(x.dim(), step.len())?;
    let mut coords = x.as_slice().to_vec();
    retract_in_place(&mut coords, step)?;
    Ok(UnitVector(coords))
}

/// Retraction applied to `x` in place. On a degenerate step `x` is left
/// untouched.
#[inline]
pub fn retract_in_place(x: &mut [f64], step: &[f64]) -> Result<()> {
    let sq: f64 = x.iter().zip(step).map(|(a, b)| (a + b) * (a + b)).sum();
    if !(sq > 0.0) || !sq.is_finite() {
        return Err(Error::DegenerateRetraction);
    }
    let inv = sq.sqrt().recip();
    x.iter_mut().zip(step).for_each(|(a, b)| *a = (*a + b) * inv);
    Ok(())
}

/// Normalizes in place; returns `false` for a zero vector.
pub(crate) fn normalize_in_place(x: &mut [f64]) -> bool {
    let n = norm(x);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit(v: &[f64]) -> UnitVector {
        UnitVector::normalize(v.to_vec()).unwrap()
    }

    #[test]
    fn bessel_base_case() {
        assert_eq!(log_bessel_i(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_bessel_i(1.5, 0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn bessel_half_order_closed_form() {
        // I_{1/2}(κ) = sqrt(2/(πκ)) sinh κ
        for &k in &[1e-3, 0.5, 1.0, 7.0, 19.99, 20.0, 35.0, 400.0] {
            let exact = (2.0 / (PI * k)).sqrt().ln() + libm::sinh(k).ln();
            let got = log_bessel_i(0.5, k).unwrap();
            assert_relative_eq!(got, exact, max_relative = 1e-12);
        }
        assert_relative_eq!(
            log_bessel_i(0.5, 1.0).unwrap(),
            -0.064351991073531798753,
            max_relative = 1e-12
        );
    }

    #[test]
    fn bessel_high_order_against_series_oracle() {
        // mpmath, 60 digits, explicit ascending series
        assert_relative_eq!(
            log_bessel_i(49.0, 100.0).unwrap(),
            84.94498010395390313262,
            max_relative = 1e-9
        );
    }

    #[test]
    fn bessel_branch_boundaries() {
        // (order, kappa, log I) from mpmath; spans every branch switch.
        let cases = [
            (0.0, 20.0, 17.589610428244274291),
            (0.0, 25.0, 22.476728004999243759),
            (0.5, 30.0, 27.380462775964249571),
            (4.0, 19.9, 17.081008467908834941),
            (4.0, 20.0, 17.180564577617758917),
            (19.0, 361.0, 356.63639091007299084),
            (19.5, 700.0, 695.53391618539340768),
            (20.0, 20.0, 8.0673843725853344692),
            (20.0, 21.0, 9.4522944337117794945),
            (49.0, 48.0, 21.654833458275944588),
            (49.0, 49.5, 23.774095070402827299),
            (99.0, 99.0, 49.361518703387168383),
            (99.0, 1000.0, 990.72835871102086025),
            (499.0, 1e6, 999992.04880575314634),
            (0.0, 1e6, 999992.17330631281325),
            (4.0, 1e6, 999992.17329831280925),
            (0.5, 1e6, 999992.17330618781319),
            (499.0, 10.0, -1801.9563345517965049),
            (99.0, 5000.0, 4993.8423238776650533),
            (9.0, 163.0, 159.28578631142635093),
            (9.0, 161.0, 157.28886546865666224),
        ];
        for (order, kappa, expected) in cases {
            let got = log_bessel_i(order, kappa).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn bessel_rejects_negative_kappa() {
        assert!(matches!(log_bessel_i(0.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(log_bessel_i(0.0, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn normalizer_limits_and_closed_forms() {
        assert_relative_eq!(
            log_vmf_normalizer(2, 0.0).unwrap(),
            -(2.0 * PI).ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            log_vmf_normalizer(3, 0.0).unwrap(),
            -(4.0 * PI).ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            log_vmf_normalizer(3, 1.0).unwrap(),
            -(4.0 * PI * libm::sinh(1.0)).ln(),
            max_relative = 1e-12
        );
        // κ → 0 approaches the uniform density continuously.
        assert_relative_eq!(
            log_vmf_normalizer(3, 1e-9).unwrap(),
            -(4.0 * PI).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn normalizer_p3_closed_form_grid() {
        // n_3(κ) = κ / (4π sinh κ), evaluated stably as log κ - log 4π - κ - log((1 - e^{-2κ})/2)
        for &k in &[1e-6f64, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let exact = k.ln() - (4.0 * PI).ln() - k - (-(-2.0 * k).exp_m1() / 2.0).ln();
            assert_relative_eq!(log_vmf_normalizer(3, k).unwrap(), exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn normalizer_errors() {
        assert!(log_vmf_normalizer(1, 1.0).is_err());
        assert!(log_vmf_normalizer(3, -0.1).is_err());
    }

    #[test]
    fn density_examples() {
        let mu = unit(&[0.0, 0.0, 1.0]);
        let uniform = VmfParams::new(mu.clone(), 0.0).unwrap();
        assert_relative_eq!(
            log_vmf_density(&mu, &uniform).unwrap(),
            -(4.0 * PI).ln(),
            max_relative = 1e-14
        );
        let one = VmfParams::new(mu.clone(), 1.0).unwrap();
        assert_relative_eq!(
            log_vmf_density(&mu, &one).unwrap(),
            -2.6924636085404864266 + 1.0,
            max_relative = 1e-12
        );
        let five = VmfParams::new(mu, 5.0).unwrap();
        let perp = unit(&[1.0, 0.0, 0.0]);
        assert_relative_eq!(
            log_vmf_density(&perp, &five).unwrap(),
            -5.2283937530148746198,
            max_relative = 1e-12
        );
        let short = unit(&[1.0, 0.0]);
        assert!(matches!(
            log_vmf_density(&short, &five),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_integrates_to_one_monte_carlo() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let params = VmfParams::new(unit(&[0.3, -0.2, 0.9]), 5.0).unwrap();
        let log_norm = log_vmf_normalizer(3, 5.0).unwrap();
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let mut x: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            normalize_in_place(&mut x);
            acc += (log_norm + 5.0 * dot(&x, params.mean().as_slice())).exp();
        }
        let integral = acc / n as f64 * 4.0 * PI;
        assert!((integral - 1.0).abs() < 0.02, "integral = {integral}");
    }

    #[test]
    fn projection_examples() {
        let e1 = unit(&[1.0, 0.0]);
        assert_eq!(project_to_tangent(&e1, &[0.0, 2.0]).unwrap().coords, vec![0.0, 2.0]);
        assert_eq!(project_to_tangent(&e1, &[3.0, 0.0]).unwrap().coords, vec![0.0, 0.0]);
        let theta = UnitVector::new(vec![0.6, 0.8]).unwrap();
        let g = project_to_tangent(&theta, &[1.0, 0.0]).unwrap().coords;
        // (I - θθᵀ) = [[0.64, -0.48], [-0.48, 0.36]]
        assert_relative_eq!(g[0], 0.64, epsilon = 1e-15);
        assert_relative_eq!(g[1], -0.48, epsilon = 1e-15);
        assert!(project_to_tangent(&theta, &[1.0]).is_err());
    }

    #[test]
    fn retraction_examples() {
        let e1 = unit(&[1.0, 0.0]);
        assert_eq!(retract(&e1, &[0.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        let r = retract(&e1, &[0.0, 1.0]).unwrap();
        assert_relative_eq!(r.as_slice()[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(r.as_slice()[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        let e2 = unit(&[0.0, 1.0]);
        assert_eq!(retract(&e2, &[0.0, -0.5]).unwrap().as_slice(), &[0.0, 1.0]);
        assert!(matches!(
            retract(&e2, &[0.0, -1.0]),
            Err(Error::DegenerateRetraction)
        ));
    }

    fn sphere_and_grad() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop_oneof![Just(2usize), Just(10), Just(100)].prop_flat_map(|p| {
            (
                prop::collection::vec(-1.0..1.0f64, p),
                prop::collection::vec(-10.0..10.0f64, p),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projection_is_tangent((theta, grad) in sphere_and_grad()) {
            prop_assume!(norm(&theta) > 1e-3);
            let theta = UnitVector::normalize(theta).unwrap();
            let g = project_to_tangent(&theta, &grad).unwrap();
            prop_assert!(dot(theta.as_slice(), &g.coords).abs() <= 1e-9);
        }

        #[test]
        fn retraction_stays_on_sphere((x, step) in sphere_and_grad()) {
            prop_assume!(norm(&x) > 1e-3);
            let x = UnitVector::normalize(x).unwrap();
            if let Ok(r) = retract(&x, &step) {
                prop_assert!((norm(r.as_slice()) - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn density_increases_with_cosine(kappa in 1e-3..1e3f64, a in -1.0..1.0f64, b in -1.0..1.0f64) {
            prop_assume!((a - b).abs() > 1e-6);
            let mu = UnitVector::new(vec![1.0, 0.0, 0.0]).unwrap();
            let params = VmfParams::new(mu, kappa).unwrap();
            let at = |c: f64| {
                let x = UnitVector::normalize(vec![c, (1.0 - c * c).sqrt(), 0.0]).unwrap();
                log_vmf_density(&x, &params).unwrap()
            };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(at(lo) < at(hi));
        }
    }
}
