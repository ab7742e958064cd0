//! Special functions: sinc, Bessel J0/J1, modified Bessel K_ν and gamma.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
// Coefficient of z^4 in the Taylor series of 1/Γ(z).
const RGAMMA_C4: f64 = -0.042_002_635_034_095_2;

/// `sin(x)/x`, equal to 1 at the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `2 J1(x)/x`, the Fourier transform of a unit disc up to scale.
pub fn jinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 8.0
    } else {
        2.0 * bessel_j1(x) / x
    }
}

/// Modified Bessel function of the second kind `K_ν(x)` for `x > 0`.
///
/// Temme's series for `x < 2`, Steed's continued fraction otherwise, then
/// upward recurrence from `|μ| ≤ 1/2`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k needs x > 0");
    let nu = nu.abs();
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut k_mu, mut k_mu1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < 1e-16 { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < 1e-16 { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..500 {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        k_mu = sum;
        k_mu1 = sum1 * xi2;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..10_000 {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < 1e-17 {
                break;
            }
        }
        h *= a1;
        k_mu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        k_mu1 = k_mu * (mu + x + 0.5 - h) * xi;
    }
    for i in 1..=nl {
        let next = (mu + i as f64) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    k_mu
}

/// `(Γ1, Γ2, 1/Γ(1+μ), 1/Γ(1−μ))` for Temme's series, `|μ| ≤ 1/2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / gamma(1.0 + mu);
    let gammi = 1.0 / gamma(1.0 - mu);
    let gam1 = if mu.abs() < 1e-4 {
        -(EULER_GAMMA + RGAMMA_C4 * mu * mu)
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    let gam2 = 0.5 * (gammi + gampl);
    (gam1, gam2, gampl, gammi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn bessel_k_reference_values() {
        let cases = [
            (0.0, 0.1, 2.427_069_024_702_016_4),
            (0.0, 1.0, 0.421_024_438_240_708_34),
            (0.3, 0.5, 0.976_474_124_381_787_9),
            (0.5, 2.0, 0.119_937_771_968_061_45),
            (1.0, 1.5, 0.277_387_800_456_843_8),
            (1.7, 0.05, 240.148_120_720_966_23),
            (2.5, 3.0, 0.084_060_631_974_117_38),
            (2.5, 10.0, 0.000_023_931_325_864_627_89),
            (3.3, 2.0, 0.908_574_251_808_749_3),
            (0.75, 25.0, 3.502_594_731_654_065_6e-12),
            (1.0000001, 1.0, 0.601_907_272_299_681_8),
            (4.0, 0.7, 191.994_207_323_531_5),
        ];
        for (nu, x, want) in cases {
            let got = bessel_k(nu, x);
            assert!(rel(got, want) < 1e-12, "K_{nu}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn bessel_k_half_integer_closed_form() {
        for &x in &[0.01, 0.3, 1.0, 2.0, 2.5, 7.0, 40.0] {
            let k05 = (PI / (2.0 * x)).sqrt() * (-x).exp();
            assert!(rel(bessel_k(0.5, x), k05) < 1e-13);
            let k25 = k05 * (1.0 + 3.0 / x + 3.0 / (x * x));
            assert!(rel(bessel_k(2.5, x), k25) < 1e-13);
        }
    }

    #[test]
    fn bessel_j_reference_values() {
        let cases = [
            (0.5, 0.938_469_807_240_812_9, 0.242_268_457_674_873_9),
            (3.0, -0.260_051_954_901_933_45, 0.339_058_958_525_936_5),
            (10.0, -0.245_935_764_451_348_35, 0.043_472_746_168_861_44),
            (30.0, -0.086_367_983_581_040_21, -0.118_751_062_616_622_94),
        ];
        for (x, j0, j1) in cases {
            assert!((bessel_j0(x) - j0).abs() < 1e-14);
            assert!((bessel_j1(x) - j1).abs() < 1e-14);
        }
        assert_eq!(bessel_j1(0.0), 0.0);
        assert_eq!(jinc(0.0), 1.0);
    }

    #[test]
    fn sinc_is_smooth_at_origin() {
        assert_eq!(sinc(0.0), 1.0);
        let x = 1.0001e-4;
        assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
        assert!((sinc(9.9e-5) - (9.9e-5f64).sin() / 9.9e-5).abs() < 1e-15);
    }
}
