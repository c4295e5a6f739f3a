//! Truncated normal draws for probit data augmentation.

use rand::Rng;
use rand_distr::StandardNormal;

/// Sample from N(0,1) truncated to (a, infinity). Plain rejection when the
/// acceptance region covers at least half the mass, Robert's shifted
/// exponential proposal otherwise.
pub fn std_normal_lower(rng: &mut impl Rng, a: f64) -> f64 {
    if a <= 0.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z > a {
                return z;
            }
        }
    } else {
        let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let u: f64 = rng.random();
            let z = a - u.ln() / alpha;
            let d = z - alpha;
            let accept: f64 = rng.random();
            if accept <= (-0.5 * d * d).exp() {
                return z;
            }
        }
    }
}

/// Sample from N(mu, 1) truncated below by 0 when `positive`, above by 0
/// otherwise.
pub fn latent_draw(rng: &mut impl Rng, mu: f64, positive: bool) -> f64 {
    if positive {
        mu + std_normal_lower(rng, -mu)
    } else {
        mu - std_normal_lower(rng, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngStream;
    use crate::stats::norm_cdf;

    #[test]
    fn draws_respect_truncation_sign() {
        let mut rng = RngStream::new(1).rng();
        for i in 0..2000 {
            let mu = (i as f64 / 200.0) - 5.0;
            assert!(latent_draw(&mut rng, mu, true) > 0.0);
            assert!(latent_draw(&mut rng, mu, false) < 0.0);
        }
    }

    #[test]
    fn half_normal_mean() {
        // mean-zero predictor, positive truncation: E = sqrt(2/pi)
        let mut rng = RngStream::new(2).rng();
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| latent_draw(&mut rng, 0.0, true)).sum::<f64>() / n as f64;
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - want).abs() / want < 0.01, "mean {mean} want {want}");
    }

    /// KS test against an inverse-CDF oracle sampler.
    #[test]
    fn ks_against_inverse_cdf_oracle() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let mu = 1.3;
        let n = 20_000usize;
        let mut rng = RngStream::new(3).rng();
        let mut draws: Vec<f64> = (0..n).map(|_| latent_draw(&mut rng, mu, true)).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // truncated-normal CDF: F(x) = (Phi(x-mu) - Phi(-mu)) / (1 - Phi(-mu))
        let lo = norm_cdf(-mu);
        let norm = Normal::standard();
        let mut ks: f64 = 0.0;
        for (i, &x) in draws.iter().enumerate() {
            let f = (norm.cdf(x - mu) - lo) / (1.0 - lo);
            let e_hi = (i as f64 + 1.0) / n as f64;
            let e_lo = i as f64 / n as f64;
            ks = ks.max((f - e_hi).abs()).max((f - e_lo).abs());
        }
        // asymptotic Kolmogorov p-value
        let lambda = ks * (n as f64).sqrt();
        let p: f64 = 2.0
            * (1..100)
                .map(|k| {
                    let k = k as f64;
                    (-1.0f64).powi(k as i32 - 1) * (-2.0 * k * k * lambda * lambda).exp()
                })
                .sum::<f64>();
        assert!(p > 0.01, "KS statistic {ks}, p {p}");
    }
}
