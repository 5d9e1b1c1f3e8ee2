use super::observation::ObjectState;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Symmetric 2×2 covariance `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance2 {
    pub fn isotropic(var: f64) -> Self {
        Self { xx: var, xy: 0.0, yy: var }
    }

    pub fn is_psd(&self) -> bool {
        self.xx >= 0.0 && self.yy >= 0.0 && self.xx * self.yy - self.xy * self.xy >= -1e-12
    }

    /// Lower Cholesky factor, tolerating singular (semi-definite) inputs.
    fn cholesky(&self) -> [[f64; 2]; 2] {
        let l11 = self.xx.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.xy / l11 } else { 0.0 };
        let l22 = (self.yy - l21 * l21).max(0.0).sqrt();
        [[l11, 0.0], [l21, l22]]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        let l = self.cholesky();
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        Vec2::new(l[0][0] * z0, l[1][0] * z0 + l[1][1] * z1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub position_cov: Covariance2,
    pub velocity_cov: Covariance2,
    /// Mean fraction of the true radius that is perceived, in (0, 1].
    pub r_mean: f64,
    /// von Mises concentration of the radius noise.
    pub kappa: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !self.position_cov.is_psd() || !self.velocity_cov.is_psd() {
            return Err(Error::Config("noise covariances must be positive semidefinite".into()));
        }
        if !(self.r_mean > 0.0 && self.r_mean <= 1.0) || self.kappa.is_nan() || self.kappa <= 0.0 {
            return Err(Error::Config(format!("invalid radius noise r_mean={} kappa={}", self.r_mean, self.kappa)));
        }
        Ok(())
    }

    /// Perceived radius for a von Mises draw `w` in `[-π, π]`.
    pub fn radius(&self, true_radius: f64, w: f64) -> f64 {
        true_radius * (self.r_mean + (1.0 - self.r_mean) * w / PI)
    }
}

/// Draws from the von Mises distribution centred on zero (Best–Fisher
/// rejection sampler). Returns values in `[-π, π]`.
pub fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa > 1e6 {
        let z: f64 = StandardNormal.sample(rng);
        return (z / kappa.sqrt()).clamp(-PI, PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 < 0.5 { -theta } else { theta };
        }
    }
}

pub fn inject_noise<R: Rng + ?Sized>(objects: &[ObjectState], model: &NoiseModel, rng: &mut R) -> Vec<ObjectState> {
    objects
        .iter()
        .map(|o| {
            let wp = model.position_cov.sample(rng);
            let wv = model.velocity_cov.sample(rng);
            let wr = sample_von_mises(model.kappa, rng);
            ObjectState { position: o.position + wp, velocity: o.velocity + wv, radius: model.radius(o.radius, wr) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn object() -> ObjectState {
        ObjectState { position: Vec2::new(4.0, -1.0), velocity: Vec2::new(1.0, 0.5), radius: 2.0 }
    }

    #[test]
    fn degenerate_noise() {
        let model = NoiseModel {
            position_cov: Covariance2::isotropic(0.0),
            velocity_cov: Covariance2::isotropic(0.0),
            r_mean: 0.8,
            kappa: 1e12,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let o = inject_noise(&[object()], &model, &mut rng)[0];
        assert_eq!(o.position, object().position);
        assert_eq!(o.velocity, object().velocity);
        assert!((o.radius - 1.6).abs() < 1e-5);
    }

    #[test]
    fn radius_never_exceeds_truth_and_mean_matches() {
        let model = NoiseModel {
            position_cov: Covariance2::isotropic(0.25),
            velocity_cov: Covariance2::isotropic(0.09),
            r_mean: 0.8,
            kappa: 4.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let w = sample_von_mises(model.kappa, &mut rng);
            assert!((-PI..=PI).contains(&w));
            let r = model.radius(2.0, w);
            assert!(r <= 2.0);
            sum += r;
        }
        let mean = sum / n as f64;
        assert!((mean - 1.6).abs() <= 0.016, "mean {mean}");
    }

    #[test]
    fn von_mises_concentration() {
        // E[cos w] = I1(κ)/I0(κ); for κ = 4 that is ≈ 0.86352 (series evaluation below)
        let bessel = |nu: i32, x: f64| {
            (0..40)
                .map(|k| {
                    let k = k as f64;
                    let lg = |n: f64| (1..=(n as usize)).map(|i| (i as f64).ln()).sum::<f64>();
                    ((2.0 * k + nu as f64) * (x / 2.0).ln() - lg(k) - lg(k + nu as f64)).exp()
                })
                .sum::<f64>()
        };
        let expected = bessel(1, 4.0) / bessel(0, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let m = (0..n).map(|_| sample_von_mises(4.0, &mut rng).cos()).sum::<f64>() / n as f64;
        assert!((m - expected).abs() < 0.005, "{m} vs {expected}");
    }

    #[test]
    fn covariance_validation() {
        let mut m = NoiseModel {
            position_cov: Covariance2 { xx: 1.0, xy: 2.0, yy: 1.0 },
            velocity_cov: Covariance2::isotropic(0.1),
            r_mean: 0.8,
            kappa: 4.0,
        };
        assert!(m.validate().is_err());
        m.position_cov = Covariance2::isotropic(0.25);
        assert!(m.validate().is_ok());
        m.kappa = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn correlated_sampling_covariance() {
        let cov = Covariance2 { xx: 0.5, xy: 0.2, yy: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = cov.sample(&mut rng);
            sxx += v.x * v.x;
            sxy += v.x * v.y;
            syy += v.y * v.y;
        }
        let n = n as f64;
        assert!((sxx / n - 0.5).abs() < 0.01 && (sxy / n - 0.2).abs() < 0.01 && (syy / n - 0.3).abs() < 0.01);
    }
}
