//! Combustion-type reaction nonlinearities: a bump beta supported on [0, 1]
//! with total mass M, its eps-rescaling beta_eps(t) = beta(t/eps)/eps, and
//! the primitives.

use crate::error::{Error, Result};

/// Registered reaction shapes. Each has unit mass before scaling by M and a
/// closed-form primitive, so no quadrature runs in the solver hot loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// beta(t) = 6 t (1 - t)
    Poly6,
    /// beta(t) = 30 t^2 (1 - t)^2
    Quartic30,
}

/// A reaction profile: nonnegative bump on [0, 1] of mass M, positive on
/// (0, 1), Lipschitz, with primitive rising from 0 to M.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReactionProfile {
    pub kind: ProfileKind,
    pub mass: f64,
}

impl ReactionProfile {
    pub fn new(kind: ProfileKind, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid_parameter(format!(
                "reaction mass must be positive, got {mass}"
            )));
        }
        Ok(ReactionProfile { kind, mass })
    }

    /// Default profile beta(t) = 6 M t (1 - t).
    pub fn poly6(mass: f64) -> Result<Self> {
        Self::new(ProfileKind::Poly6, mass)
    }

    /// Alternative profile beta(t) = 30 M t^2 (1 - t)^2.
    pub fn quartic30(mass: f64) -> Result<Self> {
        Self::new(ProfileKind::Quartic30, mass)
    }

    pub fn by_name(name: &str, mass: f64) -> Result<Self> {
        match name {
            "poly6" => Self::poly6(mass),
            "quartic30" => Self::quartic30(mass),
            other => Err(Error::invalid_parameter(format!(
                "unknown reaction profile '{other}' (registered: poly6, quartic30)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Poly6 => "poly6",
            ProfileKind::Quartic30 => "quartic30",
        }
    }

    /// Common bound A for sup|beta| and the Lipschitz constant of beta.
    pub fn lipschitz_bound(&self) -> f64 {
        match self.kind {
            // sup|beta'| = 6M at the endpoints, sup|beta| = 1.5M
            ProfileKind::Poly6 => 6.0 * self.mass,
            // sup|beta'| = 30M * 2/(6 sqrt(3)) * 2 = 10 M / sqrt(3) ~ 5.77M
            ProfileKind::Quartic30 => 10.0 * self.mass / 3.0f64.sqrt(),
        }
    }

    pub fn beta(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Poly6 => 6.0 * self.mass * t * (1.0 - t),
            ProfileKind::Quartic30 => {
                let u = t * (1.0 - t);
                30.0 * self.mass * u * u
            }
        }
    }

    pub fn beta_prime(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Poly6 => 6.0 * self.mass * (1.0 - 2.0 * t),
            ProfileKind::Quartic30 => 60.0 * self.mass * t * (1.0 - t) * (1.0 - 2.0 * t),
        }
    }

    /// Primitive B(t) = int_0^t beta; equals 0 for t <= 0 and M for t >= 1.
    pub fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return self.mass;
        }
        match self.kind {
            ProfileKind::Poly6 => self.mass * t * t * (3.0 - 2.0 * t),
            ProfileKind::Quartic30 => {
                self.mass * t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
            }
        }
    }

    /// beta_eps(t) = beta(t/eps) / eps; support [0, eps].
    pub fn beta_eps(&self, eps: f64, t: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.beta(t / eps) / eps)
    }

    /// d/dt beta_eps(t) = beta'(t/eps) / eps^2, used by the Newton
    /// linearization on the thin row.
    pub fn beta_eps_prime(&self, eps: f64, t: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.beta_prime(t / eps) / (eps * eps))
    }

    /// B_eps(t) = int_0^t beta_eps = B(t/eps); in [0, M].
    pub fn b_eps(&self, eps: f64, t: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.primitive(t / eps))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid_parameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        // composite Simpson with n (even) panels
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn default_profile_values() {
        let p = ReactionProfile::poly6(1.0).unwrap();
        assert_eq!(p.beta(0.0), 0.0);
        assert_relative_eq!(p.beta(0.5), 1.5, max_relative = 1e-15);
        assert_relative_eq!(p.primitive(1.0), 1.0, max_relative = 1e-15);
        assert!(ReactionProfile::poly6(0.0).is_err());
        assert!(ReactionProfile::poly6(-2.0).is_err());
    }

    #[test]
    fn beta_eps_values() {
        let p = ReactionProfile::poly6(1.0).unwrap();
        assert_relative_eq!(p.beta_eps(0.1, 0.05).unwrap(), 15.0, max_relative = 1e-14);
        assert_eq!(p.beta_eps(0.1, 0.2).unwrap(), 0.0);
        assert_eq!(p.beta_eps(0.3, -1.0).unwrap(), 0.0);
        assert!(p.beta_eps(0.0, 0.1).is_err());
        assert!(p.beta_eps(-0.5, 0.1).is_err());
    }

    #[test]
    fn b_eps_values() {
        let p = ReactionProfile::poly6(1.0).unwrap();
        assert_relative_eq!(p.b_eps(0.1, 0.1).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(p.b_eps(0.1, 0.0).unwrap(), 0.0);
        // B(0.5) = 0.25 * (3 - 1) = 0.5; confirmed by quadrature of beta
        assert_relative_eq!(p.b_eps(0.1, 0.05).unwrap(), 0.5, max_relative = 1e-14);
        let q = simpson(|t| p.beta(t), 0.0, 0.5, 400);
        assert_relative_eq!(q, 0.5, epsilon = 1e-10);
        assert!(p.b_eps(-1.0, 0.1).is_err());
    }

    #[test]
    fn both_profiles_have_mass_m() {
        for mass in [1.0, 2.5] {
            for p in [
                ReactionProfile::poly6(mass).unwrap(),
                ReactionProfile::quartic30(mass).unwrap(),
            ] {
                let q = simpson(|t| p.beta(t), 0.0, 1.0, 2000);
                assert!((q - mass).abs() <= 1e-10, "{}: mass {q}", p.name());
                assert_relative_eq!(p.primitive(1.0), mass, max_relative = 1e-15);
                // support and positivity
                assert_eq!(p.beta(-0.1), 0.0);
                assert_eq!(p.beta(1.1), 0.0);
                assert!(p.beta(1e-6) > 0.0 && p.beta(1.0 - 1e-6) > 0.0);
            }
        }
    }

    #[test]
    fn lipschitz_and_sup_bounds_hold() {
        for p in [
            ReactionProfile::poly6(1.7).unwrap(),
            ReactionProfile::quartic30(1.7).unwrap(),
        ] {
            let a = p.lipschitz_bound();
            let n = 20_000;
            for i in 0..=n {
                let t = i as f64 / n as f64;
                assert!(p.beta(t) <= a + 1e-12);
                assert!(p.beta_prime(t).abs() <= a + 1e-9, "{} at t={t}", p.name());
            }
        }
    }

    #[test]
    fn quadrature_of_beta_eps_equals_mass() {
        let p = ReactionProfile::poly6(1.0).unwrap();
        for eps in [1.0, 0.1, 0.01] {
            let q = simpson(|t| p.beta_eps(eps, t).unwrap(), 0.0, eps, 4000);
            assert!((q - 1.0).abs() <= 1e-10, "eps={eps}: {q}");
        }
    }

    #[test]
    fn scaling_identity_pointwise() {
        // eps * beta_eps(eps * u) = beta(u) for every u
        let p = ReactionProfile::quartic30(2.0).unwrap();
        for eps in [1.0, 0.1, 0.004] {
            for i in 0..=50 {
                let u = -0.2 + 1.4 * i as f64 / 50.0;
                let lhs = eps * p.beta_eps(eps, eps * u).unwrap();
                assert_relative_eq!(lhs, p.beta(u), max_relative = 1e-13, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn by_name_registry() {
        assert_eq!(ReactionProfile::by_name("poly6", 1.0).unwrap().name(), "poly6");
        assert_eq!(
            ReactionProfile::by_name("quartic30", 1.0).unwrap().name(),
            "quartic30"
        );
        assert!(ReactionProfile::by_name("gauss", 1.0).is_err());
    }

    proptest! {
        #[test]
        fn b_eps_bounded_and_monotone(
            mass in 0.1f64..10.0,
            eps in 1e-4f64..10.0,
            t1 in -2.0f64..3.0,
            dt in 0.0f64..2.0,
        ) {
            let p = ReactionProfile::poly6(mass).unwrap();
            let a = p.b_eps(eps, t1).unwrap();
            let b = p.b_eps(eps, t1 + dt).unwrap();
            prop_assert!((0.0..=mass).contains(&a));
            prop_assert!(b + 1e-12 >= a);
        }

        #[test]
        fn beta_nonnegative_everywhere(t in -5.0f64..5.0) {
            let p = ReactionProfile::quartic30(1.0).unwrap();
            prop_assert!(p.beta(t) >= 0.0);
        }
    }
}
