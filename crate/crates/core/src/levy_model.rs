//! Bivariate Lévy laws of finite activity and their triplet-level transforms.
//!
//! A model is stored with its genuine drift `b`: the linear drift left after
//! the jumps are carried uncompensated. The location `γ` of the Lévy–Khintchine
//! triplet is the derived quantity `γ = b + ∫_{|z| ≤ 1} z ν(dz)`, where
//! `ν = jump_intensity · jump_law` and `|z|` is the Euclidean norm.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{GouError, Result};
use crate::jump_law::JumpLaw2;
use crate::quadrature::Tolerance;
use crate::scalar::{Real, Scalar};

/// Gaussian covariance per unit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCov<S> {
    pub uu: S,
    pub ul: S,
    pub ll: S,
}

impl<S: Scalar> GaussianCov<S> {
    pub fn zero() -> Self {
        Self {
            uu: S::zero(),
            ul: S::zero(),
            ll: S::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.uu == S::zero() && self.ul == S::zero() && self.ll == S::zero()
    }

    pub fn matrix(&self) -> [[S; 2]; 2] {
        [[self.uu.clone(), self.ul.clone()], [self.ul.clone(), self.ll.clone()]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyModel2<S> {
    drift: [S; 2],
    cov: GaussianCov<S>,
    jump_intensity: S,
    jump_law: JumpLaw2<S>,
}

/// Result of [`LevyModel2::detect_degeneracy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degeneracy<T> {
    pub k: T,
    /// Largest relative residual among the line conditions.
    pub residual: T,
}

impl<S: Scalar> LevyModel2<S> {
    pub fn new(drift: [S; 2], cov: GaussianCov<S>, jump_intensity: S, jump_law: JumpLaw2<S>) -> Result<Self> {
        if cov.uu < S::zero() || cov.ll < S::zero() {
            return Err(GouError::InvalidModel("negative Gaussian variance".into()));
        }
        let det = cov.uu.clone() * cov.ll.clone() - cov.ul.clone() * cov.ul.clone();
        let scale = cov.uu.clone() * cov.ll.clone() + cov.ul.clone() * cov.ul.clone();
        if det < -(S::constant(1e-12) * scale) {
            return Err(GouError::InvalidModel("Gaussian covariance is not positive semidefinite".into()));
        }
        if jump_intensity < S::zero() {
            return Err(GouError::InvalidModel("negative jump intensity".into()));
        }
        jump_law.validate()?;
        Ok(Self {
            drift,
            cov,
            jump_intensity,
            jump_law,
        })
    }

    /// The zero process.
    pub fn zero() -> Self {
        Self {
            drift: [S::zero(), S::zero()],
            cov: GaussianCov::zero(),
            jump_intensity: S::zero(),
            jump_law: JumpLaw2::none(),
        }
    }

    /// Deterministic linear drift `(b_U t, b_L t)`.
    pub fn drift_only(b_u: S, b_l: S) -> Self {
        Self {
            drift: [b_u, b_l],
            ..Self::zero()
        }
    }

    pub fn drift(&self) -> &[S; 2] {
        &self.drift
    }

    pub fn cov(&self) -> &GaussianCov<S> {
        &self.cov
    }

    pub fn jump_intensity(&self) -> &S {
        &self.jump_intensity
    }

    pub fn jump_law(&self) -> &JumpLaw2<S> {
        &self.jump_law
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_intensity > S::zero()
    }

    pub fn has_gaussian(&self) -> bool {
        !self.cov.is_zero()
    }

    /// ΔU > -1 almost surely.
    pub fn condition_b(&self) -> bool {
        !self.has_jumps() || self.jump_law.above_minus_one()
    }

    /// L has nondecreasing paths.
    pub fn l_is_subordinator(&self) -> bool {
        self.cov.ll == S::zero()
            && self.drift[1] >= S::zero()
            && (!self.has_jumps() || self.jump_law.dl_nonnegative())
    }

    /// -L has nondecreasing paths.
    pub fn neg_l_is_subordinator(&self) -> bool {
        self.cov.ll == S::zero()
            && self.drift[1] <= S::zero()
            && (!self.has_jumps() || self.jump_law.dl_nonpositive())
    }

    /// Law of the dual pair `(W, K)`.
    ///
    /// Jumps map by `(u, l) -> (-u / (1 + u), -l / (1 + u))`, the genuine drift
    /// by `b_W = -b_U + σ_U²`, `b_K = -b_L + σ_UL`, and the Gaussian part is
    /// unchanged.
    pub fn dual(&self) -> Result<Self> {
        if !self.condition_b() {
            return Err(GouError::ConditionB(
                "the dual pair exists only when every jump of U is > -1".into(),
            ));
        }
        let jump_law = if self.has_jumps() {
            self.jump_law.dual()?
        } else {
            self.jump_law.clone()
        };
        Ok(Self {
            drift: [
                -self.drift[0].clone() + self.cov.uu.clone(),
                -self.drift[1].clone() + self.cov.ul.clone(),
            ],
            cov: self.cov.clone(),
            jump_intensity: self.jump_intensity.clone(),
            jump_law,
        })
    }

    /// `E ∫_{|z|≤1} z ν(dz)` computed exactly for discrete jump laws.
    pub fn small_jump_mean_exact(&self) -> Option<[S; 2]> {
        let mut acc = [S::zero(), S::zero()];
        if !self.has_jumps() {
            return Some(acc);
        }
        for a in self.jump_law.atoms()? {
            if a.du.clone() * a.du.clone() + a.dl.clone() * a.dl.clone() <= S::one() {
                let w = self.jump_intensity.clone() * a.p.clone();
                acc[0] = acc[0].clone() + w.clone() * a.du.clone();
                acc[1] = acc[1].clone() + w * a.dl.clone();
            }
        }
        Some(acc)
    }

    /// Triplet location for discrete jump laws, in exact arithmetic.
    pub fn gamma_location_exact(&self) -> Option<[S; 2]> {
        let m = self.small_jump_mean_exact()?;
        Some([
            self.drift[0].clone() + m[0].clone(),
            self.drift[1].clone() + m[1].clone(),
        ])
    }

    /// Inverse of [`Self::gamma_location_exact`].
    pub fn from_gamma_location_exact(
        gamma: [S; 2],
        cov: GaussianCov<S>,
        jump_intensity: S,
        jump_law: JumpLaw2<S>,
    ) -> Result<Self> {
        let probe = Self::new([S::zero(), S::zero()], cov, jump_intensity, jump_law)?;
        let m = probe
            .small_jump_mean_exact()
            .ok_or_else(|| GouError::InvalidArgument("exact conversion needs a discrete jump law".into()))?;
        Ok(Self {
            drift: [gamma[0].clone() - m[0].clone(), gamma[1].clone() - m[1].clone()],
            ..probe
        })
    }

    pub fn map_scalar<S2: Scalar>(&self, f: &dyn Fn(&S) -> S2) -> LevyModel2<S2> {
        LevyModel2 {
            drift: [f(&self.drift[0]), f(&self.drift[1])],
            cov: GaussianCov {
                uu: f(&self.cov.uu),
                ul: f(&self.cov.ul),
                ll: f(&self.cov.ll),
            },
            jump_intensity: f(&self.jump_intensity),
            jump_law: self.jump_law.map_scalar(f),
        }
    }
}

impl<'de, S> Deserialize<'de> for LevyModel2<S>
where
    S: Scalar + Deserialize<'de>,
{
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw<S> {
            drift: [S; 2],
            cov: GaussianCov<S>,
            jump_intensity: S,
            jump_law: JumpLaw2<S>,
        }
        let raw = Raw::<S>::deserialize(d)?;
        LevyModel2::new(raw.drift, raw.cov, raw.jump_intensity, raw.jump_law).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> LevyModel2<T> {
    fn check_theta(theta: [T; 2]) -> Result<()> {
        if theta.iter().all(|t| t.is_finite()) {
            Ok(())
        } else {
            Err(GouError::NonFinite("theta".into()))
        }
    }

    fn gaussian_quadratic(&self, theta: [T; 2]) -> T {
        let c = &self.cov;
        c.uu * theta[0] * theta[0] + T::lit(2.0) * c.ul * theta[0] * theta[1] + c.ll * theta[1] * theta[1]
    }

    /// `ψ(θ)` with `E exp(i θ·(U_t, L_t)) = exp(t ψ(θ))`, in genuine-drift form
    /// `i θ·b - θᵀΣθ / 2 + λ E[e^{i θ·Z} - 1]`.
    pub fn characteristic_exponent(&self, theta: [T; 2], tol: Tolerance) -> Result<Complex<T>> {
        Self::check_theta(theta)?;
        let lin = theta[0] * self.drift[0] + theta[1] * self.drift[1];
        let mut psi = Complex::new(-self.gaussian_quadratic(theta) * T::lit(0.5), lin);
        if self.has_jumps() {
            let e = self.jump_law.expect(
                &mut |u, l| Complex::new(T::zero(), theta[0] * u + theta[1] * l).exp() - T::one(),
                tol,
            )?;
            psi = psi + e * self.jump_intensity;
        }
        Ok(psi)
    }

    /// The same exponent written with the triplet location,
    /// `i θ·γ - θᵀΣθ / 2 + λ E[e^{i θ·Z} - 1 - i θ·Z 1{|Z| ≤ 1}]`.
    pub fn characteristic_exponent_compensated(&self, theta: [T; 2], tol: Tolerance) -> Result<Complex<T>> {
        Self::check_theta(theta)?;
        let gamma = self.gamma_location(tol)?;
        let lin = theta[0] * gamma[0] + theta[1] * gamma[1];
        let mut psi = Complex::new(-self.gaussian_quadratic(theta) * T::lit(0.5), lin);
        if self.has_jumps() {
            let law = &self.jump_law;
            let phase = |u: T, l: T| Complex::new(T::zero(), theta[0] * u + theta[1] * l);
            let ball = [T::one(), T::zero(), -T::one()];
            let inside = law.expect_in_region(&mut |u, l| phase(u, l).exp() - T::one() - phase(u, l), ball, tol)?;
            let all = law.expect(&mut |u, l| phase(u, l).exp() - T::one(), tol)?;
            let inside_plain = law.expect_in_region(&mut |u, l| phase(u, l).exp() - T::one(), ball, tol)?;
            psi = psi + (inside + all - inside_plain) * self.jump_intensity;
        }
        Ok(psi)
    }

    fn small_jump_mean(&self, tol: Tolerance) -> Result<[T; 2]> {
        if !self.has_jumps() {
            return Ok([T::zero(); 2]);
        }
        let ball = [T::one(), T::zero(), -T::one()];
        let mu = self.jump_law.expect_in_region(&mut |u, l| Complex::new(u, l), ball, tol)?;
        Ok([mu.re * self.jump_intensity, mu.im * self.jump_intensity])
    }

    /// Triplet location `γ = b + ∫_{|z|≤1} z ν(dz)` (Euclidean truncation).
    pub fn gamma_location(&self, tol: Tolerance) -> Result<[T; 2]> {
        let m = self.small_jump_mean(tol)?;
        Ok([self.drift[0] + m[0], self.drift[1] + m[1]])
    }

    pub fn from_gamma_location(
        gamma: [T; 2],
        cov: GaussianCov<T>,
        jump_intensity: T,
        jump_law: JumpLaw2<T>,
        tol: Tolerance,
    ) -> Result<Self> {
        let probe = Self::new([T::zero(); 2], cov, jump_intensity, jump_law)?;
        let m = probe.small_jump_mean(tol)?;
        Ok(Self {
            drift: [gamma[0] - m[0], gamma[1] - m[1]],
            ..probe
        })
    }

    /// Location of U alone as a univariate Lévy process, `b_U + ∫_{|u|≤1} u ν_U(du)`.
    pub fn gamma_u(&self, tol: Tolerance) -> Result<T> {
        if !self.has_jumps() {
            return Ok(self.drift[0]);
        }
        let m = self.jump_law.expect(
            &mut |u, _| Complex::new(if u.abs() <= T::one() { u } else { T::zero() }, T::zero()),
            tol,
        )?;
        Ok(self.drift[0] + m.re * self.jump_intensity)
    }

    /// Location of W from the triplet of U:
    /// `-γ_U + σ_U² + ∫ (z 1{|z|≤1} - z/(1+z) 1{z ≥ -1/2}) ν_U(dz)`.
    pub fn dual_gamma_u_from_triplet(&self, tol: Tolerance) -> Result<T> {
        if !self.condition_b() {
            return Err(GouError::ConditionB("W is defined only when ΔU > -1".into()));
        }
        let gamma_u = self.gamma_u(tol)?;
        let mut correction = T::zero();
        if self.has_jumps() {
            let half = T::lit(-0.5);
            correction = self
                .jump_law
                .expect(
                    &mut |z, _| {
                        let a = if z.abs() <= T::one() { z } else { T::zero() };
                        let b = if z >= half { z / (T::one() + z) } else { T::zero() };
                        Complex::new(a - b, T::zero())
                    },
                    tol,
                )?
                .re
                * self.jump_intensity;
        }
        Ok(-gamma_u + self.cov.uu + correction)
    }

    /// Detects `k U = -L` almost surely for some `k != 0`.
    ///
    /// `k` is identified from the drift, then the jumps, then the Gaussian
    /// part; all three line conditions must hold to relative tolerance `tol`.
    /// A model with `U ≡ 0` has no identifiable `k` and yields `None`.
    pub fn detect_degeneracy(&self, tol: T) -> Option<Degeneracy<T>> {
        let [bu, bl] = self.drift;
        let c = &self.cov;
        let atoms = if self.has_jumps() { self.jump_law.atoms() } else { Some(Vec::new()) };
        let k = if bu != T::zero() {
            -bl / bu
        } else if let Some(a) = atoms.as_ref().and_then(|v| v.iter().find(|a| a.p > T::zero() && a.du != T::zero())) {
            -a.dl / a.du
        } else if c.uu > T::zero() {
            -c.ul / c.uu
        } else if self.has_jumps() && atoms.is_none() {
            match &self.jump_law {
                JumpLaw2::Linked { slope, .. } => -*slope,
                JumpLaw2::DualOf { inner } => match inner.as_ref() {
                    JumpLaw2::Linked { slope, .. } => -*slope,
                    _ => return None,
                },
                _ => return None,
            }
        } else {
            return None;
        };
        if k == T::zero() || !k.is_finite() {
            return None;
        }
        let rel = |a: T, b: T| {
            let scale = a.abs().max(b.abs());
            if scale == T::zero() {
                T::zero()
            } else {
                (a - b).abs() / scale
            }
        };
        let mut residual = rel(k * bu, -bl);
        residual = residual.max(rel(c.ll, k * k * c.uu));
        residual = residual.max(rel(c.ul, -k * c.uu));
        if self.has_jumps() {
            residual = residual.max(self.jump_law.line_residual(k)?);
        }
        (residual <= tol).then_some(Degeneracy { k, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_law::Marginal;
    use num_rational::BigRational;
    use num_traits::FromPrimitive;

    type M = LevyModel2<f64>;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn approx(a: Complex<f64>, b: Complex<f64>, eps: f64) -> bool {
        (a - b).norm() <= eps
    }

    #[test]
    fn exponent_trivial_cases() {
        let z = M::zero();
        assert_eq!(z.characteristic_exponent([0.7, -1.3], tol()).unwrap(), Complex::new(0.0, 0.0));
        let d = M::drift_only(1.0, 0.0);
        assert!(approx(d.characteristic_exponent([1.0, 0.0], tol()).unwrap(), Complex::new(0.0, 1.0), 1e-15));
        let g = M::new(
            [0.0, 0.0],
            GaussianCov {
                uu: 1.0,
                ul: 0.0,
                ll: 0.0,
            },
            0.0,
            JumpLaw2::none(),
        )
        .unwrap();
        assert!(approx(g.characteristic_exponent([1.0, 0.0], tol()).unwrap(), Complex::new(-0.5, 0.0), 1e-15));
        assert!(z.characteristic_exponent([f64::NAN, 0.0], tol()).is_err());
    }

    #[test]
    fn exponent_of_poisson_jumps() {
        // λ (e^{iθ} - 1) for unit jumps in U
        let m = M::new([0.0, 0.0], GaussianCov::zero(), 2.0, JumpLaw2::point_mass(vec![(1.0, 0.0, 1.0)])).unwrap();
        let psi = m.characteristic_exponent([0.3, 5.0], tol()).unwrap();
        let want = (Complex::new(0.0, 0.3).exp() - 1.0) * 2.0;
        assert!(approx(psi, want, 1e-14));
    }

    #[test]
    fn exponential_jump_exponent_closed_form() {
        // E e^{iθX} for X ~ Exp(mean m) is 1 / (1 - iθm)
        let m = 0.8;
        let law = JumpLaw2::Independent {
            du: Marginal::atom(0.0),
            dl: Marginal::Exponential { mean: m, negative: false },
        };
        let model = M::new([0.0, 0.0], GaussianCov::zero(), 1.5, law).unwrap();
        let theta = 1.7;
        let psi = model.characteristic_exponent([0.0, theta], tol()).unwrap();
        let want = (Complex::new(1.0, 0.0) / Complex::new(1.0, -theta * m) - 1.0) * 1.5;
        assert!(approx(psi, want, 1e-9), "{psi} vs {want}");
    }

    #[test]
    fn compensated_form_agrees() {
        let models = vec![
            M::new(
                [0.3, -0.2],
                GaussianCov {
                    uu: 0.5,
                    ul: 0.1,
                    ll: 0.2,
                },
                1.3,
                JumpLaw2::point_mass(vec![(0.4, 0.5, 0.5), (2.0, -1.0, 0.3), (-0.6, 0.2, 0.2)]),
            )
            .unwrap(),
            M::new(
                [0.1, 0.4],
                GaussianCov::zero(),
                0.9,
                JumpLaw2::Independent {
                    du: Marginal::TruncatedGaussian {
                        mean: 0.2,
                        sd: 0.7,
                        low: Some(-0.95),
                        high: None,
                    },
                    dl: Marginal::Uniform { low: -1.5, high: 0.5 },
                },
            )
            .unwrap(),
        ];
        for m in models {
            for theta in [[0.5, -1.0], [2.0, 0.3]] {
                let a = m.characteristic_exponent(theta, tol()).unwrap();
                let b = m.characteristic_exponent_compensated(theta, tol()).unwrap();
                assert!(approx(a, b, 1e-8), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dual_unit_jump() {
        let m = M::new([0.0, 0.0], GaussianCov::zero(), 1.0, JumpLaw2::point_mass(vec![(1.0, 0.0, 1.0)])).unwrap();
        let d = m.dual().unwrap();
        assert_eq!(d.jump_law().atoms().unwrap()[0].du, -0.5);
    }

    #[test]
    fn dual_of_l_only_model_negates_l() {
        let law = JumpLaw2::Independent {
            du: Marginal::atom(0.0),
            dl: Marginal::Exponential { mean: 1.0, negative: false },
        };
        let m = M::new(
            [0.0, 0.7],
            GaussianCov {
                uu: 0.0,
                ul: 0.0,
                ll: 0.3,
            },
            2.0,
            law,
        )
        .unwrap();
        let d = m.dual().unwrap();
        assert_eq!(d.drift(), &[0.0, -0.7]);
        assert!(d.jump_law().dl_nonpositive());
        let theta = [0.4, 1.1];
        let a = d.characteristic_exponent(theta, tol()).unwrap();
        let b = m.characteristic_exponent([0.4, -1.1], tol()).unwrap();
        assert!(approx(a, b, 1e-9));
    }

    #[test]
    fn dual_rejects_condition_b_violation() {
        let m = M::new([0.0, 0.0], GaussianCov::zero(), 1.0, JumpLaw2::point_mass(vec![(-2.0, 0.0, 1.0)])).unwrap();
        assert!(matches!(m.dual(), Err(GouError::ConditionB(_))));
    }

    fn q(x: f64) -> BigRational {
        BigRational::from_f64(x).unwrap()
    }

    #[test]
    fn involution_is_exact_in_rationals() {
        let m = LevyModel2::new(
            [q(0.3), q(-1.25)],
            GaussianCov {
                uu: q(0.5),
                ul: q(0.125),
                ll: q(2.0),
            },
            q(1.5),
            JumpLaw2::point_mass(vec![(q(0.1), q(0.7), q(0.25)), (q(-0.9), q(3.0), q(0.75))]),
        )
        .unwrap();
        assert_eq!(m.dual().unwrap().dual().unwrap(), m);
    }

    #[test]
    fn dual_exponent_matches_hand_built_law() {
        let m = M::new(
            [0.2, 0.1],
            GaussianCov {
                uu: 0.3,
                ul: -0.1,
                ll: 0.4,
            },
            1.2,
            JumpLaw2::point_mass(vec![(0.5, 1.0, 0.5), (-0.5, 2.0, 0.5)]),
        )
        .unwrap();
        let hand = M::new(
            [-0.2 + 0.3, -0.1 - 0.1],
            m.cov().clone(),
            1.2,
            JumpLaw2::point_mass(vec![(-0.5 / 1.5, -1.0 / 1.5, 0.5), (1.0, -4.0, 0.5)]),
        )
        .unwrap();
        let theta = [0.9, -0.4];
        let a = m.dual().unwrap().characteristic_exponent(theta, tol()).unwrap();
        let b = hand.characteristic_exponent(theta, tol()).unwrap();
        assert!(approx(a, b, 1e-14));
    }

    #[test]
    fn gamma_round_trip_exact() {
        let law = JumpLaw2::point_mass(vec![(q(0.5), q(0.5), q(0.5)), (q(2.0), q(0.0), q(0.5))]);
        let m = LevyModel2::new([q(1.0), q(-1.0)], GaussianCov::zero(), q(2.0), law.clone()).unwrap();
        let g = m.gamma_location_exact().unwrap();
        // only the first atom lies in the unit ball: 2 * 0.5 * (0.5, 0.5)
        assert_eq!(g, [q(1.5), q(-0.5)]);
        let back = LevyModel2::from_gamma_location_exact(g, GaussianCov::zero(), q(2.0), law).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn gamma_round_trip_continuous() {
        let law = JumpLaw2::Linked {
            du: Marginal::Uniform { low: -0.8, high: 1.6 },
            slope: 0.5,
            intercept: -0.2,
        };
        let m = M::new([0.4, 0.9], GaussianCov::zero(), 1.7, law.clone()).unwrap();
        let g = m.gamma_location(tol()).unwrap();
        let back = M::from_gamma_location(g, GaussianCov::zero(), 1.7, law, tol()).unwrap();
        assert!((back.drift()[0] - 0.4).abs() < 1e-12 && (back.drift()[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn w_location_from_triplet_matches_drift_form() {
        let models = vec![
            M::new(
                [0.3, 0.0],
                GaussianCov {
                    uu: 0.25,
                    ul: 0.0,
                    ll: 0.0,
                },
                2.0,
                JumpLaw2::point_mass(vec![(-0.7, 0.0, 0.3), (-0.4, 0.0, 0.2), (0.6, 1.0, 0.3), (3.0, 0.0, 0.2)]),
            )
            .unwrap(),
            M::new(
                [-0.1, 0.2],
                GaussianCov::zero(),
                1.0,
                JumpLaw2::Independent {
                    du: Marginal::Uniform { low: -0.9, high: 2.5 },
                    dl: Marginal::atom(0.0),
                },
            )
            .unwrap(),
        ];
        for m in models {
            let from_triplet = m.dual_gamma_u_from_triplet(tol()).unwrap();
            let from_drift = m.dual().unwrap().gamma_u(tol()).unwrap();
            assert!((from_triplet - from_drift).abs() < 1e-9, "{from_triplet} vs {from_drift}");
        }
    }

    #[test]
    fn ball_region_on_dual_law_matches_indicator() {
        let inner = JumpLaw2::Linked {
            du: Marginal::Uniform { low: -0.9, high: 3.0 },
            slope: -0.7,
            intercept: 0.4,
        };
        let law = inner.dual().unwrap();
        let ball = [1.0, 0.0, -1.0];
        let fast = law.expect_in_region(&mut |u, l| Complex::new(u, l), ball, tol()).unwrap();
        let slow = law
            .expect(
                &mut |u, l| {
                    if u * u + l * l <= 1.0 {
                        Complex::new(u, l)
                    } else {
                        Complex::new(0.0, 0.0)
                    }
                },
                tol(),
            )
            .unwrap();
        assert!((fast - slow).norm() < 1e-8, "{fast} vs {slow}");
    }

    #[test]
    fn degeneracy_examples() {
        let a = M::drift_only(1.0, -2.0);
        assert!((a.detect_degeneracy(1e-9).unwrap().k - 2.0).abs() < 1e-15);

        let b = M::new(
            [0.0, 0.0],
            GaussianCov {
                uu: 1.0,
                ul: 0.0,
                ll: 1.0,
            },
            0.0,
            JumpLaw2::none(),
        )
        .unwrap();
        assert!(b.detect_degeneracy(1e-9).is_none());

        let c = M::new([0.5, -1.5], GaussianCov::zero(), 1.0, JumpLaw2::point_mass(vec![(1.0, -3.0, 1.0)])).unwrap();
        assert!((c.detect_degeneracy(1e-9).unwrap().k - 3.0).abs() < 1e-15);

        let off = M::new([0.5, -1.5], GaussianCov::zero(), 1.0, JumpLaw2::point_mass(vec![(1.0, -2.9, 1.0)])).unwrap();
        assert!(off.detect_degeneracy(1e-9).is_none());

        let gauss = M::new(
            [1.0, -2.0],
            GaussianCov {
                uu: 0.25,
                ul: -0.5,
                ll: 1.0,
            },
            0.0,
            JumpLaw2::none(),
        )
        .unwrap();
        assert!(gauss.detect_degeneracy(1e-9).is_some());
        assert!(M::zero().detect_degeneracy(1e-9).is_none());
    }

    #[test]
    fn degenerate_dual_keeps_k() {
        let m = M::new(
            [0.5, -1.0],
            GaussianCov::zero(),
            1.5,
            JumpLaw2::point_mass(vec![(0.5, -1.0, 0.5), (-0.4, 0.8, 0.3), (1.5, -3.0, 0.2)]),
        )
        .unwrap();
        let k = m.detect_degeneracy(1e-9).unwrap().k;
        let kd = m.dual().unwrap().detect_degeneracy(1e-9).unwrap().k;
        assert!((k - 2.0).abs() < 1e-15 && (kd - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_covariance() {
        let bad = M::new(
            [0.0, 0.0],
            GaussianCov {
                uu: 1.0,
                ul: 2.0,
                ll: 1.0,
            },
            0.0,
            JumpLaw2::none(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn subordinator_flags() {
        let law = JumpLaw2::Independent {
            du: Marginal::atom(1.0),
            dl: Marginal::Exponential { mean: 0.5, negative: false },
        };
        let m = M::new([-1.0, 0.2], GaussianCov::zero(), 2.0, law).unwrap();
        assert!(m.l_is_subordinator());
        assert!(!m.neg_l_is_subordinator());
        assert!(m.dual().unwrap().neg_l_is_subordinator());
    }
}
