//! Convex regularizers exposed through evaluation and a proximal map.
//!
//! `prox(t, v) = argmin_x { reg(x) + |x - v|^2 / (2t) }`.

use alloc::vec::Vec;

use crate::error::{check_dim, Error};
use crate::Vector;

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Zero,
    /// `weight * |x|_1`.
    L1 { weight: f64 },
    /// `weight * |x - center|_inf`; `center` defaults to the origin.
    LInf { weight: f64, center: Option<Vector> },
    /// 0 on the closed ball, `+inf` outside.
    IndicatorBall { center: Vector, radius: f64 },
    /// 0 on the box `lo <= x <= hi`, `+inf` outside.
    IndicatorBox { lo: Vector, hi: Vector },
}

impl Default for Regularizer {
    fn default() -> Self {
        Regularizer::Zero
    }
}

impl Regularizer {
    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    /// Checks parameters and that the regularizer acts on vectors of length `dim`.
    pub fn validate(&self, dim: usize) -> Result<(), Error> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        match self {
            Regularizer::Zero => Ok(()),
            Regularizer::L1 { weight } if !(*weight >= 0.0 && weight.is_finite()) => {
                bad("l1 weight must be nonnegative")
            }
            Regularizer::L1 { .. } => Ok(()),
            Regularizer::LInf { weight, .. } if !(*weight >= 0.0 && weight.is_finite()) => {
                bad("linf weight must be nonnegative")
            }
            Regularizer::LInf { center, .. } => match center {
                Some(c) => check_dim("linf center", dim, c.len()),
                None => Ok(()),
            },
            Regularizer::IndicatorBall { radius, .. } if !(*radius > 0.0) => {
                bad("ball radius must be positive")
            }
            Regularizer::IndicatorBall { center, .. } => check_dim("ball center", dim, center.len()),
            Regularizer::IndicatorBox { lo, hi } => {
                check_dim("box lower bound", dim, lo.len())?;
                check_dim("box upper bound", dim, hi.len())?;
                if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
                    return bad("box bounds must satisfy lo <= hi");
                }
                Ok(())
            }
        }
    }

    /// Value at `x`; `+inf` outside the domain of an indicator.
    pub fn evaluate(&self, x: &Vector) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * x.lp_norm(1),
            Regularizer::LInf { weight, center } => match center {
                Some(c) => weight * (x - c).amax(),
                None => weight * x.amax(),
            },
            Regularizer::IndicatorBall { center, radius } => {
                // Projections land on the sphere only up to rounding.
                if (x - center).norm() <= *radius * (1.0 + 1e-12) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::IndicatorBox { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(xi, (l, h))| l <= xi && xi <= h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Proximal map with step `t > 0`.
    pub fn prox(&self, t: f64, v: &Vector) -> Vector {
        debug_assert!(t > 0.0);
        match self {
            Regularizer::Zero => v.clone(),
            Regularizer::L1 { weight } => soft_threshold(v, t * weight),
            Regularizer::LInf { weight, center } => {
                // Moreau decomposition: the dual norm ball of l_inf is the l1 ball.
                let tau = t * weight;
                match center {
                    Some(c) => {
                        let shifted = v - c;
                        let y = &shifted - project_l1_ball(&shifted, tau);
                        y + c
                    }
                    None => v - project_l1_ball(v, tau),
                }
            }
            Regularizer::IndicatorBall { center, radius } => {
                let d = v - center;
                let n = d.norm();
                if n <= *radius {
                    v.clone()
                } else {
                    center + d * (radius / n)
                }
            }
            Regularizer::IndicatorBox { lo, hi } => Vector::from_iterator(
                v.len(),
                v.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(x, (l, h))| x.clamp(*l, *h)),
            ),
        }
    }
}

/// Component-wise shrinkage `sign(v) max(|v| - tau, 0)`.
pub fn soft_threshold(v: &Vector, tau: f64) -> Vector {
    v.map(|x| {
        if x > tau {
            x - tau
        } else if x < -tau {
            x + tau
        } else {
            0.0
        }
    })
}

/// Euclidean projection onto `{x : |x|_1 <= radius}` by sorting magnitudes
/// and thresholding. A zero radius projects to the origin.
pub fn project_l1_ball(v: &Vector, radius: f64) -> Vector {
    if v.lp_norm(1) <= radius {
        return v.clone();
    }
    if radius <= 0.0 {
        return Vector::zeros(v.len());
    }
    let mut mags: Vec<(f64, usize)> = v.iter().enumerate().map(|(i, x)| (x.abs(), i)).collect();
    // Descending magnitude, ties by index.
    mags.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, (u, _)) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    soft_threshold(v, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(Regularizer::Zero.evaluate(&v(&[5.0, -1.0])), 0.0);
        assert_eq!(Regularizer::L1 { weight: 2.0 }.evaluate(&v(&[1.0, -3.0])), 8.0);
        let ball = Regularizer::IndicatorBall {
            center: Vector::zeros(2),
            radius: 1.0,
        };
        assert_eq!(ball.evaluate(&v(&[2.0, 0.0])), f64::INFINITY);
        assert_eq!(ball.evaluate(&v(&[0.6, 0.8])), 0.0);
        let linf = Regularizer::LInf { weight: 3.0, center: Some(v(&[1.0, 1.0])) };
        assert_eq!(linf.evaluate(&v(&[1.5, -1.0])), 6.0);
    }

    #[test]
    fn prox_examples() {
        let x = v(&[3.0, 0.5, -2.0]);
        assert_eq!(Regularizer::Zero.prox(0.7, &x), x);
        assert_eq!(Regularizer::L1 { weight: 1.0 }.prox(1.0, &x), v(&[2.0, 0.0, -1.0]));
        let linf = Regularizer::LInf { weight: 1.0, center: None };
        assert_eq!(linf.prox(1.0, &v(&[3.0, 0.0])), v(&[2.0, 0.0]));
    }

    #[test]
    fn l1_projection_examples() {
        assert_eq!(project_l1_ball(&v(&[0.3, -0.2]), 1.0), v(&[0.3, -0.2]));
        assert_eq!(project_l1_ball(&v(&[3.0, 0.0]), 1.0), v(&[1.0, 0.0]));
        let p = project_l1_ball(&v(&[2.0, 1.0, 0.0]), 1.0);
        assert_eq!(p, v(&[1.0, 0.0, 0.0]));
        let brute = oracle::brute_force_l1_projection(&v(&[2.0, 1.0, 0.0]), 1.0);
        assert!((p - brute).norm() < 1e-6);
    }

    #[test]
    fn l1_projection_ties() {
        let p = project_l1_ball(&v(&[1.0, -1.0, 1.0]), 1.5);
        assert!((p - v(&[0.5, -0.5, 0.5])).norm() < 1e-15);
    }

    #[test]
    fn indicator_boundary_is_fixed() {
        let ball = Regularizer::IndicatorBall {
            center: v(&[1.0, 0.0]),
            radius: 1.0,
        };
        let x = v(&[2.0, 0.0]);
        assert_eq!(ball.prox(0.5, &x), x);
        let bx = Regularizer::IndicatorBox {
            lo: v(&[0.0, 0.0]),
            hi: v(&[1.0, 1.0]),
        };
        let y = v(&[1.0, 0.0]);
        assert_eq!(bx.prox(3.0, &y), y);
        assert_eq!(bx.prox(3.0, &v(&[2.0, -1.0])), v(&[1.0, 0.0]));
    }

    #[test]
    fn validation() {
        assert!(Regularizer::L1 { weight: -1.0 }.validate(2).is_err());
        let bx = Regularizer::IndicatorBox {
            lo: v(&[1.0]),
            hi: v(&[0.0]),
        };
        assert!(bx.validate(1).is_err());
        let ball = Regularizer::IndicatorBall {
            center: Vector::zeros(3),
            radius: 1.0,
        };
        assert!(ball.validate(2).is_err());
        assert!(ball.validate(3).is_ok());
    }

    fn reg_strategy(n: usize) -> impl Strategy<Value = Regularizer> {
        let vec_s = move || proptest::collection::vec(-3.0..3.0f64, n).prop_map(Vector::from_vec);
        prop_oneof![
            Just(Regularizer::Zero),
            (0.0..3.0f64).prop_map(|weight| Regularizer::L1 { weight }),
            (0.0..3.0f64, vec_s()).prop_map(|(weight, c)| Regularizer::LInf { weight, center: Some(c) }),
            (vec_s(), 0.1..2.0f64).prop_map(|(center, radius)| Regularizer::IndicatorBall { center, radius }),
            (vec_s(), vec_s()).prop_map(|(a, b)| {
                let lo = a.zip_map(&b, f64::min);
                let hi = a.zip_map(&b, f64::max);
                Regularizer::IndicatorBox { lo, hi }
            }),
        ]
    }

    proptest! {
        #[test]
        fn prox_is_nonexpansive(
            (reg, a, b) in (1usize..6).prop_flat_map(|n| (
                reg_strategy(n),
                proptest::collection::vec(-5.0..5.0f64, n),
                proptest::collection::vec(-5.0..5.0f64, n),
            )),
            t in 0.01..3.0f64,
        ) {
            let a = Vector::from_vec(a);
            let b = Vector::from_vec(b);
            let pa = reg.prox(t, &a);
            let pb = reg.prox(t, &b);
            prop_assert!((pa - pb).norm() <= (a - b).norm() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn prox_satisfies_subgradient_certificate(
            (reg, x) in (1usize..6).prop_flat_map(|n| (reg_strategy(n), proptest::collection::vec(-5.0..5.0f64, n))),
            t in 0.01..3.0f64,
        ) {
            let x = Vector::from_vec(x);
            let p = reg.prox(t, &x);
            prop_assert!(oracle::subgradient_residual(&reg, t, &x, &p) <= 1e-8);
        }

        #[test]
        fn linf_moreau_identity(x in proptest::collection::vec(-5.0..5.0f64, 1..8), t in 0.01..3.0f64) {
            let x = Vector::from_vec(x);
            let reg = Regularizer::LInf { weight: 1.0, center: None };
            let sum = reg.prox(t, &x) + project_l1_ball(&x, t);
            prop_assert!((sum - &x).amax() <= 1e-12);
        }

        #[test]
        fn l1_projection_feasible_and_optimal(x in proptest::collection::vec(-4.0..4.0f64, 1..5), r in 0.05..3.0f64) {
            let x = Vector::from_vec(x);
            let p = project_l1_ball(&x, r);
            prop_assert!(p.lp_norm(1) <= r + 1e-12);
            let brute = oracle::brute_force_l1_projection(&x, r);
            prop_assert!((&x - &p).norm() <= (&x - &brute).norm() + 1e-9);
        }

        #[test]
        fn inside_indicator_is_fixed_point(x in proptest::collection::vec(-1.0..1.0f64, 1..6), t in 0.01..5.0f64) {
            let n = x.len();
            let x = Vector::from_vec(x);
            let ball = Regularizer::IndicatorBall { center: Vector::zeros(n), radius: 10.0 };
            prop_assert_eq!(ball.prox(t, &x), x.clone());
            let bx = Regularizer::IndicatorBox { lo: Vector::from_element(n, -1.0), hi: Vector::from_element(n, 1.0) };
            prop_assert_eq!(bx.prox(t, &x), x);
        }
    }

    #[test]
    fn zero_radius_projects_to_origin() {
        assert_eq!(project_l1_ball(&v(&[1.0, 2.0]), 0.0), Vector::zeros(2));
    }
}
