//! Per-layer nonlinearities available to a multi-function network.

use core::fmt;
use core::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the four activation functions a conv block may use.
///
/// `Elu` uses a unit scale: `x` for `x > 0`, `e^x - 1` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Activation {
    Relu,
    Sig,
    Tanh,
    Elu,
}

impl Activation {
    /// The canonical function set, in the order used for enumeration.
    pub const ALL: [Activation; 4] = [
        Activation::Relu,
        Activation::Sig,
        Activation::Tanh,
        Activation::Elu,
    ];

    #[inline]
    pub fn forward<T: Float>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Sig => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x > T::zero() {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }

    /// Derivative at pre-activation `x`. `y` must be `self.forward(x)`; it is
    /// used to avoid recomputing transcendental functions.
    #[inline]
    pub fn derivative<T: Float>(self, x: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sig => y * (T::one() - y),
            Activation::Tanh => T::one() - y * y,
            Activation::Elu => {
                if x > T::zero() {
                    T::one()
                } else {
                    y + T::one()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "RELU",
            Activation::Sig => "SIG",
            Activation::Tanh => "TANH",
            Activation::Elu => "ELU",
        }
    }
}

#[inline]
fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RELU" => Ok(Activation::Relu),
            "SIG" | "SIGMOID" => Ok(Activation::Sig),
            "TANH" => Ok(Activation::Tanh),
            "ELU" => Ok(Activation::Elu),
            other => Err(Error::Config(alloc::format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_values() {
        assert_eq!(Activation::Relu.forward(-2.0f64), 0.0);
        assert_eq!(Activation::Relu.forward(3.5f64), 3.5);
        assert!((Activation::Sig.forward(0.0f64) - 0.5).abs() < 1e-15);
        assert!((Activation::Tanh.forward(1.0f64) - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert!((Activation::Elu.forward(-1.0f64) - (-0.632_120_558_828_557_7)).abs() < 1e-15);
        assert_eq!(Activation::Elu.forward(2.0f64), 2.0);
    }

    #[test]
    fn sigmoid_is_finite_at_extremes() {
        for x in [-1e4f32, -800.0, 800.0, 1e4] {
            let y = Activation::Sig.forward(x);
            assert!(y.is_finite() && (0.0..=1.0).contains(&y));
        }
    }

    // Central differences at 1000 random points, away from the kink at 0.
    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5f64;
        for act in Activation::ALL {
            for _ in 0..1000 {
                let mut x: f64 = rng.random_range(-6.0..6.0);
                if x.abs() < 1e-3 {
                    x += 0.01;
                }
                let numeric = (act.forward(x + h) - act.forward(x - h)) / (2.0 * h);
                let analytic = act.derivative(x, act.forward(x));
                assert!(
                    (numeric - analytic).abs() <= 1e-6,
                    "{act} at {x}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for act in Activation::ALL {
            assert_eq!(act.name().parse::<Activation>().unwrap(), act);
        }
        assert!("swish".parse::<Activation>().is_err());
    }
}
