use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

/// Element-wise activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

/// Numerically stable logistic function; never evaluates `exp` of a
/// positive argument.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Tanh => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Sigmoid,
            3 => Activation::Tanh,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y = f(z)`.
    /// Relu uses the subgradient 0 at the kink.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub(crate) fn apply_inplace(self, z: &mut Array2<f64>) {
        if self != Activation::Identity {
            z.mapv_inplace(|v| self.apply(v));
        }
    }

    /// `grad ⊙ f'(z)` with `f'` recovered from the cached output.
    pub(crate) fn backprop(self, output: ArrayView2<f64>, grad: ArrayView2<f64>) -> Array2<f64> {
        if self == Activation::Identity {
            return grad.to_owned();
        }
        let mut out = Array2::zeros(grad.raw_dim());
        Zip::from(&mut out)
            .and(&output)
            .and(&grad)
            .for_each(|o, &y, &g| *o = g * self.derivative_from_output(y));
        out
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        };
        f.write_str(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        let expected = (-45f64).exp() / (1.0 + (-45f64).exp());
        assert!((sigmoid(-45.0) - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn tags_round_trip() {
        for a in [
            Activation::Identity,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Tanh,
        ] {
            assert_eq!(Activation::from_tag(a.tag()), Some(a));
        }
        assert_eq!(Activation::from_tag(9), None);
    }
}
