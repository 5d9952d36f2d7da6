//! Small feedforward generator networks `G: R^s -> R^d`.
//!
//! A generator is a composition of affine maps and entry-wise activations,
//! `G(z) = act_k(W_k(... act_1(W_1 z + b_1) ...) + b_k)`, defined on a
//! Euclidean ball of latent codes. Layer widths never shrink and every weight
//! matrix has full column rank, which is what makes the map near-isometric on
//! its domain.

mod geometry;

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error};
use crate::linalg::singular_values;
use crate::{Matrix, Vector};

pub use geometry::{estimate_geometry, perturb_weights, GeometryEstimate, GeometrySampler};

/// Relative tolerance for the full-column-rank check: the smallest singular
/// value must exceed `RANK_TOL` times the largest.
pub const RANK_TOL: f64 = 1e-10;

/// Entry-wise activation. All kinds are C1 and strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `x` for `x > 0`, `alpha (e^x - 1)` otherwise. Only C1 at zero when `alpha == 1`.
    Elu { alpha: f64 },
    Softplus,
    Tanh,
    Sigmoid,
    Identity,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::Elu { alpha: 1.0 }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn elu() -> Self {
        Activation::Elu { alpha: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Activation::Elu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * libm::expm1(x)
                }
            }
            Activation::Softplus => x.max(0.0) + libm::log1p(libm::exp(-x.abs())),
            Activation::Tanh => libm::tanh(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Activation::Elu { alpha } => {
                if x > 0.0 {
                    1.0
                } else {
                    alpha * libm::exp(x)
                }
            }
            Activation::Softplus => sigmoid(x),
            Activation::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    /// Lower-case name used in description files.
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Elu { .. } => "elu",
            Activation::Softplus => "softplus",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    /// Parses a name as written by [`Activation::name`]. `elu_alpha` is only
    /// used for `"elu"`.
    pub fn from_name(name: &str, elu_alpha: f64) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "elu" => Activation::Elu { alpha: elu_alpha },
            "softplus" => Activation::Softplus,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            "identity" | "linear" => Activation::Identity,
            _ => return None,
        })
    }

    /// False for ELU with `alpha != 1`, which is continuous but has a kink at 0.
    pub fn is_c1(&self) -> bool {
        match *self {
            Activation::Elu { alpha } => alpha == 1.0,
            _ => true,
        }
    }

    fn validate(&self) -> Result<(), Error> {
        match *self {
            Activation::Elu { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::InvalidGenerator(format!("ELU alpha must be positive, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }
}

/// One affine map followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in` weight matrix.
    pub weights: Matrix,
    /// `None` for a layer without bias.
    pub bias: Option<Vector>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Option<Vector>, activation: Activation) -> Self {
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn pre_activation(&self, x: &Vector) -> Vector {
        let mut a = &self.weights * x;
        if let Some(b) = &self.bias {
            a += b;
        }
        a
    }
}

/// Architecture of a generator with randomly initialised weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    /// `(width, activation, has_bias)` per layer, input side first.
    pub layers: Vec<(usize, Activation, bool)>,
    pub domain_radius: f64,
}

/// Pre-activations recorded during a forward pass, enough to run the
/// backward (or tangent) pass without re-evaluating the network.
#[derive(Debug, Clone)]
pub struct Tape {
    pre_activations: Vec<Vector>,
}

/// Interface the solvers need from a generator.
///
/// Methods assume inputs of the right dimension and panic otherwise; the
/// solvers validate dimensions once before iterating.
pub trait Generator {
    type Tape;

    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// `G(z)`.
    fn apply(&self, z: &Vector) -> Vector;

    /// `G(z)` together with the intermediate state needed by
    /// [`pullback`](Generator::pullback) and [`push_forward`](Generator::push_forward).
    fn record(&self, z: &Vector) -> (Vector, Self::Tape);

    /// `DG(z)^T u` for the `z` recorded in `tape`.
    fn pullback(&self, tape: &Self::Tape, u: &Vector) -> Vector;

    /// `DG(z) v` for the `z` recorded in `tape`.
    fn push_forward(&self, tape: &Self::Tape, v: &Vector) -> Vector;
}

/// A layered differentiable map on a Euclidean ball of latent codes.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardGenerator {
    input_dim: usize,
    layers: Vec<Layer>,
    domain_radius: f64,
}

impl FeedforwardGenerator {
    /// Builds a generator and checks every structural invariant, including
    /// full column rank of each weight matrix.
    pub fn new(input_dim: usize, layers: Vec<Layer>, domain_radius: f64) -> Result<Self, Error> {
        let gen = Self::new_without_rank_check(input_dim, layers, domain_radius)?;
        for (i, sv) in gen.min_singular_values().iter().enumerate() {
            let smax = singular_values(&gen.layers[i].weights)[0];
            if !(*sv > RANK_TOL * smax) {
                return Err(Error::InvalidGenerator(format!(
                    "layer {i} weight matrix is not of full column rank (smallest singular value {sv:e})"
                )));
            }
        }
        Ok(gen)
    }

    /// Like [`new`](Self::new) but accepts rank-deficient weights. Useful for
    /// generators that will be repaired by [`perturb_weights`].
    pub fn new_without_rank_check(
        input_dim: usize,
        layers: Vec<Layer>,
        domain_radius: f64,
    ) -> Result<Self, Error> {
        if input_dim == 0 {
            return Err(Error::InvalidGenerator("input dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidGenerator("at least one layer is required".into()));
        }
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(Error::InvalidGenerator(format!(
                "domain radius must be positive, got {domain_radius}"
            )));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::InvalidGenerator(format!(
                    "layer {i} expects input of size {}, previous width is {width}",
                    layer.in_dim()
                )));
            }
            if layer.out_dim() < width {
                return Err(Error::InvalidGenerator(format!(
                    "layer sizes must be non-decreasing: layer {i} maps {width} -> {}",
                    layer.out_dim()
                )));
            }
            if let Some(b) = &layer.bias {
                if b.len() != layer.out_dim() {
                    return Err(Error::InvalidGenerator(format!(
                        "layer {i} bias has length {}, expected {}",
                        b.len(),
                        layer.out_dim()
                    )));
                }
            }
            if !layer.weights.iter().all(|x| x.is_finite())
                || !layer.bias.iter().flat_map(|b| b.iter()).all(|x| x.is_finite())
            {
                return Err(Error::InvalidGenerator(format!("layer {i} has non-finite parameters")));
            }
            layer.activation.validate()?;
            width = layer.out_dim();
        }
        Ok(Self {
            input_dim,
            layers,
            domain_radius,
        })
    }

    /// Random generator: weights i.i.d. uniform on `(-a, a)` with
    /// `a = sqrt(3 / fan_in)`, biases uniform on `(-0.1, 0.1)`.
    pub fn seeded_uniform(arch: &Architecture, seed: u64) -> Result<Self, Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut width = arch.input_dim;
        let mut layers = Vec::with_capacity(arch.layers.len());
        for &(out, activation, has_bias) in &arch.layers {
            let a = libm::sqrt(3.0 / width as f64);
            let weights = Matrix::from_fn(out, width, |_, _| rng.random_range(-a..a));
            let bias = has_bias.then(|| Vector::from_fn(out, |_, _| rng.random_range(-0.1..0.1)));
            layers.push(Layer::new(weights, bias, activation));
            width = out;
        }
        Self::new(arch.input_dim, layers, arch.domain_radius)
    }

    /// Single-layer linear generator `z -> W z`.
    pub fn linear(weights: Matrix, domain_radius: f64) -> Result<Self, Error> {
        let s = weights.ncols();
        Self::new(s, alloc::vec![Layer::new(weights, None, Activation::Identity)], domain_radius)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::out_dim).unwrap_or(self.input_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Smallest singular value of each layer's weight matrix.
    pub fn min_singular_values(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| {
                let sv = singular_values(&l.weights);
                if l.weights.nrows() < l.weights.ncols() {
                    0.0
                } else {
                    sv[sv.len() - 1]
                }
            })
            .collect()
    }

    pub fn forward(&self, z: &Vector) -> Result<Vector, Error> {
        check_dim("latent vector", self.input_dim, z.len())?;
        Ok(self.apply(z))
    }

    /// Dense `d x s` Jacobian at `z`.
    pub fn jacobian(&self, z: &Vector) -> Result<Matrix, Error> {
        check_dim("latent vector", self.input_dim, z.len())?;
        let (_, tape) = self.record(z);
        let mut jac = Matrix::identity(self.input_dim, self.input_dim);
        for (layer, a) in self.layers.iter().zip(&tape.pre_activations) {
            jac = &layer.weights * jac;
            for (i, mut row) in jac.row_iter_mut().enumerate() {
                row *= layer.activation.derivative(a[i]);
            }
        }
        Ok(jac)
    }

    /// `DG(z)^T u` with one forward and one backward pass.
    pub fn vjp(&self, z: &Vector, u: &Vector) -> Result<Vector, Error> {
        check_dim("latent vector", self.input_dim, z.len())?;
        check_dim("cotangent vector", self.output_dim(), u.len())?;
        let (_, tape) = self.record(z);
        Ok(self.pullback(&tape, u))
    }

    /// `DG(z) v` with one forward pass carrying the tangent.
    pub fn jvp(&self, z: &Vector, v: &Vector) -> Result<Vector, Error> {
        check_dim("latent vector", self.input_dim, z.len())?;
        check_dim("tangent vector", self.input_dim, v.len())?;
        let (_, tape) = self.record(z);
        Ok(self.push_forward(&tape, v))
    }
}

impl Generator for FeedforwardGenerator {
    type Tape = Tape;

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        FeedforwardGenerator::output_dim(self)
    }

    fn apply(&self, z: &Vector) -> Vector {
        let mut x = z.clone();
        for layer in &self.layers {
            let act = layer.activation;
            x = layer.pre_activation(&x).map(|a| act.eval(a));
        }
        x
    }

    fn record(&self, z: &Vector) -> (Vector, Tape) {
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = z.clone();
        for layer in &self.layers {
            let a = layer.pre_activation(&x);
            let act = layer.activation;
            x = a.map(|v| act.eval(v));
            pre_activations.push(a);
        }
        (x, Tape { pre_activations })
    }

    fn pullback(&self, tape: &Tape, u: &Vector) -> Vector {
        assert_eq!(u.len(), FeedforwardGenerator::output_dim(self), "cotangent dimension");
        let mut g = u.clone();
        for (layer, a) in self.layers.iter().zip(&tape.pre_activations).rev() {
            for (gi, ai) in g.iter_mut().zip(a.iter()) {
                *gi *= layer.activation.derivative(*ai);
            }
            g = layer.weights.tr_mul(&g);
        }
        g
    }

    fn push_forward(&self, tape: &Tape, v: &Vector) -> Vector {
        assert_eq!(v.len(), self.input_dim, "tangent dimension");
        let mut x = v.clone();
        for (layer, a) in self.layers.iter().zip(&tape.pre_activations) {
            x = &layer.weights * x;
            for (xi, ai) in x.iter_mut().zip(a.iter()) {
                *xi *= layer.activation.derivative(*ai);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_layer_elu(seed: u64) -> FeedforwardGenerator {
        let arch = Architecture {
            input_dim: 2,
            layers: vec![(4, Activation::elu(), true), (8, Activation::elu(), true)],
            domain_radius: 1.0,
        };
        FeedforwardGenerator::seeded_uniform(&arch, seed).unwrap()
    }

    #[test]
    fn identity_network() {
        let gen = FeedforwardGenerator::linear(Matrix::identity(2, 2), 1.0).unwrap();
        let z = Vector::from_vec(vec![1.0, -2.0]);
        assert_eq!(gen.forward(&z).unwrap(), z);
        assert_eq!(gen.jacobian(&z).unwrap(), Matrix::identity(2, 2));
        let u = Vector::from_vec(vec![3.0, -1.0]);
        assert_eq!(gen.vjp(&z, &u).unwrap(), u);
        assert_eq!(gen.vjp(&z, &Vector::zeros(2)).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn sigmoid_layer_at_zero() {
        let layer = Layer::new(Matrix::identity(1, 1), None, Activation::Sigmoid);
        let gen = FeedforwardGenerator::new(1, vec![layer], 1.0).unwrap();
        let z = Vector::from_vec(vec![0.0]);
        assert_eq!(gen.forward(&z).unwrap()[0], 0.5);

        let layer = Layer::new(Matrix::from_element(1, 1, 2.0), None, Activation::Sigmoid);
        let gen = FeedforwardGenerator::new(1, vec![layer], 1.0).unwrap();
        assert_eq!(gen.jacobian(&z).unwrap()[(0, 0)], 0.5);
    }

    #[test]
    fn forward_matches_straight_line_composition() {
        let gen = two_layer_elu(0);
        let elu = |x: f64| if x > 0.0 { x } else { libm::exp(x) - 1.0 };
        let z = Vector::zeros(2);
        let l = gen.layers();
        let h = (&l[0].weights * &z + l[0].bias.as_ref().unwrap()).map(elu);
        let out = (&l[1].weights * h + l[1].bias.as_ref().unwrap()).map(elu);
        let got = gen.forward(&z).unwrap();
        assert!((got - out).amax() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let gen = two_layer_elu(1);
        assert!(matches!(
            gen.forward(&Vector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(gen.vjp(&Vector::zeros(2), &Vector::zeros(7)).is_err());
    }

    #[test]
    fn shrinking_layers_rejected() {
        let l1 = Layer::new(Matrix::identity(3, 3), None, Activation::Tanh);
        let l2 = Layer::new(Matrix::identity(2, 3), None, Activation::Tanh);
        assert!(FeedforwardGenerator::new(3, vec![l1, l2], 1.0).is_err());
    }

    #[test]
    fn rank_deficient_rejected_unless_relaxed() {
        let w = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let layers = vec![Layer::new(w, None, Activation::Identity)];
        assert!(FeedforwardGenerator::new(2, layers.clone(), 1.0).is_err());
        assert!(FeedforwardGenerator::new_without_rank_check(2, layers, 1.0).is_ok());
    }

    #[test]
    fn bad_elu_alpha_rejected() {
        let l = Layer::new(Matrix::identity(2, 2), None, Activation::Elu { alpha: 0.0 });
        assert!(FeedforwardGenerator::new(2, vec![l], 1.0).is_err());
        assert!(!Activation::Elu { alpha: 2.0 }.is_c1());
        assert!(Activation::elu().is_c1());
    }

    #[test]
    fn activations_increasing_and_finite() {
        let acts = [
            Activation::elu(),
            Activation::Elu { alpha: 0.5 },
            Activation::Softplus,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Identity,
        ];
        for act in acts {
            let mut prev = f64::NEG_INFINITY;
            for i in -200..=200 {
                let x = i as f64 * 0.05;
                let y = act.eval(x);
                assert!(y.is_finite() && act.derivative(x).is_finite());
                assert!(y > prev, "{act:?} not increasing at {x}");
                prev = y;
            }
            for x in [-1e300, -750.0, 750.0, 1e300] {
                assert!(act.eval(x).is_finite());
                assert!(act.derivative(x).is_finite());
            }
        }
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        let acts = [Activation::elu(), Activation::Softplus, Activation::Tanh, Activation::Sigmoid];
        for act in acts {
            for x in [-3.0, -0.7, 0.3, 2.5] {
                let h = 1e-6;
                let fd = (act.eval(x + h) - act.eval(x - h)) / (2.0 * h);
                assert!((fd - act.derivative(x)).abs() < 1e-8, "{act:?} at {x}");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for act in [Activation::elu(), Activation::Softplus, Activation::Tanh, Activation::Sigmoid, Activation::Identity] {
            assert_eq!(Activation::from_name(act.name(), 1.0), Some(act));
        }
        assert_eq!(Activation::from_name("relu", 1.0), None);
    }

    #[test]
    fn jvp_matches_dense_jacobian() {
        let gen = two_layer_elu(3);
        let z = Vector::from_vec(vec![0.3, -0.4]);
        let v = Vector::from_vec(vec![1.5, 0.25]);
        let dense = gen.jacobian(&z).unwrap() * &v;
        assert!((gen.jvp(&z, &v).unwrap() - dense).norm() < 1e-13);
    }
}
