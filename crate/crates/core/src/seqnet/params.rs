use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flat view over every trainable tensor, in declaration order.
pub trait ParamSet<T: Scalar>: Clone {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;
    fn tensor_names(&self) -> Vec<String>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn global_norm(&self) -> T {
        self.tensors().iter().flat_map(|t| t.iter()).map(|&v| v * v).sum::<T>().sqrt()
    }

    fn scale(&mut self, by: T) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= by);
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<T> {
    pub input_size: usize,
    pub hidden: usize,
    /// `4H x input_size`
    pub w: Vec<T>,
    /// `4H x H`
    pub r: Vec<T>,
    pub peep_i: Vec<T>,
    pub peep_f: Vec<T>,
    pub peep_o: Vec<T>,
    /// `4H`
    pub b: Vec<T>,
}

impl<T: Scalar> LstmLayer<T> {
    pub fn zeros(input_size: usize, hidden: usize) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            input_size,
            hidden,
            w: z(4 * hidden * input_size),
            r: z(4 * hidden * hidden),
            peep_i: z(hidden),
            peep_f: z(hidden),
            peep_o: z(hidden),
            b: z(4 * hidden),
        }
    }

    /// Uniform(±scale) matrices, zero peepholes and biases except the
    /// forget-gate bias.
    pub fn init<R: Rng>(input_size: usize, hidden: usize, scale: f64, forget_bias: f64, rng: &mut R) -> Self {
        let mut l = Self::zeros(input_size, hidden);
        for v in l.w.iter_mut().chain(l.r.iter_mut()) {
            *v = T::lit(rng.gen_range(-scale..=scale));
        }
        for v in &mut l.b[hidden..2 * hidden] {
            *v = T::lit(forget_bias);
        }
        l
    }

    fn tensors(&self) -> [&[T]; 6] {
        [&self.w, &self.r, &self.peep_i, &self.peep_f, &self.peep_o, &self.b]
    }

    fn tensors_mut(&mut self) -> [&mut [T]; 6] {
        [&mut self.w, &mut self.r, &mut self.peep_i, &mut self.peep_f, &mut self.peep_o, &mut self.b]
    }

    fn shapes(&self) -> [(usize, usize); 6] {
        let h = self.hidden;
        [(4 * h, self.input_size), (4 * h, h), (1, h), (1, h), (1, h), (1, 4 * h)]
    }
}

const LAYER_TENSORS: [&str; 6] = ["w", "r", "peep_i", "peep_f", "peep_o", "b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, w: vec![T::zero(); inputs * outputs], b: vec![T::zero(); outputs] }
    }

    pub fn init<R: Rng>(inputs: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        let mut d = Self::zeros(inputs, outputs);
        for v in &mut d.w {
            *v = T::lit(rng.gen_range(-scale..=scale));
        }
        d
    }
}

/// Mixture components in the next-position head.
pub const MIXTURES: usize = 3;
/// Dimensions of each mixture component (x, y, z).
pub const MDN_DIM: usize = 3;
/// Raw head outputs: logits, means, log-scales.
pub const MDN_OUTPUTS: usize = MIXTURES * (1 + 2 * MDN_DIM);
pub const CLASSES: usize = 2;

/// Weights of the two-layer peephole LSTM with its make/miss and
/// mixture-density heads.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqNetParams<T> {
    pub layers: Vec<LstmLayer<T>>,
    pub class_head: Dense<T>,
    pub mdn_head: Dense<T>,
}

impl<T: Scalar> SeqNetParams<T> {
    pub fn init<R: Rng>(
        inputs: usize,
        hidden: usize,
        num_layers: usize,
        scale: f64,
        forget_bias: f64,
        rng: &mut R,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|l| LstmLayer::init(if l == 0 { inputs } else { hidden }, hidden, scale, forget_bias, rng))
            .collect();
        Self {
            layers,
            class_head: Dense::init(hidden, CLASSES, scale, rng),
            mdn_head: Dense::init(hidden, MDN_OUTPUTS, scale, rng),
        }
    }

    /// Same network in another scalar type, tensor by tensor.
    pub fn cast<U: Scalar>(&self) -> SeqNetParams<U> {
        let mut out = SeqNetParams::<U>::zeros(self.input_size(), self.hidden(), self.layers.len());
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::lit(s.as_f64());
            }
        }
        out
    }

    pub fn zeros(inputs: usize, hidden: usize, num_layers: usize) -> Self {
        Self {
            layers: (0..num_layers).map(|l| LstmLayer::zeros(if l == 0 { inputs } else { hidden }, hidden)).collect(),
            class_head: Dense::zeros(hidden, CLASSES),
            mdn_head: Dense::zeros(hidden, MDN_OUTPUTS),
        }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if h == 0 || self.layers.is_empty() {
            return Err(Error::ShapeMismatch("hidden size and layer count must be >= 1".into()));
        }
        for (li, l) in self.layers.iter().enumerate() {
            let expected_in = if li == 0 { self.input_size() } else { h };
            let consistent = l.hidden == h
                && l.input_size == expected_in
                && l.tensors().iter().zip(l.shapes()).all(|(t, (r, c))| t.len() == r * c);
            if !consistent {
                return Err(Error::ShapeMismatch(format!("layer {} has inconsistent shapes", li + 1)));
            }
        }
        for (name, d, out) in [("class", &self.class_head, CLASSES), ("mdn", &self.mdn_head, MDN_OUTPUTS)] {
            if d.inputs != h || d.outputs != out || d.w.len() != h * out || d.b.len() != out {
                return Err(Error::ShapeMismatch(format!("{name} head has inconsistent shapes")));
            }
        }
        if !self.all_finite() {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    /// `(name, rows, cols)` per tensor in declaration order.
    pub fn tensor_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for (li, l) in self.layers.iter().enumerate() {
            for (n, (r, c)) in LAYER_TENSORS.iter().zip(l.shapes()) {
                out.push((format!("layer{}.{n}", li + 1), r, c));
            }
        }
        for (name, d) in [("class", &self.class_head), ("mdn", &self.mdn_head)] {
            out.push((format!("{name}.w"), d.outputs, d.inputs));
            out.push((format!("{name}.b"), 1, d.outputs));
        }
        out
    }
}

impl<T: Scalar> ParamSet<T> for SeqNetParams<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = self.layers.iter().flat_map(|l| l.tensors()).collect();
        v.extend([&self.class_head.w[..], &self.class_head.b, &self.mdn_head.w, &self.mdn_head.b]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect();
        v.extend([&mut self.class_head.w[..], &mut self.class_head.b, &mut self.mdn_head.w, &mut self.mdn_head.b]);
        v
    }

    fn tensor_names(&self) -> Vec<String> {
        self.tensor_shapes().into_iter().map(|(n, _, _)| n).collect()
    }
}

/// Stack with a single linear output, used by the sanity tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionNetParams<T> {
    pub layers: Vec<LstmLayer<T>>,
    pub head: Dense<T>,
}

impl<T: Scalar> RegressionNetParams<T> {
    pub fn init<R: Rng>(
        inputs: usize,
        hidden: usize,
        num_layers: usize,
        scale: f64,
        forget_bias: f64,
        rng: &mut R,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|l| LstmLayer::init(if l == 0 { inputs } else { hidden }, hidden, scale, forget_bias, rng))
            .collect();
        Self { layers, head: Dense::init(hidden, 1, scale, rng) }
    }
}

impl<T: Scalar> ParamSet<T> for RegressionNetParams<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = self.layers.iter().flat_map(|l| l.tensors()).collect();
        v.extend([&self.head.w[..], &self.head.b]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect();
        v.extend([&mut self.head.w[..], &mut self.head.b]);
        v
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.layers.len())
            .flat_map(|li| LAYER_TENSORS.iter().map(move |n| format!("layer{}.{n}", li + 1)))
            .collect();
        names.extend(["head.w".to_string(), "head.b".to_string()]);
        names
    }
}
