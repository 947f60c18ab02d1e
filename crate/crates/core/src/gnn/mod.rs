//! Graph convolutions, the GNN forward/backward pass, masked training, the
//! spectral-embedding downstream classifier, and exact filter interpolation.

mod checkpoint;
mod interpolate;
mod train;

pub use checkpoint::{load_gnn_checkpoint, save_gnn_checkpoint};
pub use interpolate::{
    apply_scalar_filter, interpolate_filter, interpolate_filter_with_tol,
    spectral_coefficient_check, CoefficientCheck, PRECONDITION_TOL,
};
pub use train::{
    gnn_loss_and_gradients, mlp_forward, mlp_loss_and_gradients, train_gnn, train_gnn_full,
    train_se_classifier, train_se_classifier_full, EvalSets, GnnGradients, MlpConfig, MlpGradients,
    MlpModel, MlpTrainOutcome, TrainOutcome, TrainRecord,
};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graphs::{CommunityAssignment, Operator, OperatorKind};
use crate::spectra::SpectraError;

/// Probability floor inside the cross-entropy logarithm.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("training mask must be nonempty")]
    EmptyMask,
    #[error("mask index {index} out of range for {n} nodes")]
    MaskOutOfRange { index: usize, n: usize },
    #[error("duplicate mask index {0}")]
    DuplicateMaskIndex(usize),
    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("operator has a repeated eigenvalue (min gap {gap:.3e} ≤ tol {tol:.3e}); the interpolation system is singular")]
    RepeatedEigenvalue { gap: f64, tol: f64 },
    #[error("input signal has a vanishing spectral coefficient (min |Vᵀx| = {min:.3e} ≤ tol {tol:.3e}); the interpolation system is singular")]
    VanishingCoefficient { min: f64, tol: f64 },
    #[error("linear system is numerically singular at pivot {pivot}")]
    SingularSystem { pivot: usize },
    #[error("interpolation residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("checkpoint parse error at line {line}: {message}")]
    CheckpointParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Pointwise nonlinearity applied after each graph filter bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// No nonlinearity: the model composes to a single matrix polynomial.
    Identity,
    /// ReLU with a learnable slope for negative inputs, one slope per layer.
    PRelu,
}

impl Activation {
    pub fn label(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::PRelu => "prelu",
        }
    }
}

/// Training-time configuration of the GNN.
#[derive(Debug, Clone)]
pub struct GnnConfig {
    /// Output width of each layer; the length is the layer count L.
    pub widths: Vec<usize>,
    /// Number of filter taps K (powers 0..K-1 of the operator).
    pub taps: usize,
    pub activation: Activation,
    /// Initial PReLU slope for negative inputs.
    pub prelu_init: f64,
    /// Dropout rate in [0, 1), applied to hidden activations in train mode.
    pub dropout: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early stop when the relative loss improvement stays below this for
    /// `patience` consecutive epochs.
    pub tolerance: f64,
    pub patience: usize,
    /// Which graph operator the harness should build for this model.
    pub operator: OperatorKind,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            widths: vec![16, 16],
            taps: 3,
            activation: Activation::PRelu,
            prelu_init: 0.25,
            dropout: 0.5,
            learning_rate: 0.02,
            max_epochs: 200,
            tolerance: 1e-5,
            patience: 10,
            operator: OperatorKind::NormalizedAdjacency,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        if self.widths.is_empty() || self.widths.iter().any(|&w| w == 0) {
            return Err(GnnError::InvalidConfig(
                "need at least one layer with positive width".into(),
            ));
        }
        if self.taps == 0 {
            return Err(GnnError::InvalidConfig("need at least one tap".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GnnError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(GnnError::InvalidConfig(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Parameters of one GNN layer: `K` tap matrices and a PReLU slope.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub taps: Vec<Array2<f64>>,
    pub slope: f64,
}

/// A trained (or initialized) GNN: filter banks per layer plus a linear
/// classifier head.
#[derive(Debug, Clone)]
pub struct GnnModel {
    pub layers: Vec<LayerParams>,
    pub classifier: Array2<f64>,
    pub activation: Activation,
}

pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

impl GnnModel {
    /// Random initialization: tap matrices uniform in
    /// `±√(6/(fan_in+fan_out))`, classifier likewise, slopes at the
    /// configured initial value.
    pub fn init(
        config: &GnnConfig,
        input_dim: usize,
        num_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, GnnError> {
        config.validate()?;
        if input_dim == 0 || num_classes == 0 {
            return Err(GnnError::InvalidConfig(
                "input dimension and class count must be positive".into(),
            ));
        }
        let mut layers = Vec::with_capacity(config.widths.len());
        let mut fan_in = input_dim;
        for &width in &config.widths {
            let taps = (0..config.taps).map(|_| glorot(fan_in, width, rng)).collect();
            layers.push(LayerParams {
                taps,
                slope: config.prelu_init,
            });
            fan_in = width;
        }
        let classifier = glorot(fan_in, num_classes, rng);
        Ok(GnnModel {
            layers,
            classifier,
            activation: config.activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].taps[0].nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.ncols()
    }

    fn check_shapes(&self, input_dim: usize) -> Result<(), GnnError> {
        let mut dim = input_dim;
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.taps.is_empty() {
                return Err(GnnError::InvalidConfig(format!("layer {l} has no taps")));
            }
            let (rows, cols) = layer.taps[0].dim();
            if rows != dim || layer.taps.iter().any(|t| t.dim() != (rows, cols)) {
                return Err(GnnError::ShapeMismatch {
                    context: "layer taps",
                    expected: format!("{dim}x? uniformly at layer {l}"),
                    got: format!("{:?}", layer.taps.iter().map(|t| t.dim()).collect::<Vec<_>>()),
                });
            }
            dim = cols;
        }
        if self.classifier.nrows() != dim {
            return Err(GnnError::ShapeMismatch {
                context: "classifier",
                expected: format!("{dim} rows"),
                got: format!("{} rows", self.classifier.nrows()),
            });
        }
        Ok(())
    }
}

/// Training node set.
#[derive(Debug, Clone)]
pub struct TrainMask {
    indices: Vec<usize>,
}

impl TrainMask {
    /// Validates that indices are unique, in range and nonempty.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self, GnnError> {
        if indices.is_empty() {
            return Err(GnnError::EmptyMask);
        }
        indices.sort_unstable();
        for pair in indices.windows(2) {
            if pair[0] == pair[1] {
                return Err(GnnError::DuplicateMaskIndex(pair[0]));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(GnnError::MaskOutOfRange { index: last, n });
            }
        }
        Ok(TrainMask { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Zeroes the rows of every node outside the mask, producing the masked
/// input signal.
pub fn mask_feature_rows(features: &Array2<f64>, mask: &TrainMask) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(features.dim());
    for &i in mask.indices() {
        out.row_mut(i).assign(&features.row(i));
    }
    out
}

/// Graph filter `U = Σ_{k} S^k X H_k`, evaluated by iterated sparse
/// operator products; the powers `S^k` are never formed.
pub fn graph_filter(
    operator: &Operator,
    features: &Array2<f64>,
    taps: &[Array2<f64>],
) -> Result<Array2<f64>, GnnError> {
    if taps.is_empty() {
        return Err(GnnError::InvalidConfig("empty tap list".into()));
    }
    if features.nrows() != operator.dim() {
        return Err(GnnError::ShapeMismatch {
            context: "graph_filter input",
            expected: format!("{} rows", operator.dim()),
            got: format!("{} rows", features.nrows()),
        });
    }
    if taps[0].nrows() != features.ncols() || taps.iter().any(|t| t.dim() != taps[0].dim()) {
        return Err(GnnError::ShapeMismatch {
            context: "graph_filter taps",
            expected: format!("{}x? uniformly", features.ncols()),
            got: format!("{:?}", taps.iter().map(|t| t.dim()).collect::<Vec<_>>()),
        });
    }
    let mut out = features.dot(&taps[0]);
    let mut power = features.clone();
    for tap in &taps[1..] {
        power = operator.apply_mat(&power);
        out += &power.dot(tap);
    }
    Ok(out)
}

/// Row-wise softmax with the usual max-shift for stability.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Forward-pass mode: evaluation is deterministic, training draws dropout
/// masks from the supplied stream.
pub enum ForwardMode<'a> {
    Eval,
    Train {
        rng: &'a mut ChaCha8Rng,
        dropout: f64,
    },
}

/// Logits and row-softmax probabilities of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Array2<f64>,
    pub probabilities: Array2<f64>,
}

/// Intermediate state kept for backpropagation.
pub(crate) struct ForwardCache {
    /// Per layer, the propagated inputs `Z_k = S^k X_{ℓ-1}` for k = 0..K-1.
    pub powers: Vec<Vec<Array2<f64>>>,
    /// Per layer, the pre-activation `U_ℓ`.
    pub preacts: Vec<Array2<f64>>,
    /// Per layer, the inverted-scaling dropout mask (None in eval mode).
    pub dropout_masks: Vec<Option<Array2<f64>>>,
    /// Input to the classifier (after the last activation and dropout).
    pub classifier_input: Array2<f64>,
}

pub(crate) fn gnn_forward_impl(
    model: &GnnModel,
    operator: &Operator,
    features: &Array2<f64>,
    mode: &mut ForwardMode<'_>,
    keep_cache: bool,
) -> Result<(ForwardOutput, Option<ForwardCache>), GnnError> {
    model.check_shapes(features.ncols())?;
    if features.nrows() != operator.dim() {
        return Err(GnnError::ShapeMismatch {
            context: "gnn input",
            expected: format!("{} rows", operator.dim()),
            got: format!("{} rows", features.nrows()),
        });
    }
    let mut cache = ForwardCache {
        powers: Vec::new(),
        preacts: Vec::new(),
        dropout_masks: Vec::new(),
        classifier_input: Array2::zeros((0, 0)),
    };
    let mut current = features.clone();
    for layer in &model.layers {
        let k = layer.taps.len();
        let mut powers = Vec::with_capacity(k);
        powers.push(current);
        for _ in 1..k {
            let next = operator.apply_mat(powers.last().unwrap());
            powers.push(next);
        }
        let mut preact = powers[0].dot(&layer.taps[0]);
        for (z, tap) in powers.iter().zip(&layer.taps).skip(1) {
            preact += &z.dot(tap);
        }
        let mut post = match model.activation {
            Activation::Identity => preact.clone(),
            Activation::PRelu => preact.mapv(|u| if u > 0.0 { u } else { layer.slope * u }),
        };
        let mask = match mode {
            ForwardMode::Eval => None,
            ForwardMode::Train { rng, dropout } => {
                if *dropout > 0.0 {
                    let keep = 1.0 - *dropout;
                    let m = Array2::from_shape_fn(post.dim(), |_| {
                        if rng.gen::<f64>() < *dropout {
                            0.0
                        } else {
                            1.0 / keep
                        }
                    });
                    post = &post * &m;
                    Some(m)
                } else {
                    None
                }
            }
        };
        if keep_cache {
            cache.powers.push(powers);
            cache.preacts.push(preact);
            cache.dropout_masks.push(mask);
        }
        current = post;
    }
    let logits = current.dot(&model.classifier);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(GnnError::NonFinite("gnn logits"));
    }
    let probabilities = softmax_rows(&logits);
    if keep_cache {
        cache.classifier_input = current;
    }
    Ok((
        ForwardOutput {
            logits,
            probabilities,
        },
        keep_cache.then_some(cache),
    ))
}

/// Full forward pass: per-layer filter and activation, then classifier
/// logits and row-softmax probabilities. Dropout applies only in train mode.
pub fn gnn_forward(
    model: &GnnModel,
    operator: &Operator,
    features: &Array2<f64>,
    mut mode: ForwardMode<'_>,
) -> Result<ForwardOutput, GnnError> {
    gnn_forward_impl(model, operator, features, &mut mode, false).map(|(out, _)| out)
}

/// Mean negative log-likelihood over the masked nodes only, with the
/// probability of the true class clamped at [`PROB_CLAMP`].
pub fn masked_cross_entropy(
    probabilities: &Array2<f64>,
    labels: &CommunityAssignment,
    mask: &TrainMask,
) -> Result<f64, GnnError> {
    if mask.is_empty() {
        return Err(GnnError::EmptyMask);
    }
    if probabilities.nrows() != labels.len() {
        return Err(GnnError::ShapeMismatch {
            context: "masked_cross_entropy",
            expected: format!("{} rows", labels.len()),
            got: format!("{} rows", probabilities.nrows()),
        });
    }
    let mut total = 0.0;
    for &i in mask.indices() {
        let p = probabilities[(i, labels.label(i))].max(PROB_CLAMP);
        total -= p.ln();
    }
    Ok(total / mask.len() as f64)
}

/// Fraction of argmax-correct nodes over `indices`; argmax ties go to the
/// lowest class index.
pub fn accuracy(scores: &Array2<f64>, labels: &CommunityAssignment, indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return f64::NAN;
    }
    let mut correct = 0usize;
    for &i in indices {
        let row = scores.row(i);
        let mut best = 0usize;
        let mut best_v = row[0];
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > best_v {
                best_v = v;
                best = j;
            }
        }
        if best == labels.label(i) {
            correct += 1;
        }
    }
    correct as f64 / indices.len() as f64
}
