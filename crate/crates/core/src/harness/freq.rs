//! Frequency-response export: graph Fourier coefficients of trained GNN
//! logits on the dense and sparse synthetic graphs, for the linear and
//! nonlinear variants, on the normalized adjacency.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::synthetic::{prepare_trial, trial_uid};
use super::{fmt_f64, write_csv, HarnessError, RawConfig, SyntheticConfig};
use crate::gnn::{train_gnn, Activation, GnnConfig};
use crate::graphs::Operator;
use crate::rng::{derive_seed, purpose, trial_stream};
use crate::spectra::{eig_sym, model_frequency_response, SpectralDecomposition};

#[derive(Debug, Clone)]
pub struct FreqConfig {
    pub synthetic: SyntheticConfig,
    /// Seeds averaged in the energy summary; panel CSVs use the first.
    pub seeds: usize,
}

impl FreqConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, HarnessError> {
        Ok(FreqConfig {
            synthetic: SyntheticConfig::from_raw(raw)?,
            seeds: raw.get_usize("freq.seeds", 5)?,
        })
    }
}

/// One trained model's spectral content.
pub struct FreqPanel {
    pub gamma: f64,
    pub activation: Activation,
    pub seed_index: usize,
    /// Eigenvalues in the decomposition's |λ| order.
    pub eigenvalues: Vec<f64>,
    /// Coefficients `Vᵀ logits`, rows in the same order.
    pub coefficients: Array2<f64>,
}

/// Fraction of squared coefficient mass on the first `top` rows (the
/// leading |λ| components), summed over channels.
pub fn spectral_energy_fraction(coefficients: &Array2<f64>, top: usize) -> f64 {
    let total: f64 = coefficients.iter().map(|c| c * c).sum();
    if total == 0.0 {
        return 0.0;
    }
    let head: f64 = (0..top.min(coefficients.nrows()))
        .map(|k| coefficients.row(k).iter().map(|c| c * c).sum::<f64>())
        .sum();
    head / total
}

fn panel(
    config: &SyntheticConfig,
    decomp: &SpectralDecomposition,
    operator: &Operator,
    input: &Array2<f64>,
    labels: &crate::graphs::CommunityAssignment,
    mask: &crate::gnn::TrainMask,
    gamma: f64,
    activation: Activation,
    seed_index: usize,
    uid: u64,
) -> Result<FreqPanel, HarnessError> {
    let gnn_config = GnnConfig {
        activation,
        ..config.gnn.clone()
    };
    let variant = match activation {
        Activation::Identity => 0u64,
        Activation::PRelu => 1,
    };
    let seed = derive_seed(
        config.seed,
        trial_stream(uid, purpose::MODEL_BASE + 40 + variant),
    );
    let (model, _) = train_gnn(&gnn_config, operator, input, labels, mask, seed)?;
    let coefficients = model_frequency_response(&model, decomp, operator, input)?;
    Ok(FreqPanel {
        gamma,
        activation,
        seed_index,
        eigenvalues: decomp.eigenvalues.clone(),
        coefficients,
    })
}

/// Trains the four Fig.-style panels per seed on the normalized adjacency
/// and returns them in (gamma, activation, seed) order.
pub fn compute_panels(config: &FreqConfig) -> Result<Vec<FreqPanel>, HarnessError> {
    let mut panels = Vec::new();
    for (gamma_idx, &gamma) in config.synthetic.gammas.iter().enumerate() {
        for seed_index in 0..config.seeds {
            let uid = trial_uid(gamma_idx, seed_index);
            let trial = prepare_trial(&config.synthetic, gamma, uid)?;
            let operator = Operator::normalized_adjacency(&trial.graph);
            let decomp = eig_sym(&operator.to_dense())?;
            for activation in [Activation::Identity, Activation::PRelu] {
                panels.push(panel(
                    &config.synthetic,
                    &decomp,
                    &operator,
                    &trial.input,
                    &trial.labels,
                    &trial.mask,
                    gamma,
                    activation,
                    seed_index,
                    uid,
                )?);
            }
        }
    }
    Ok(panels)
}

fn panel_csv(panel: &FreqPanel, path: &Path) -> Result<(), HarnessError> {
    // Rows sorted by decreasing signed eigenvalue, as in the figure.
    let n = panel.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        panel.eigenvalues[b]
            .partial_cmp(&panel.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let channels = panel.coefficients.ncols();
    let header = std::iter::once("index,eigenvalue".to_string())
        .chain((0..channels).map(|c| format!("channel_{c}")))
        .collect::<Vec<_>>()
        .join(",");
    write_csv(
        path,
        &header,
        order.iter().enumerate().map(|(row, &i)| {
            let mut cells = vec![format!("{row}"), fmt_f64(panel.eigenvalues[i])];
            for c in 0..channels {
                cells.push(fmt_f64(panel.coefficients[(i, c)]));
            }
            cells.join(",")
        }),
    )
}

fn setting_slug(gammas: &[f64], gamma: f64) -> String {
    // Dense/sparse naming when the run has exactly the two canonical levels.
    if gammas.len() == 2 {
        if gamma == gammas[0].min(gammas[1]) {
            return "dense".into();
        }
        return "sparse".into();
    }
    format!("gamma{gamma}")
}

/// Runs the frequency analysis: one panel CSV per (density, variant) for
/// the first seed, plus an energy summary over all seeds.
pub fn run_frequency_analysis(
    config: &FreqConfig,
    out_dir: &Path,
) -> Result<(Vec<FreqPanel>, Vec<PathBuf>), HarnessError> {
    let panels = super::with_pool(config.synthetic.threads, || compute_panels(config))??;
    let mut outputs = Vec::new();
    for p in &panels {
        if p.seed_index != 0 {
            continue;
        }
        let slug = setting_slug(&config.synthetic.gammas, p.gamma);
        let name = format!(
            "freq_{}_{}.csv",
            slug,
            match p.activation {
                Activation::Identity => "linear",
                Activation::PRelu => "nonlinear",
            }
        );
        let path = out_dir.join(name);
        panel_csv(p, &path)?;
        outputs.push(path);
    }
    let summary = out_dir.join("freq_energy.csv");
    write_csv(
        &summary,
        "gamma,activation,seed,top2_energy_fraction",
        panels.iter().map(|p| {
            format!(
                "{},{},{},{}",
                p.gamma,
                p.activation.label(),
                p.seed_index,
                fmt_f64(spectral_energy_fraction(&p.coefficients, 2))
            )
        }),
    )?;
    outputs.push(summary);
    Ok((panels, outputs))
}
