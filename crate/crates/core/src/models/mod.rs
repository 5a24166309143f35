//! Multi-modal transformation models: regularized CCA, the cosine-margin
//! twin network (CML) and its metadata-augmented variant (AMD).

mod cca;
mod checkpoint;
mod head;
mod loss;
mod network;
mod train;

pub use cca::{fit_cca, CcaModel, CcaProjection, View, DEFAULT_RIDGE};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use head::{HeadCache, ProjectionHead, DEFAULT_DIM};
pub use loss::{amd_loss, cml_loss, PairLabels, DEFAULT_ALPHA, DEFAULT_MARGIN};
pub use network::{
    Classifiers, JointNetwork, NetworkGrad, NetworkShape, Objective, TextArch, TextCache,
    TextTower,
};
pub use train::{
    sample_negatives, train_network, EpochRecord, ModelSelection, TrainConfig, TrainHistory,
};

use crate::corpus::Attribute;
use crate::dataset::EncodedPair;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numeric::Matrix;

/// Twin projection heads trained with the cosine margin loss.
#[derive(Debug, Clone, PartialEq)]
pub struct CmlModel {
    pub network: JointNetwork,
    pub margin: f64,
}

/// CML plus attribute classifiers on both projections.
#[derive(Debug, Clone, PartialEq)]
pub struct AmdModel {
    /// The network here carries the classifiers.
    pub base: CmlModel,
    pub alpha: f64,
    pub attribute: Attribute,
}

impl AmdModel {
    pub fn classifiers(&self) -> &Classifiers {
        self.base
            .network
            .classifiers
            .as_ref()
            .expect("AMD network always has classifiers")
    }
}

pub fn train_cml(
    train: &[EncodedPair],
    val: &[EncodedPair],
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(CmlModel, TrainHistory)> {
    let (network, history) = train_network(train, val, cfg, None, exec)?;
    Ok((
        CmlModel {
            network,
            margin: cfg.margin,
        },
        history,
    ))
}

/// Trains AMD; every pair's `label` must index into `n_classes` classes of `attribute`.
pub fn train_amd(
    train: &[EncodedPair],
    val: &[EncodedPair],
    cfg: &TrainConfig,
    attribute: Attribute,
    n_classes: usize,
    exec: Exec,
) -> Result<(AmdModel, TrainHistory)> {
    if n_classes == 0 {
        return Err(Error::Argument(format!("attribute `{attribute}` has no label map")));
    }
    if train.iter().all(|p| p.label.is_none()) {
        return Err(Error::Argument(format!(
            "no training pair carries a `{attribute}` label"
        )));
    }
    let (network, history) = train_network(train, val, cfg, Some(n_classes), exec)?;
    Ok((
        AmdModel {
            base: CmlModel {
                network,
                margin: cfg.margin,
            },
            alpha: cfg.alpha,
            attribute,
        },
        history,
    ))
}

/// Fits CCA between image features and joint text encodings of `train`.
pub fn fit_cca_pairs(train: &[EncodedPair], dim: usize, ridge: f64) -> Result<CcaModel> {
    if train.is_empty() {
        return Err(Error::Argument("CCA needs training pairs".into()));
    }
    let rows = |f: &dyn Fn(&EncodedPair) -> Vec<f64>| -> Result<Matrix> {
        Matrix::from_rows(&train.iter().map(f).collect::<Vec<_>>())
    };
    let x = rows(&|p| p.image.clone())?;
    let y = rows(&|p| p.joint.to_dense())?;
    fit_cca(&x, &y, dim, ridge)
}

/// Any trained model, as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum JointModel {
    Cca(CcaModel),
    Cml(CmlModel),
    Amd(AmdModel),
}

impl JointModel {
    pub fn kind(&self) -> &'static str {
        match self {
            JointModel::Cca(_) => "cca",
            JointModel::Cml(_) => "cml",
            JointModel::Amd(_) => "amd",
        }
    }

    pub fn network(&self) -> Option<&JointNetwork> {
        match self {
            JointModel::Cca(_) => None,
            JointModel::Cml(m) => Some(&m.network),
            JointModel::Amd(m) => Some(&m.base.network),
        }
    }

    /// Unit-norm text projection; CCA may return a zero vector for degenerate input.
    pub fn project_text(&self, pair: &EncodedPair) -> Result<Vec<f64>> {
        match self {
            JointModel::Cca(m) => Ok(m.project(&pair.joint.to_dense(), View::Textual)?.values),
            JointModel::Cml(m) => m.network.project_text(pair),
            JointModel::Amd(m) => m.base.network.project_text(pair),
        }
    }

    pub fn project_image(&self, image: &[f64]) -> Result<Vec<f64>> {
        match self {
            JointModel::Cca(m) => Ok(m.project(image, View::Visual)?.values),
            JointModel::Cml(m) => m.network.project_vis(image),
            JointModel::Amd(m) => m.base.network.project_vis(image),
        }
    }

    pub fn embed(&self, pairs: &[EncodedPair], exec: Exec) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let out = exec.map_slice(pairs, |p| -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((self.project_text(p)?, self.project_image(&p.image)?))
        });
        let mut text = Vec::with_capacity(pairs.len());
        let mut vis = Vec::with_capacity(pairs.len());
        for r in out {
            let (t, v) = r?;
            text.push(t);
            vis.push(v);
        }
        Ok((text, vis))
    }
}
