use crate::error::{Error, Result};
use crate::numeric::{cross_entropy, dot};

/// Default cosine margin for negative pairs.
pub const DEFAULT_MARGIN: f64 = 0.1;
/// Default weight of each metadata classifier loss.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Cosine margin loss for one (image, text) pair of unit vectors:
/// `1 - cos` for a matching pair, `max(0, cos - m)` otherwise.
pub fn cml_loss(p_vis: &[f64], p_text: &[f64], positive: bool, margin: f64) -> f64 {
    cml_from_cos(dot(p_vis, p_text).clamp(-1.0, 1.0), positive, margin)
}

pub(crate) fn cml_from_cos(cos: f64, positive: bool, margin: f64) -> f64 {
    if positive {
        1.0 - cos
    } else {
        (cos - margin).max(0.0)
    }
}

/// `d loss / d cos` for [`cml_loss`].
pub(crate) fn cml_dcos(cos: f64, positive: bool, margin: f64) -> f64 {
    if positive {
        -1.0
    } else if cos > margin {
        1.0
    } else {
        0.0
    }
}

/// Labels for the two metadata classifiers; `None` when the pair is unlabeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairLabels {
    pub text: usize,
    pub vis: usize,
}

/// Metadata-augmented loss:
/// `(1 - 2α) L_cml + α CE(text_logits, l_text) + α CE(vis_logits, l_vis)`.
/// The classifier terms are only added when `labels` is present.
#[allow(clippy::too_many_arguments)]
pub fn amd_loss(
    p_text: &[f64],
    p_vis: &[f64],
    text_logits: &[f64],
    vis_logits: &[f64],
    labels: Option<PairLabels>,
    positive: bool,
    margin: f64,
    alpha: f64,
) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Argument(format!("alpha {alpha} outside [0, 0.5)")));
    }
    let mut loss = (1.0 - 2.0 * alpha) * cml_loss(p_vis, p_text, positive, margin);
    if let Some(l) = labels {
        loss += alpha * cross_entropy(text_logits, l.text)?;
        loss += alpha * cross_entropy(vis_logits, l.vis)?;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_with_cos(cos: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0, 0.0], vec![cos, (1.0 - cos * cos).sqrt()])
    }

    #[test]
    fn cml_trivial_cases() {
        let (u, _) = unit_with_cos(1.0);
        assert_eq!(cml_loss(&u, &u, true, 0.1), 0.0);
        let (u, v) = unit_with_cos(0.0);
        assert_eq!(cml_loss(&u, &v, false, 0.1), 0.0);
        let (u, v) = unit_with_cos(0.5);
        assert!((cml_loss(&u, &v, false, 0.1) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn amd_weighted_sum() {
        let (u, v) = unit_with_cos(0.0);
        // positive pair with cos 0 -> L_cml = 1; uniform two-class logits -> ln 2 each
        let l = amd_loss(&v, &u, &[0.0, 0.0], &[0.0, 0.0], Some(PairLabels { text: 0, vis: 1 }), true, 0.1, 0.01)
            .unwrap();
        let expected = 0.98 * 1.0 + 0.01 * 2f64.ln() * 2.0;
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 0.99386).abs() < 1e-5);
    }

    #[test]
    fn amd_alpha_zero_is_cml_bitwise() {
        let (u, v) = unit_with_cos(0.37);
        for positive in [true, false] {
            let a = amd_loss(&v, &u, &[0.2, -1.0], &[3.0, 0.5], Some(PairLabels { text: 1, vis: 0 }), positive, 0.1, 0.0)
                .unwrap();
            assert_eq!(a.to_bits(), cml_loss(&u, &v, positive, 0.1).to_bits());
        }
    }

    #[test]
    fn amd_rejects_bad_labels_and_alpha() {
        let (u, v) = unit_with_cos(0.3);
        assert!(amd_loss(&v, &u, &[0.0, 0.0], &[0.0, 0.0], Some(PairLabels { text: 2, vis: 0 }), true, 0.1, 0.01).is_err());
        assert!(amd_loss(&v, &u, &[0.0], &[0.0], None, true, 0.1, 0.5).is_err());
    }
}
