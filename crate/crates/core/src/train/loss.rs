//! Training objective and image metrics.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::NetworkOutputs;
use crate::tensor::{Element, Tensor};

pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub rgb: f64,
    pub raw: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { rgb: 1.0, raw: 1.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub rgb: Var,
    /// Absent when raw supervision is off.
    pub raw: Option<Var>,
}

/// `λ_rgb·L1(ŷ_rgb, y_rgb) + λ_raw·L1(ŷ_raw, y_raw)`. With `target_raw` set to
/// `None` the raw term is left out of the graph entirely.
pub fn combined_loss<T: Element>(
    tape: &mut Tape<T>,
    out: &NetworkOutputs,
    target_rgb: Var,
    target_raw: Option<Var>,
    weights: LossWeights,
) -> Result<LossTerms> {
    let rgb = tape.l1_loss(out.y_rgb, target_rgb)?;
    let mut total = tape.scale(rgb, weights.rgb);
    let raw = match target_raw {
        Some(t) => {
            let raw = tape.l1_loss(out.y_raw, t)?;
            let weighted = tape.scale(raw, weights.raw);
            total = tape.add(total, weighted)?;
            Some(raw)
        }
        None => None,
    };
    Ok(LossTerms { total, rgb, raw })
}

/// Like [`combined_loss`] but fails when raw supervision is requested
/// without a raw target.
pub fn supervised_loss<T: Element>(
    tape: &mut Tape<T>,
    out: &NetworkOutputs,
    target_rgb: Var,
    target_raw: Option<Var>,
    weights: LossWeights,
    use_raw_supervision: bool,
) -> Result<LossTerms> {
    match (use_raw_supervision, target_raw) {
        (true, None) => Err(Error::Usage("raw supervision is on but no raw target was given".into())),
        (true, t) => combined_loss(tape, out, target_rgb, t, weights),
        (false, _) => combined_loss(tape, out, target_rgb, None, weights),
    }
}

/// `10·log10(peak² / MSE)`, capped at 99 dB.
pub fn psnr<T: Element>(pred: &Tensor<T>, target: &Tensor<T>, peak: f64) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::dim("psnr", format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    let mse = pred.data().iter().zip(target.data()).map(|(&a, &b)| (a.as_f64() - b.as_f64()).powi(2)).sum::<f64>()
        / pred.numel() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}
