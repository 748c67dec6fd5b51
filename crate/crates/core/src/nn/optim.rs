use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{Gradients, ModelState, ParamGroup};
use crate::error::{Error, Result};
use crate::seed;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_SHRINK: f64 = 0.4;
pub const DEFAULT_PERTURB: f64 = 0.1;
pub const DEFAULT_SIGMA: f64 = 1.0;

/// Applies one bias-corrected Adam update to every tensor.
///
/// A non-finite gradient is rejected before anything is modified.
pub fn adam_step(model: &mut ModelState, grads: &Gradients, lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be finite and non-negative, got {lr}")));
    }
    let shapes: Vec<_> = model.params().iter().map(|(_, p)| p.value.shape()).collect();
    if shapes.len() != grads.tensors.len() {
        return Err(Error::DimensionMismatch { expected: shapes.len(), got: grads.tensors.len() });
    }
    for (s, g) in shapes.iter().zip(&grads.tensors) {
        if *s != g.shape() {
            return Err(Error::invalid(format!("gradient shape {:?} does not match parameter {:?}", g.shape(), s)));
        }
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    for ((_, p), g) in model.params_mut().into_iter().zip(&grads.tensors) {
        p.step += 1;
        let t = p.step as i32;
        let inv_c1 = 1.0 / (1.0 - ADAM_BETA1.powi(t));
        let inv_c2 = 1.0 / (1.0 - ADAM_BETA2.powi(t));
        let moments = p.m.as_mut_slice().iter_mut().zip(p.v.as_mut_slice().iter_mut());
        for ((theta, (m, v)), &gk) in p.value.as_mut_slice().iter_mut().zip(moments).zip(g.as_slice()) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gk;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gk * gk;
            *theta -= lr * (*m * inv_c1) / ((*v * inv_c2).sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Which tensors a shrink-and-perturb step touches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpSubset {
    /// The node-embedding table only.
    Emb,
    /// Both convolution layers.
    Gnn,
    #[default]
    Full,
}

impl SpSubset {
    pub fn includes(self, group: ParamGroup) -> bool {
        matches!(
            (self, group),
            (SpSubset::Full, _) | (SpSubset::Emb, ParamGroup::Embedding) | (SpSubset::Gnn, ParamGroup::Gnn)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpSubset::Emb => "emb",
            SpSubset::Gnn => "gnn",
            SpSubset::Full => "full",
        }
    }
}

impl std::str::FromStr for SpSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "emb" | "embedding" => Ok(SpSubset::Emb),
            "gnn" => Ok(SpSubset::Gnn),
            "full" | "all" => Ok(SpSubset::Full),
            other => Err(Error::invalid(format!("unknown SP subset `{other}` (expected emb, gnn or full)"))),
        }
    }
}

/// Noise source for the perturbation term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Noise {
    Gaussian {
        sigma: f64,
    },
    /// Deterministic zero noise, for isolating the shrink part.
    Zero,
}

impl Default for Noise {
    fn default() -> Self {
        Noise::Gaussian { sigma: DEFAULT_SIGMA }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkPerturb {
    pub shrink: f64,
    pub perturb: f64,
    pub subset: SpSubset,
    pub noise: Noise,
    /// Zero Adam moments and step counters of the perturbed tensors.
    pub reset_adam: bool,
}

impl Default for ShrinkPerturb {
    fn default() -> Self {
        ShrinkPerturb {
            shrink: DEFAULT_SHRINK,
            perturb: DEFAULT_PERTURB,
            subset: SpSubset::Full,
            noise: Noise::default(),
            reset_adam: true,
        }
    }
}

impl ShrinkPerturb {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.shrink) {
            return Err(Error::invalid(format!("shrink coefficient must lie in (0, 1), got {}", self.shrink)));
        }
        if !open_unit(self.perturb) {
            return Err(Error::invalid(format!("perturb coefficient must lie in (0, 1), got {}", self.perturb)));
        }
        if let Noise::Gaussian { sigma } = self.noise {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::invalid(format!("noise sigma must be finite and non-negative, got {sigma}")));
            }
        }
        Ok(())
    }
}

/// `theta <- shrink * theta + perturb * eps` on every tensor in the subset.
pub fn shrink_perturb(model: &mut ModelState, sp: &ShrinkPerturb, seed: u64) -> Result<()> {
    sp.validate()?;
    let mut rng = seed::rng(seed);
    let normal = match sp.noise {
        Noise::Gaussian { sigma } => Some(Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?),
        Noise::Zero => None,
    };
    for (group, p) in model.params_mut() {
        if !sp.subset.includes(group) {
            continue;
        }
        for v in p.value.as_mut_slice() {
            let eps = normal.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            *v = sp.shrink * *v + sp.perturb * eps;
        }
        if sp.reset_adam {
            p.reset_moments();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerKind, Mat, ModelDims};

    fn model() -> ModelState {
        ModelState::init(ModelDims::new(4, 6, 5, 1), LayerKind::Sage, 9)
    }

    fn grads_like(m: &ModelState, f: impl Fn(usize) -> f64) -> Gradients {
        Gradients {
            tensors: m
                .params()
                .iter()
                .map(|(_, p)| {
                    let (r, c) = p.value.shape();
                    Mat::from_fn(r, c, |i, j| f(i * c + j))
                })
                .collect(),
        }
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut m = model();
        let before = m.clone();
        let g = grads_like(&m, |k| (k as f64).sin());
        adam_step(&mut m, &g, 1e-3).unwrap();
        let after_one = m.clone();
        let g = grads_like(&m, |_| 0.0);
        adam_step(&mut m, &g, 1e-3).unwrap();
        for ((_, a), (_, b)) in after_one.params().iter().zip(m.params().iter()) {
            for (x, y) in a.first_moment().as_slice().iter().zip(b.first_moment().as_slice()) {
                assert!((y - ADAM_BETA1 * x).abs() <= 1e-18);
            }
        }
        assert_ne!(before.embedding.value, m.embedding.value);
    }

    #[test]
    fn zero_gradient_from_fresh_state_is_a_no_op() {
        let mut m = model();
        let before = m.clone();
        let g = grads_like(&m, |_| 0.0);
        adam_step(&mut m, &g, 1e-3).unwrap();
        for ((_, a), (_, b)) in before.params().iter().zip(m.params().iter()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn first_step_is_sign_scaled() {
        let mut m = model();
        let before = m.clone();
        let g = grads_like(&m, |k| (k as f64 * 0.7).cos() * 3.0);
        adam_step(&mut m, &g, 0.01).unwrap();
        for (((_, a), (_, b)), gt) in before.params().iter().zip(m.params().iter()).zip(&g.tensors) {
            for ((x, y), gk) in a.value.as_slice().iter().zip(b.value.as_slice()).zip(gt.as_slice()) {
                let expected = 0.01 * gk / (gk.abs() + ADAM_EPS);
                assert!(((x - y) - expected).abs() < 1e-12);
            }
            assert_eq!(b.adam_step_count(), 1);
        }
    }

    #[test]
    fn zero_lr_changes_nothing() {
        let mut m = model();
        let before = m.clone();
        let g = grads_like(&m, |k| k as f64);
        adam_step(&mut m, &g, 0.0).unwrap();
        assert_eq!(before.embedding.value, m.embedding.value);
        assert_eq!(before.conv2.weight.value, m.conv2.weight.value);
    }

    #[test]
    fn nan_gradient_is_refused() {
        let mut m = model();
        let before = m.clone();
        let g = grads_like(&m, |k| if k == 3 { f64::NAN } else { 1.0 });
        assert!(matches!(adam_step(&mut m, &g, 1e-3), Err(Error::NonFinite(_))));
        assert_eq!(before.params().len(), m.params().len());
        for ((_, a), (_, b)) in before.params().iter().zip(m.params().iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_noise_shrinks_exactly() {
        let mut m = model();
        m.tensor_mut(0).fill(1.0);
        let before = m.clone();
        let sp = ShrinkPerturb { noise: Noise::Zero, ..Default::default() };
        shrink_perturb(&mut m, &sp, 0).unwrap();
        assert!(m.embedding.value.as_slice().iter().all(|&v| v == 0.4));
        for ((_, a), (_, b)) in before.params().iter().zip(m.params().iter()) {
            let want = 0.4 * a.value.frobenius_norm();
            assert!((b.value.frobenius_norm() - want).abs() <= 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn subset_isolation() {
        let mut m = model();
        let g = grads_like(&m, |k| k as f64 + 1.0);
        adam_step(&mut m, &g, 1e-3).unwrap();
        let before = m.clone();
        let sp = ShrinkPerturb { subset: SpSubset::Emb, ..Default::default() };
        shrink_perturb(&mut m, &sp, 4).unwrap();
        assert_eq!(before.conv1, m.conv1);
        assert_eq!(before.conv2, m.conv2);
        assert_ne!(before.embedding.value, m.embedding.value);
        assert_eq!(m.embedding.adam_step_count(), 0);

        let mut g = before.clone();
        shrink_perturb(&mut g, &ShrinkPerturb { subset: SpSubset::Gnn, reset_adam: false, ..Default::default() }, 4)
            .unwrap();
        assert_eq!(before.embedding, g.embedding);
        assert_ne!(before.conv1.weight.value, g.conv1.weight.value);
        assert_eq!(g.conv1.weight.adam_step_count(), 1);
    }

    #[test]
    fn coefficients_are_checked() {
        let mut m = model();
        for (s, p) in [(0.0, 0.1), (1.0, 0.1), (0.4, 0.0), (0.4, 1.5)] {
            let sp = ShrinkPerturb { shrink: s, perturb: p, ..Default::default() };
            assert!(shrink_perturb(&mut m, &sp, 0).is_err());
        }
    }

    #[test]
    fn subset_parsing() {
        assert_eq!("emb".parse::<SpSubset>().unwrap(), SpSubset::Emb);
        assert_eq!("GNN".parse::<SpSubset>().unwrap(), SpSubset::Gnn);
        assert!("conv".parse::<SpSubset>().is_err());
    }
}
