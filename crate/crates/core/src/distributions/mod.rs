//! Operations on transforms of distributions: distances, deconvolution,
//! sampling and joint-distribution algebra.

mod joint;
mod sampling;

pub use joint::{
    bayes_posterior, condition, condition_on_first, joint_eval, marginalize, marginalize_second,
    product_independent, Posterior,
};
pub use sampling::{mh_sample, GaussianStep, MHConfig, Proposal, Substitution};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::hypervector::inner;
use crate::transform::{Role, TransformVec};

/// Default cap on the gram condition number before deconvolution refuses.
pub const CONDITION_CAP: f64 = 1e8;

fn require_distribution(t: &TransformVec, what: &str) -> Result<()> {
    if t.role() != Role::Distribution {
        return invalid(format!("{what} must be the transform of a distribution"));
    }
    Ok(())
}

fn require_same_encoder(a: &TransformVec, b: &TransformVec) -> Result<()> {
    if a.encoder_id() != b.encoder_id() {
        return Err(Error::EncoderMismatch { expected: a.encoder_id(), found: b.encoder_id() });
    }
    Ok(())
}

/// Maximum mean discrepancy `‖P − Q‖` under the D-scaled inner product.
pub fn mmd(p: &TransformVec, q: &TransformVec) -> Result<f64> {
    require_distribution(p, "first argument")?;
    require_distribution(q, "second argument")?;
    require_same_encoder(p, q)?;
    let diff = p.vec().sub(q.vec())?;
    Ok(inner(&diff, &diff)?.max(0.0).sqrt())
}

/// Mixture weights recovered by deconvolution.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSolution {
    /// Raw solution of the gram system, or its simplex projection.
    pub coefficients: Vec<f64>,
    /// The unprojected solution, always reported.
    pub raw: Vec<f64>,
    /// `M_ij = ⟨P_i, P_j⟩`.
    pub gram: DMatrix<f64>,
    pub projected: bool,
    /// Ratio of the extreme singular values of the gram matrix.
    pub condition: f64,
}

/// Solve `Σ_i c_i ⟨P_i, P_j⟩ = ⟨P, P_j⟩` for the mixture weights `c`.
pub fn deconvolve(p: &TransformVec, components: &[TransformVec], project: bool) -> Result<MixtureSolution> {
    deconvolve_with_cap(p, components, project, CONDITION_CAP)
}

/// [`deconvolve`] with an explicit condition-number cap.
pub fn deconvolve_with_cap(
    p: &TransformVec,
    components: &[TransformVec],
    project: bool,
    cap: f64,
) -> Result<MixtureSolution> {
    if components.is_empty() {
        return invalid("deconvolution needs at least one component");
    }
    require_distribution(p, "mixture")?;
    for c in components {
        require_distribution(c, "component")?;
        require_same_encoder(p, c)?;
    }
    let m = components.len();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = inner(components[i].vec(), components[j].vec())?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let rhs = DVector::from_iterator(m, components.iter().map(|c| inner(p.vec(), c.vec())).collect::<Result<Vec<_>>>()?);
    let svd = gram.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= cap) {
        return Err(Error::IllConditioned { condition, cap });
    }
    let solution = svd.solve(&rhs, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let raw: Vec<f64> = solution.iter().copied().collect();
    let coefficients = if project { project_to_simplex(&raw) } else { raw.clone() };
    Ok(MixtureSolution { coefficients, raw, gram, projected: project, condition })
}

/// Euclidean projection onto `{c : c_i ≥ 0, Σ c_i = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k as f64 + 1.0);
        if u - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}
