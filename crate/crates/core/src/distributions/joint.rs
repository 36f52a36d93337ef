//! Conditioning, marginalization and Bayes' rule on product transforms.
//!
//! A joint transform `P_XY` lives on `Δ(x, y) = Δφ(x) ⊗ Δψ(y)`. Binding with
//! `Δψ(y)` conditions on `y`, binding with `𝟙_X` integrates `x` out.

use crate::error::{invalid, Error, Result};
use crate::hypervector::{bind, inner};
use crate::normalization::{Embedding, Product};
use crate::transform::{Role, TransformVec};

fn require_role(t: &TransformVec, role: Role, what: &str) -> Result<()> {
    if t.role() != role {
        return invalid(format!("{what} must have role {role}, found {}", t.role()));
    }
    Ok(())
}

/// `P_Xy = P_XY ⊗ Δψ(y)`: an unnormalized conditional, a function of `x`.
pub fn condition<A: Embedding, B: Embedding>(
    product: &Product<A, B>,
    joint: &TransformVec,
    y: &B::Point,
) -> Result<TransformVec> {
    joint.check_embedding(product)?;
    let vec = bind(joint.vec(), &product.second().delta(y)?)?;
    Ok(TransformVec::new(vec, Role::Function, product.first().id()))
}

/// `P_xY = P_XY ⊗ Δφ(x)`: conditioning on the first factor.
pub fn condition_on_first<A: Embedding, B: Embedding>(
    product: &Product<A, B>,
    joint: &TransformVec,
    x: &A::Point,
) -> Result<TransformVec> {
    joint.check_embedding(product)?;
    let vec = bind(joint.vec(), &product.first().delta(x)?)?;
    Ok(TransformVec::new(vec, Role::Function, product.second().id()))
}

/// `P_Y = P_XY ⊗ 𝟙_X` with `𝟙_X` the transform of 1 under the first factor.
pub fn marginalize<A: Embedding, B: Embedding>(
    product: &Product<A, B>,
    joint: &TransformVec,
    ones_first: &TransformVec,
) -> Result<TransformVec> {
    joint.check_embedding(product)?;
    ones_first.check_embedding(product.first())?;
    require_role(ones_first, Role::Function, "the unit transform")?;
    let vec = bind(joint.vec(), ones_first.vec())?;
    Ok(TransformVec::new(vec, Role::Distribution, product.second().id()))
}

/// `P_X = P_XY ⊗ 𝟙_Y`.
pub fn marginalize_second<A: Embedding, B: Embedding>(
    product: &Product<A, B>,
    joint: &TransformVec,
    ones_second: &TransformVec,
) -> Result<TransformVec> {
    joint.check_embedding(product)?;
    ones_second.check_embedding(product.second())?;
    require_role(ones_second, Role::Function, "the unit transform")?;
    let vec = bind(joint.vec(), ones_second.vec())?;
    Ok(TransformVec::new(vec, Role::Distribution, product.first().id()))
}

/// A normalized conditional and the evidence it was divided by.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub transform: TransformVec,
    /// `⟨P_XY ⊗ 𝟙_X, Δψ(y)⟩`, the marginal density at the observation.
    pub evidence: f64,
}

/// `P_X|y = (P_XY ⊗ Δψ(y)) / ⟨P_XY ⊗ 𝟙_X, Δψ(y)⟩`.
///
/// Fails with a null-event error when the evidence is below `floor`.
pub fn bayes_posterior<A: Embedding, B: Embedding>(
    product: &Product<A, B>,
    joint: &TransformVec,
    y: &B::Point,
    ones_first: &TransformVec,
    floor: f64,
) -> Result<Posterior> {
    let marginal = marginalize(product, joint, ones_first)?;
    let evidence = inner(marginal.vec(), &product.second().delta(y)?)?;
    if !(evidence > floor) {
        return Err(Error::NullEvent { denominator: evidence, floor });
    }
    let conditional = condition(product, joint, y)?;
    let vec = conditional.vec().scale(1.0 / evidence);
    Ok(Posterior { transform: TransformVec::new(vec, Role::Distribution, product.first().id()), evidence })
}

/// `P_XY = P_X ⊗ P_Y` for independent factors.
///
/// The product embedding already rejects factors that share a seed.
pub fn product_independent<A: Embedding, B: Embedding>(
    product: &Product<A, B>,
    first: &TransformVec,
    second: &TransformVec,
) -> Result<TransformVec> {
    first.check_embedding(product.first())?;
    second.check_embedding(product.second())?;
    require_role(first, Role::Distribution, "the first factor")?;
    require_role(second, Role::Distribution, "the second factor")?;
    let vec = bind(first.vec(), second.vec())?;
    Ok(TransformVec::new(vec, Role::Distribution, product.id()))
}

/// `⟨P_XY, Δφ(x) ⊗ Δψ(y)⟩`, associated as `⟨P_XY ⊗ Δψ(y), Δφ(x)⟩`.
///
/// This association performs the same floating-point operations as
/// conditioning on `y` and evaluating at `x`, so the two agree bit for bit.
/// Materializing `Δφ(x) ⊗ Δψ(y)` first rounds differently.
pub fn joint_eval<A: Embedding, B: Embedding>(
    product: &Product<A, B>,
    joint: &TransformVec,
    point: &(A::Point, B::Point),
) -> Result<f64> {
    joint.check_embedding(product)?;
    let conditioned = bind(joint.vec(), &product.second().delta(&point.1)?)?;
    inner(&conditioned, &product.first().delta(&point.0)?)
}
