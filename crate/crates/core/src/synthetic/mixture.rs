use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::prob::{self, Prob};
use crate::synthetic::distribution::ExplicitDistribution;

/// The noise rate M/(M+N) above which a single uniform-noise sequence is more
/// probable than any single uniform-clean sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalEpsilon {
    pub exact: Prob,
    pub value: f64,
}

/// Smallest ε at which (1−ε)/N < ε/M stops failing, i.e. 1/(1 + N/M).
pub fn critical_epsilon(n: impl Into<BigUint>, m: impl Into<BigUint>) -> Result<CriticalEpsilon> {
    let (n, m) = (n.into(), m.into());
    if n.is_zero() || m.is_zero() {
        return Err(Error::ZeroSupport);
    }
    let exact = BigRational::new(BigInt::from(m.clone()), BigInt::from(m + n));
    let value = prob::to_f64(&exact);
    Ok(CriticalEpsilon { exact, value })
}

/// Clean and noise distributions mixed with weights (1−ε) and ε.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub clean: ExplicitDistribution,
    pub noise: ExplicitDistribution,
    pub epsilon: Prob,
}

/// (1−ε)·P_clean + ε·P_noise. Overlapping supports add; zero-mass entries
/// (ε = 0 or ε = 1) are dropped.
pub fn build_mixture(spec: &MixtureSpec) -> Result<ExplicitDistribution> {
    if spec.clean.vocab() != spec.noise.vocab() {
        return Err(Error::VocabMismatch);
    }
    if !prob::is_probability(&spec.epsilon) {
        return Err(Error::InvalidProbability(prob::format_prob(&spec.epsilon)));
    }
    let keep = Prob::one() - &spec.epsilon;
    let scaled = |d: &ExplicitDistribution, w: &Prob| {
        d.entries()
            .iter()
            .map(|(s, p)| (s.clone(), p * w))
            .filter(|(_, p)| !p.is_zero())
            .collect::<Vec<_>>()
    };
    let mut entries = scaled(&spec.clean, &keep);
    entries.extend(scaled(&spec.noise, &spec.epsilon));
    ExplicitDistribution::new(spec.clean.vocab().clone(), entries)
}
