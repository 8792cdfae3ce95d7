//! Analytic distributions: distractor mixtures, typo channels, length
//! families, and exact trie compilation of explicit distributions.

mod depth;
mod distribution;
mod mixture;
mod trie;
mod typo;

pub use depth::{length_family, DepthModel, FamilyMember, FamilySpec, LengthFamilyModel};
pub use distribution::{random_distribution, ExplicitDistribution, MASS_TOLERANCE};
pub use mixture::{build_mixture, critical_epsilon, CriticalEpsilon, MixtureSpec};
pub use trie::{TrieModel, TrieState};
pub use typo::{count_typos, numbered_variants, typo_channel};

/// Compiles an explicit distribution into its exact autoregressive model.
pub fn to_autoregressive(dist: ExplicitDistribution) -> TrieModel {
    TrieModel::new(dist)
}
