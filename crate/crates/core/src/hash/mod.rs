//! Hash functions and families over the Hamming cube, the powering
//! construction, and exact sensitivity computation.

mod family;
mod function;
mod sensitivity;

pub use family::{
    bit_sampling_family, constant_family, explicit_family, minhash_family, parity_family, random_table_family,
    trivial_family, ExplicitFunction, FamilyDescriptor, FiniteSupport, HashFamily, MAX_MATERIALIZED_SUPPORT,
    TRIVIAL_FAMILY_MAX_DIM,
};
pub use function::{pack_labels, HashFunction, Label, MAX_TABLE_DIM};
pub use sensitivity::{
    bit_sampling_profile, exact_sensitivity, rho_of, DistanceKind, Fraction, Rho, SensitivityProfile,
    EXACT_SENSITIVITY_MAX_DIM,
};

/// `power(family, k)`; see [`HashFamily::power`].
pub fn power(family: &HashFamily, k: usize) -> crate::Result<HashFamily> {
    family.power(k)
}
