//! Symbolic systems for the region derivations (in progress).
pub fn binning_feasibility_system() {}
pub fn achievable_region_system() {}
pub fn pooled_randomness_region() {}
pub fn osrb_atom_values() {}
pub fn random_thm1_dec() {}
pub fn random_thm1_target() {}
