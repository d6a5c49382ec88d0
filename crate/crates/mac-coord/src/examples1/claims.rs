//! Structural-claim counterexample searches (in progress).
pub enum ClaimId { Claim1, Claim2 }
pub enum ClaimSearchOutcome {}
pub fn claim_search() {}
