//! Worked-example reports (in progress).
pub fn verify_prop1_corners() {}
pub fn remark3_eval() {}
pub fn enc_sr_point() {}
pub fn appendix_a_region() {}
pub fn det_fn_redundancy_check() {}
