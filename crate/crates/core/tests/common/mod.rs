#![allow(dead_code)]

pub mod fixtures;
pub mod lti;
pub mod qp_oracle;
