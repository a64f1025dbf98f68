// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cusp_analysis;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod induced;
pub mod numeric;
pub mod observable;
pub mod paths_metrics;
pub mod stable;
pub mod stable_stats;
pub mod tail;
