#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod polyalg;
pub mod odeint;
pub mod dichotomy;
pub mod injectivity;
pub mod mycheck;
pub mod cli;
mod unbounded;
