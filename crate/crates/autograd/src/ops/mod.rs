pub(crate) mod binary;
pub(crate) mod conv;
pub(crate) mod deform;
pub(crate) mod filter;
pub(crate) mod pool;
pub(crate) mod reduce;
pub(crate) mod shape;
pub(crate) mod unary;
