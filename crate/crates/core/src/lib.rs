pub mod dot;
pub mod gtm;
pub mod json;
pub mod lex;
pub mod m2c;
pub mod m2m;
pub mod megamodel;
pub mod model;
pub mod process;
pub mod trace;
pub mod workspace;
