pub mod balance;
pub mod cli;
pub mod continuation;
pub mod diagnostics;
pub mod exec;
pub mod flow;
pub mod quadrature;
pub mod seqspace;
