//! Instance generators, the guaranteed-ratio table and the verification suite.

pub mod generate;
pub mod par;
pub mod suite;
pub mod table;

pub use generate::{gen_random, gen_staircase, StairMode};
pub use suite::{
    oracle_step, run_csv_row, run_suite, Algorithm, GeneratorSpec, OracleCheck, OracleSpec,
    RunError, SuiteConfig, SuiteOptions, SuiteReport, WorstRun, RUN_CSV_HEADER,
};
pub use table::{cr_table, crossover, ours, parse_grid, sig12, to_csv, TableRow, TABLE_HEADER};
