pub mod parse;
pub mod report;

pub use parse::{cli_parse, FoliationSpec, ParseError, Source};
pub use report::{cli_run, to_json, to_text, Report, Stage};
