//! `lpcorrupt` command-line tool.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Process exit status for a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Io,
    Validation,
}

impl Category {
    fn code(self) -> u8 {
        match self {
            Category::Io => 3,
            Category::Validation => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Validation => "validation",
        }
    }
}

/// A failure with its exit category.
#[derive(Debug)]
pub struct Failure {
    pub category: Category,
    pub message: String,
}

impl From<lpcorrupt_core::Error> for Failure {
    fn from(e: lpcorrupt_core::Error) -> Self {
        let category = if e.is_io() { Category::Io } else { Category::Validation };
        Failure {
            category,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with status 2 from here.
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[usage]: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.category.name(), f.message);
            ExitCode::from(f.category.code())
        }
    }
}
