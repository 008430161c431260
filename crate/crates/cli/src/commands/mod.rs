mod bench;
mod fingerprint;
mod index;
mod mutate;
mod reduce;

use crate::error::{CliError, EXIT_DATA, EXIT_OK};
use crate::{BenchCommand, Command, IndexCommand, ReduceCommand};

pub fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Fingerprint(a) => fingerprint::run(&a),
        Command::Reduce(ReduceCommand::FitPca(a)) => reduce::fit_pca(&a),
        Command::Reduce(ReduceCommand::MakeSrp(a)) => reduce::make_srp(&a),
        Command::Reduce(ReduceCommand::Apply(a)) => reduce::apply(&a),
        Command::Index(IndexCommand::Build(a)) => index::build(&a),
        Command::Index(IndexCommand::Query(a)) => index::query(&a),
        Command::Index(IndexCommand::Range(a)) => index::range(&a),
        Command::Index(IndexCommand::Stats(a)) => index::stats(&a),
        Command::Bench(BenchCommand::Ged(a)) => bench::ged(&a),
        Command::Bench(BenchCommand::Vs(a)) => bench::vs(&a),
        Command::Bench(BenchCommand::VsSynth(a)) => bench::vs_synth(&a),
        Command::Bench(BenchCommand::Timing(a)) => bench::timing(&a),
        Command::Bench(BenchCommand::BruteForce(a)) => bench::brute_force(&a),
        Command::Mutate(a) => mutate::run(&a),
    }
}

/// Exit code for a batch that finished with `rejected` bad lines.
fn batch_status(rejected: u64, rejects_path: &std::path::Path) -> i32 {
    if rejected == 0 {
        EXIT_OK
    } else {
        eprintln!(
            "simsearch: {rejected} line(s) rejected; see {}",
            rejects_path.display()
        );
        EXIT_DATA
    }
}
