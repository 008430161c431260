use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simsearch_core::molgraph::{parse_smiles, random_mutant, write_smiles};

use super::batch_status;
use crate::error::CliError;
use crate::io::{commit, smiles_lines, staged, Rejects};
use crate::MutateArgs;

pub fn run(args: &MutateArgs) -> Result<i32, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut out = staged(&args.output)?;
    let mut rejects = Rejects::beside(&args.output, args.rejects.as_deref());
    let mut next_id = 0u64;
    for line in smiles_lines(&args.input)? {
        let line = line?;
        let anchor = match parse_smiles(&line.smiles) {
            Ok(g) => g,
            Err(e) => {
                rejects.add(&line, &e)?;
                continue;
            }
        };
        for _ in 0..args.per_anchor {
            let (mutant, kind) = random_mutant(&anchor, rng.random());
            writeln!(out, "{}\t{next_id}\t{}\t{}", write_smiles(&mutant), line.id, kind.as_str())?;
            next_id += 1;
        }
    }
    commit(out, &args.output)?;
    let rejects_path = rejects.path().to_path_buf();
    let rejected = rejects.finish()?;
    Ok(batch_status(rejected, &rejects_path))
}
