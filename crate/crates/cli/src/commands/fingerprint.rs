use std::io::Write;

use log::info;
use simsearch_core::fingerprint::{fingerprint, FingerprintKind};
use simsearch_core::formats::FingerprintWriter;
use simsearch_core::molgraph::parse_smiles;

use super::batch_status;
use crate::error::CliError;
use crate::io::{commit, smiles_lines, staged, Rejects};
use crate::{FingerprintArgs, KindArg};

pub fn run(args: &FingerprintArgs) -> Result<i32, CliError> {
    let kind = match args.kind {
        KindArg::Binary => FingerprintKind::Binary,
        KindArg::Counts => FingerprintKind::Counts,
    };
    let lines = smiles_lines(&args.input)?;
    let mut writer = FingerprintWriter::new(staged(&args.output)?, kind)?;
    let mut id_map = match &args.id_map {
        Some(path) => {
            let mut w = staged(path)?;
            writeln!(w, "id\tname")?;
            Some(w)
        }
        None => None,
    };
    let mut rejects = Rejects::beside(&args.output, args.rejects.as_deref());
    for line in lines {
        let line = line?;
        match parse_smiles(&line.smiles) {
            Ok(graph) => {
                writer.write(line.id, &fingerprint(&graph, kind, args.radius))?;
                if let Some(w) = id_map.as_mut() {
                    writeln!(w, "{}\t{}", line.id, line.name.as_deref().unwrap_or(""))?;
                }
            }
            Err(e) => rejects.add(&line, &e)?,
        }
    }
    let written = writer.count();
    commit(writer.finish()?, &args.output)?;
    if let (Some(w), Some(path)) = (id_map, &args.id_map) {
        commit(w, path)?;
    }
    let rejects_path = rejects.path().to_path_buf();
    let rejected = rejects.finish()?;
    info!("wrote {written} fingerprints, rejected {rejected} lines");
    Ok(batch_status(rejected, &rejects_path))
}
