use std::io::BufReader;
use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simsearch_core::embedding::EmbeddingVector;
use simsearch_core::formats::EmbeddingWriter;
use simsearch_core::reduce::{PcaAccumulator, PcaModel, ReduceError, SparseProjection};

use crate::error::{CliError, EXIT_OK};
use crate::io::{commit, open_file, read_magic, staged, VectorInput};
use crate::{ApplyArgs, FitPcaArgs, MakeSrpArgs};

pub fn fit_pca(args: &FitPcaArgs) -> Result<i32, CliError> {
    let mut input = VectorInput::open(&args.input)?;
    let mut acc = PcaAccumulator::new(input.dim());
    let mut row = Vec::new();
    match args.sample {
        None => {
            while input.next_into(&mut row)?.is_some() {
                acc.push(&row)?;
            }
        }
        Some(0) => return Err(CliError::usage("--sample must be at least 1")),
        Some(size) => {
            // Reservoir sampling, then accumulation in file order.
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut reservoir: Vec<(u64, Vec<f64>)> = Vec::new();
            let mut seen = 0u64;
            while input.next_into(&mut row)?.is_some() {
                if seen < size {
                    reservoir.push((seen, row.clone()));
                } else {
                    let j = rng.random_range(0..=seen);
                    if j < size {
                        reservoir[j as usize] = (seen, row.clone());
                    }
                }
                seen += 1;
            }
            reservoir.sort_unstable_by_key(|r| r.0);
            for (_, r) in &reservoir {
                acc.push(r)?;
            }
        }
    }
    info!("fitting PCA on {} records", acc.count());
    let model = acc.finish(args.dims).map_err(|e| match e {
        ReduceError::TooFewSamples(_) => CliError::data(e.to_string()),
        other => other.into(),
    })?;
    let mut out = staged(&args.output)?;
    model.write_to(&mut out)?;
    commit(out, &args.output)?;
    Ok(EXIT_OK)
}

pub fn make_srp(args: &MakeSrpArgs) -> Result<i32, CliError> {
    let model = SparseProjection::new(args.d_in, args.dims, args.seed).map_err(|e| CliError::usage(e.to_string()))?;
    let mut out = staged(&args.output)?;
    model.write_to(&mut out)?;
    commit(out, &args.output)?;
    Ok(EXIT_OK)
}

enum Model {
    Pca(PcaModel),
    Srp(SparseProjection),
}

impl Model {
    fn load(path: &Path) -> Result<Self, CliError> {
        let ctx = |e: CliError| e.context(path.display());
        let magic = read_magic(path)?;
        let mut reader = BufReader::new(open_file(path)?);
        match &magic {
            b"PCA1" => Ok(Model::Pca(PcaModel::read_from(&mut reader).map_err(|e| ctx(e.into()))?)),
            b"SRP1" => Ok(Model::Srp(SparseProjection::read_from(&mut reader).map_err(|e| ctx(e.into()))?)),
            _ => Err(CliError::data(format!("{}: not a PCA1 or SRP1 model", path.display()))),
        }
    }

    fn d_in(&self) -> usize {
        match self {
            Model::Pca(m) => m.d_in(),
            Model::Srp(m) => m.d_in(),
        }
    }

    fn d_out(&self) -> usize {
        match self {
            Model::Pca(m) => m.d_out(),
            Model::Srp(m) => m.d_out(),
        }
    }

    fn apply(&self, x: &[f64]) -> Result<EmbeddingVector, ReduceError> {
        match self {
            Model::Pca(m) => m.apply(x),
            Model::Srp(m) => m.apply(x),
        }
    }
}

pub fn apply(args: &ApplyArgs) -> Result<i32, CliError> {
    let model = Model::load(&args.model)?;
    let mut input = VectorInput::open(&args.input)?;
    if input.dim() != model.d_in() {
        return Err(CliError::data(format!(
            "model expects {}-dimensional input but {} holds {}-dimensional records",
            model.d_in(),
            args.input.display(),
            input.dim()
        )));
    }
    let mut writer = EmbeddingWriter::new(staged(&args.output)?, model.d_out())?;
    let mut row = Vec::new();
    while let Some(id) = input.next_into(&mut row)? {
        let v = model.apply(&row).map_err(|e| CliError::from(e).context(format!("record {id}")))?;
        writer.write(id, v.as_slice())?;
    }
    info!("projected {} records to {} dimensions", writer.count(), model.d_out());
    commit(writer.finish()?, &args.output)?;
    Ok(EXIT_OK)
}
