use std::path::PathBuf;

use capset_core::dictionary::{gen_dct_pair, gen_random, gen_spoiled, load_dictionary, save_dictionary, LoadWarning};
use capset_core::Dictionary;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{DictArgs, Family, GenerateArgs};
use crate::{CliError, CliResult};

/// What the dictionary was built from, enough to rebuild it.
#[derive(Debug, Clone, Serialize)]
pub struct DictDescriptor {
    pub family: Option<Family>,
    pub file: Option<PathBuf>,
    pub n: usize,
    pub l: usize,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spoiled: Option<(usize, usize)>,
    pub label: String,
    /// SHA-256 of the entries (little-endian f64, column-major) after
    /// loading or generation.
    pub sha256: String,
}

pub fn matrix_hash(dict: &Dictionary) -> String {
    let mut hasher = Sha256::new();
    hasher.update((dict.rows() as u64).to_le_bytes());
    hasher.update((dict.cols() as u64).to_le_bytes());
    for v in dict.matrix().iter() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

pub fn build(args: &DictArgs) -> CliResult<(Dictionary, DictDescriptor)> {
    let (dict, family, spoiled) = match &args.load {
        Some(path) => {
            let loaded = load_dictionary(path, args.renormalize)?;
            for w in &loaded.warnings {
                match w {
                    LoadWarning::NotOvercomplete { n, l } => log::warn!("{}: L = {l} ≤ N = {n}", path.display()),
                    LoadWarning::NotUnitNorm { max_deviation, renormalized } => log::warn!(
                        "{}: column norms deviate from 1 by up to {max_deviation:.3e}{}",
                        path.display(),
                        if *renormalized { " (renormalized)" } else { "" }
                    ),
                }
            }
            (loaded.dictionary, None, None)
        }
        None => {
            let n = args
                .n
                .ok_or_else(|| CliError::Config("--n is required unless --load is given".into()))?;
            let dict = match args.family {
                Family::Random => gen_random(n, args.l.unwrap_or(2 * n), args.seed)?,
                Family::Spoiled => gen_spoiled(n, args.l.unwrap_or(2 * n), args.seed, args.spoiled, args.combined)?,
                Family::Dct => {
                    if args.l.is_some_and(|l| l != 2 * n) {
                        return Err(CliError::Config("the dct family is always N×2N".into()));
                    }
                    gen_dct_pair(n)?
                }
            };
            let spoiled = (args.family == Family::Spoiled).then_some((args.spoiled, args.combined));
            (dict, Some(args.family), spoiled)
        }
    };
    let descriptor = DictDescriptor {
        family,
        file: args.load.clone(),
        n: dict.rows(),
        l: dict.cols(),
        seed: dict.seed(),
        spoiled,
        label: dict.label().to_string(),
        sha256: matrix_hash(&dict),
    };
    Ok((dict, descriptor))
}

pub fn generate(args: GenerateArgs) -> CliResult<()> {
    if args.dict.load.is_some() {
        return Err(CliError::Config("generate does not take --load".into()));
    }
    let (dict, descriptor) = build(&args.dict)?;
    save_dictionary(&dict, &args.out)?;
    log::info!("wrote {} ({}×{}, sha256 {})", args.out.display(), descriptor.n, descriptor.l, descriptor.sha256);
    Ok(())
}
