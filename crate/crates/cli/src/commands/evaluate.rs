use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use slz_core::metrics::{confusion, evaluate, ConfusionMatrix};

use crate::error::{CliError, CliResult};
use crate::inputs;

/// Pooled segmentation metrics of predicted masks against ground truth
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted masks (*.pgm)
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth masks with the same file names
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn mask_names(dir: &Path) -> CliResult<BTreeSet<String>> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("pgm") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(name.to_string());
            }
        }
    }
    Ok(names)
}

pub fn run(args: &EvaluateArgs) -> CliResult {
    let pred = mask_names(&args.pred)?;
    let gt = mask_names(&args.gt)?;
    if let Some(name) = gt.difference(&pred).next() {
        return Err(CliError::input(format!(
            "{} has no counterpart in {}",
            args.gt.join(name).display(),
            args.pred.display()
        )));
    }
    if let Some(name) = pred.difference(&gt).next() {
        return Err(CliError::input(format!(
            "{} has no counterpart in {}",
            args.pred.join(name).display(),
            args.gt.display()
        )));
    }
    if gt.is_empty() {
        return Err(CliError::input(format!(
            "no .pgm masks in {}",
            args.gt.display()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for name in &gt {
        let p = inputs::mask(&args.pred.join(name))?;
        let g = inputs::mask(&args.gt.join(name))?;
        cm += confusion(&p, &g, None).map_err(|e| CliError::from(e).at(Path::new(name)))?;
    }
    let report = evaluate(&cm)?;
    eprintln!("{} images: {}", gt.len(), report.summary());
    inputs::emit(&report.to_csv(), args.out.as_ref())
}
