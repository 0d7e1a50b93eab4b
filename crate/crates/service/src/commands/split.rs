use std::fmt::Write;

use anyhow::Context;

use curatekit::datamodel::{load_dataset, save_dataset};
use curatekit::stats::{stratified_split, SplitSpec, SPLIT_NAMES};

use crate::cli::SplitArgs;

pub fn split(a: &SplitArgs) -> anyhow::Result<String> {
    let d = load_dataset(&a.gt).with_context(|| format!("loading {}", a.gt.display()))?;
    let f: [f64; 3] = a
        .fractions
        .as_slice()
        .try_into()
        .context("--fractions needs exactly three values")?;
    let out = stratified_split(&d, &SplitSpec::new(f, a.seed)?);
    for w in &out.warnings {
        tracing::warn!("{w}");
    }
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut text = String::new();
    for (name, part) in SPLIT_NAMES.iter().zip(out.parts()) {
        let path = a.out_dir.join(format!("{name}.json"));
        save_dataset(part, &path).with_context(|| format!("writing {}", path.display()))?;
        let _ = writeln!(
            text,
            "{name}: {} images, {} annotations -> {}",
            part.images.len(),
            part.annotations.len(),
            path.display()
        );
    }
    Ok(text)
}
