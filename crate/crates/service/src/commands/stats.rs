use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{bail, Context};

use curatekit::datamodel::{load_dataset, Category};
use curatekit::metrics::IouKind;
use curatekit::stats::{
    class_distribution, mean_relative_sizes, render_distribution_table,
    scale_performance_correlation, size_values_by_name,
};

use crate::cli::{KindArg, StatsArgs};

use super::{stem, EvalOutput};

pub fn stats(a: &StatsArgs) -> anyhow::Result<String> {
    let mut sets = Vec::new();
    for p in &a.gt {
        let d = load_dataset(p).with_context(|| format!("loading {}", p.display()))?;
        sets.push((stem(p), d));
    }

    let mut categories: BTreeMap<_, Category> = BTreeMap::new();
    for (_, d) in &sets {
        for c in &d.categories {
            categories.entry(c.id).or_insert_with(|| c.clone());
        }
    }
    let categories: Vec<Category> = categories.into_values().collect();
    let dists: Vec<_> = sets.iter().map(|(_, d)| class_distribution(d)).collect();
    let columns: Vec<(&str, _)> = sets
        .iter()
        .zip(&dists)
        .map(|((name, _), dist)| (name.as_str(), dist))
        .collect();
    let mut text = render_distribution_table(&columns, &categories);

    if let Some(path) = &a.sizes_out {
        let mut sizes = BTreeMap::new();
        for (name, d) in &sets {
            sizes.insert(name.clone(), size_values_by_name(d)?);
        }
        let mut bytes = serde_json::to_vec_pretty(&sizes)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }

    if let Some(reports) = &a.correlate {
        if sets.len() < 2 {
            bail!("--correlate needs two --gt datasets");
        }
        let kind = match a.kind {
            KindArg::Box => IouKind::Box,
            KindArg::Mask => IouKind::Mask,
            KindArg::Both => bail!("--correlate uses one kind: box or mask"),
        };
        let mut aps = Vec::new();
        for p in reports {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let out: EvalOutput = serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing {}", p.display()))?;
            let r = out
                .report(kind)
                .with_context(|| format!("{} has no {kind} results", p.display()))?;
            aps.push(r.per_class_ap.clone());
        }
        let sizes_a = mean_relative_sizes(&sets[0].1)?;
        let sizes_b = mean_relative_sizes(&sets[1].1)?;
        let corr = scale_performance_correlation(&sizes_a, &sizes_b, &aps[0], &aps[1])?;
        let names: BTreeMap<_, _> = categories.iter().map(|c| (c.id, c.name.as_str())).collect();
        let _ = writeln!(
            text,
            "\n{:<24} {:>10} {:>10}",
            "category", "|d size|", "|d AP|"
        );
        for p in &corr.points {
            let name = names.get(&p.category).copied().unwrap_or("?");
            let _ = writeln!(
                text,
                "{name:<24} {:>10.4} {:>10.4}",
                p.size_delta, p.ap_delta
            );
        }
        match corr.pearson {
            Some(r) => {
                let _ = writeln!(text, "pearson r = {r:.4}");
            }
            None => {
                let _ = writeln!(text, "pearson r undefined (zero variance)");
            }
        }
    }
    Ok(text)
}
