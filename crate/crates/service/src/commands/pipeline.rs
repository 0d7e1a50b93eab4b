use std::path::Path;
use std::sync::Arc;

use anyhow::Context;

use curatekit::datamodel::save_dataset;
use curatekit::pipeline::{
    candidates_for, ingest_file, Ontology, RunConfig, SystemClock, Workspace,
};

use crate::cli::{PipelineCommand, WorkspaceArgs};
use crate::oracles::Oracles;

/// Loads the manifest and replays the decision log over it.
pub fn open_workspace(a: &WorkspaceArgs) -> anyhow::Result<Workspace> {
    let ingested = ingest_file(&a.manifest)?;
    for s in &ingested.skipped {
        tracing::warn!(line = s.line, id = %s.id, "skipped manifest entry: {}", s.reason);
    }
    let root = a.images.clone().unwrap_or_else(|| {
        a.manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let ws = Workspace::open(
        candidates_for(&ingested.entries),
        &a.log,
        &root,
        Ontology::default(),
        Arc::new(SystemClock),
    )
    .with_context(|| format!("opening workspace with log {}", a.log.display()))?;
    Ok(ws)
}

pub fn pipeline(cmd: &PipelineCommand) -> anyhow::Result<String> {
    match cmd {
        PipelineCommand::Run {
            ws,
            oracles,
            workers,
            prompt,
            require_filter,
        } => {
            let mut w = open_workspace(ws)?;
            let o = Oracles::from_spec(oracles)?;
            let cfg = RunConfig {
                prompt: prompt.clone(),
                workers: *workers,
                require_filter: *require_filter,
                ..RunConfig::default()
            };
            let summary = w.run(&cfg, &*o.labels, &*o.boxes, &*o.masks)?;
            Ok(serde_json::to_string_pretty(&summary)? + "\n")
        }
        PipelineCommand::Status { ws } => {
            let w = open_workspace(ws)?;
            Ok(serde_json::to_string_pretty(&w.status_counts())? + "\n")
        }
        PipelineCommand::Export { ws, out } => {
            let w = open_workspace(ws)?;
            let d = w.export()?;
            save_dataset(&d, out).with_context(|| format!("writing {}", out.display()))?;
            Ok(format!(
                "{} images, {} annotations, {} categories -> {}\n",
                d.images.len(),
                d.annotations.len(),
                d.categories.len(),
                out.display()
            ))
        }
    }
}
