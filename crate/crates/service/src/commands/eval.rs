use anyhow::Context;
use serde::{Deserialize, Serialize};

use curatekit::datamodel::{load_dataset, load_detections};
use curatekit::metrics::{
    evaluate, render_per_class, render_table, EvalConfig, EvalReport, IouKind, MetricSet, TableRow,
};

use crate::cli::{EvalArgs, KindArg};

use super::stem;

/// Contents of the report file written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub method: String,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<EvalReport>,
    #[serde(rename = "mask", default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<EvalReport>,
}

impl EvalOutput {
    pub fn report(&self, kind: IouKind) -> Option<&EvalReport> {
        match kind {
            IouKind::Box => self.boxes.as_ref(),
            IouKind::Mask => self.masks.as_ref(),
        }
    }
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<String> {
    let gt = load_dataset(&a.gt).with_context(|| format!("loading {}", a.gt.display()))?;
    let dets = load_detections(&a.dt).with_context(|| format!("loading {}", a.dt.display()))?;
    let method = a.method.clone().unwrap_or_else(|| stem(&a.dt));

    let run = |kind| -> anyhow::Result<EvalReport> {
        evaluate(&gt, &dets, &EvalConfig::with_kind(kind))
            .with_context(|| format!("{kind} evaluation"))
    };
    let boxes = matches!(a.kind, KindArg::Box | KindArg::Both)
        .then(|| run(IouKind::Box))
        .transpose()?;
    let masks = matches!(a.kind, KindArg::Mask | KindArg::Both)
        .then(|| run(IouKind::Mask))
        .transpose()?;

    let mut text = render_table(&[TableRow {
        method: method.clone(),
        boxes: boxes.as_ref().map(MetricSet::from),
        masks: masks.as_ref().map(MetricSet::from),
    }]);
    if a.per_class {
        for r in boxes.iter().chain(masks.iter()) {
            text.push_str(&format!("\nper-class AP ({})\n", r.kind));
            text.push_str(&render_per_class(r, &gt.categories));
        }
    }

    let out = EvalOutput {
        method,
        boxes,
        masks,
    };
    let mut bytes = serde_json::to_vec_pretty(&out)?;
    bytes.push(b'\n');
    std::fs::write(&a.out, bytes).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(text)
}
