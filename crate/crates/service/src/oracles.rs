//! Oracle backends selectable from the command line.
//!
//! `mock:<tables.json>` uses lookup tables, `http://...` talks to model
//! services:
//!
//! ```text
//! POST {base}/label  {"description"}                 -> {"label": string | null}
//! POST {base}/boxes  {"image", "path", "prompt"}      -> {"boxes": [{"bbox": [x,y,w,h], "score"}]}
//! POST {base}/mask   {"image", "path", "bbox"}        -> {"mask": {"size": [h,w], "counts": [...]}}
//! ```
//!
//! `image` is the base64-encoded file.

use std::collections::HashMap;
use std::path::Path;
use std::thread;
use std::time::Duration;

use anyhow::{bail, Context};
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use curatekit::datamodel::{BBox, MaskRle};
use curatekit::pipeline::{
    BoxOracle, LabelOracle, MaskOracle, OracleError, OracleImage, RectMaskOracle, ScoredBox,
    TableBoxOracle, TableLabelOracle,
};

/// Lookup tables for mock mode. Descriptions or paths missing from a table
/// get no label, or one box covering the whole image.
#[derive(Debug, Default, Deserialize, Serialize)]
pub struct MockTables {
    #[serde(default)]
    pub labels: HashMap<String, Option<String>>,
    #[serde(default)]
    pub boxes: HashMap<String, Vec<ScoredBox>>,
}

pub struct Oracles {
    pub labels: Box<dyn LabelOracle>,
    pub boxes: Box<dyn BoxOracle>,
    pub masks: Box<dyn MaskOracle>,
}

impl Oracles {
    pub fn from_spec(spec: &str) -> anyhow::Result<Self> {
        if let Some(path) = spec.strip_prefix("mock:") {
            let bytes = std::fs::read(path).with_context(|| format!("reading {path}"))?;
            let t: MockTables =
                serde_json::from_slice(&bytes).with_context(|| format!("parsing {path}"))?;
            Ok(Self::mock(t))
        } else if spec.starts_with("http://") || spec.starts_with("https://") {
            let client = HttpOracle::new(spec);
            Ok(Self {
                labels: Box::new(client.clone()),
                boxes: Box::new(client.clone()),
                masks: Box::new(client),
            })
        } else {
            bail!("oracle spec must be mock:<file> or an http(s) URL, got {spec:?}")
        }
    }

    pub fn mock(t: MockTables) -> Self {
        Self {
            labels: Box::new(TableLabelOracle::new(
                t.labels.into_iter().map(|(k, v)| (k, Ok(v))).collect(),
            )),
            boxes: Box::new(TableBoxOracle::new(
                t.boxes.into_iter().map(|(k, v)| (k, Ok(v))).collect(),
            )),
            masks: Box::new(RectMaskOracle::default()),
        }
    }
}

/// Blocking JSON client with a per-call timeout and retries on transport
/// errors, 429 and 5xx.
#[derive(Clone)]
pub struct HttpOracle {
    base: String,
    agent: ureq::Agent,
    attempts: u32,
    backoff: Duration,
}

impl HttpOracle {
    pub fn new(base: &str) -> Self {
        Self::with_policy(base, Duration::from_secs(30), 3, Duration::from_millis(500))
    }

    pub fn with_policy(base: &str, timeout: Duration, attempts: u32, backoff: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: base.trim_end_matches('/').to_string(),
            agent,
            attempts: attempts.max(1),
            backoff,
        }
    }

    fn call<T: DeserializeOwned>(
        &self,
        endpoint: &str,
        body: &serde_json::Value,
    ) -> Result<T, OracleError> {
        let url = format!("{}/{endpoint}", self.base);
        let mut last = OracleError::Failed("no attempt made".into());
        for attempt in 0..self.attempts {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            let (err, retry) = match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        return resp
                            .body_mut()
                            .read_json::<T>()
                            .map_err(|e| OracleError::Failed(format!("{url}: bad response: {e}")));
                    }
                    let err = OracleError::Failed(format!("{url}: HTTP {status}"));
                    (err, status == 429 || status >= 500)
                }
                Err(ureq::Error::Timeout(_)) => (OracleError::Timeout, true),
                Err(e) => (OracleError::Failed(format!("{url}: {e}")), true),
            };
            tracing::warn!(%url, attempt = attempt + 1, error = %err, "oracle call failed");
            last = err;
            if !retry {
                break;
            }
        }
        Err(last)
    }

    fn encode_image(file: &Path) -> Result<String, OracleError> {
        let bytes = std::fs::read(file)
            .map_err(|e| OracleError::Failed(format!("reading {}: {e}", file.display())))?;
        Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
    }
}

#[derive(Deserialize)]
struct LabelReply {
    label: Option<String>,
}

#[derive(Deserialize)]
struct BoxesReply {
    boxes: Vec<ScoredBox>,
}

#[derive(Deserialize)]
struct MaskReply {
    mask: MaskRle,
}

impl LabelOracle for HttpOracle {
    fn label(&self, description: &str) -> Result<Option<String>, OracleError> {
        let r: LabelReply = self.call("label", &json!({ "description": description }))?;
        Ok(r.label)
    }
}

impl BoxOracle for HttpOracle {
    fn boxes(&self, image: &OracleImage<'_>, prompt: &str) -> Result<Vec<ScoredBox>, OracleError> {
        let body = json!({
            "image": Self::encode_image(image.file)?,
            "path": image.key,
            "prompt": prompt,
        });
        let r: BoxesReply = self.call("boxes", &body)?;
        Ok(r.boxes)
    }
}

impl MaskOracle for HttpOracle {
    fn mask(&self, image: &OracleImage<'_>, bbox: &BBox) -> Result<MaskRle, OracleError> {
        let body = json!({
            "image": Self::encode_image(image.file)?,
            "path": image.key,
            "bbox": bbox,
        });
        let r: MaskReply = self.call("mask", &body)?;
        Ok(r.mask)
    }
}
