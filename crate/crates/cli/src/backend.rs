//! Parsing of `--backend` specifications into segmenter factories.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use tubetrace::segmenter::{timeout_from_env, ExternalSegmenter, OracleSegmenter, ShapePriorOracle, ThresholdSegmenter};
use tubetrace::volume::{load_labels, LabelVolume};
use tubetrace::Segmenter;

use crate::UsageError;

#[derive(Debug)]
pub enum BackendSpec {
    Oracle(PathBuf),
    Shape(PathBuf),
    Threshold,
    External(String),
}

impl BackendSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let spec = match s.split_once(':') {
            Some(("oracle", p)) if !p.is_empty() => Self::Oracle(p.into()),
            Some(("shape", p)) if !p.is_empty() => Self::Shape(p.into()),
            Some(("external", cmd)) if !cmd.trim().is_empty() => Self::External(cmd.to_string()),
            None if s == "threshold" => Self::Threshold,
            _ => {
                return Err(UsageError(format!(
                    "unknown backend {s:?}; expected oracle:<gt>, shape:<gt>, threshold or external:<command>"
                ))
                .into())
            }
        };
        Ok(spec)
    }
}

/// Builds fresh backend instances; ground truth is loaded once and shared.
pub struct Factory {
    spec: BackendSpec,
    gt: Option<Arc<LabelVolume>>,
}

impl Factory {
    pub fn new(spec: BackendSpec) -> Result<Self> {
        let gt = match &spec {
            BackendSpec::Oracle(p) | BackendSpec::Shape(p) => {
                Some(Arc::new(load_labels(p).with_context(|| format!("loading ground truth {}", p.display()))?))
            }
            _ => None,
        };
        Ok(Self { spec, gt })
    }

    pub fn ground_truth(&self) -> Option<&LabelVolume> {
        self.gt.as_deref()
    }

    pub fn make(&self) -> tubetrace::Result<Box<dyn Segmenter + Send>> {
        Ok(match &self.spec {
            BackendSpec::Oracle(_) => Box::new(OracleSegmenter::new(self.gt.clone().expect("loaded in new"))),
            BackendSpec::Shape(_) => Box::new(ShapePriorOracle::new(self.gt.clone().expect("loaded in new"))),
            BackendSpec::Threshold => Box::new(ThresholdSegmenter::default()),
            BackendSpec::External(cmd) => Box::new(ExternalSegmenter::spawn(cmd, timeout_from_env())?),
        })
    }
}
