use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "env_steps,mean_return,success_rate,mean_length";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub mean_return: f64,
    pub success_rate: f64,
    pub mean_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub env_steps: usize,
    pub metrics: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub seed: u64,
    pub config_fingerprint: String,
    points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn new(seed: u64, config_fingerprint: impl Into<String>) -> Self {
        Self {
            seed,
            config_fingerprint: config_fingerprint.into(),
            points: Vec::new(),
        }
    }

    /// Appends a point; `env_steps` must exceed the previous point's.
    pub fn push(&mut self, env_steps: usize, metrics: EvalMetrics) -> Result<()> {
        if let Some(last) = self.points.last() {
            if env_steps <= last.env_steps {
                return Err(Error::Config(format!(
                    "curve steps must increase: {env_steps} after {}",
                    last.env_steps
                )));
            }
        }
        self.points.push(CurvePoint { env_steps, metrics });
        Ok(())
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    pub fn final_success_rate(&self) -> f64 {
        self.last().map_or(0.0, |p| p.metrics.success_rate)
    }

    pub fn final_return(&self) -> f64 {
        self.last().map_or(0.0, |p| p.metrics.mean_return)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for p in &self.points {
            let m = p.metrics;
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?}",
                p.env_steps, m.mean_return, m.success_rate, m.mean_length
            );
        }
        out
    }

    /// Parses the CSV form. Seed and fingerprint are not part of it.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CURVE_HEADER => {}
            Some((_, h)) => {
                return Err(Error::parse("curve row 0 (header)", format!("unexpected header `{h}`")))
            }
            None => return Err(Error::parse("curve row 0 (header)", "empty file")),
        }
        let mut curve = LearningCurve::default();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let record = format!("curve row {n}");
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::parse(record, format!("expected 4 fields, got {}", fields.len())));
            }
            let steps: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(record.clone(), format!("bad env_steps `{}`", fields[0])))?;
            let mut vals = [0.0; 3];
            for (v, f) in vals.iter_mut().zip(&fields[1..]) {
                *v = f
                    .parse()
                    .map_err(|_| Error::parse(record.clone(), format!("bad number `{f}`")))?;
            }
            curve
                .push(
                    steps,
                    EvalMetrics {
                        mean_return: vals[0],
                        success_rate: vals[1],
                        mean_length: vals[2],
                    },
                )
                .map_err(|e| Error::parse(record, e.to_string()))?;
        }
        Ok(curve)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
