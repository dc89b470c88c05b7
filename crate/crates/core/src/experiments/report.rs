//! Experiment reports and their CSV, JSON and plot-script renderings.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::stats::Fit;
use crate::error::{Error, Result};

/// One reported number; `stderr` is absent only for exact quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub param: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub samples: usize,
    pub estimates: Vec<Estimate>,
    pub fit: Option<Fit>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str) -> Self {
        ExperimentReport {
            name: name.to_string(),
            params: BTreeMap::new(),
            samples: 0,
            estimates: Vec::new(),
            fit: None,
            seeds: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.params.insert(key.to_string(), v);
    }

    pub fn push(&mut self, param: impl Into<String>, metric: &str, value: f64, stderr: Option<f64>) {
        self.estimates.push(Estimate {
            param: param.into(),
            metric: metric.to_string(),
            value,
            stderr,
        });
    }

    /// First estimate with the given param and metric.
    pub fn get(&self, param: &str, metric: &str) -> Option<&Estimate> {
        self.estimates
            .iter()
            .find(|e| e.param == param && e.metric == metric)
    }

    /// All estimates of a metric in report order.
    pub fn series(&self, metric: &str) -> Vec<&Estimate> {
        self.estimates.iter().filter(|e| e.metric == metric).collect()
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Long format `param,metric,value,stderr`; fit rows use param `fit`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,metric,value,stderr\n");
        for e in &self.estimates {
            let se = e.stderr.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", csv_field(&e.param), csv_field(&e.metric), e.value, se));
        }
        if let Some(f) = &self.fit {
            out.push_str(&format!("fit,slope,{},\n", f.slope));
            out.push_str(&format!("fit,intercept,{},\n", f.intercept));
            out.push_str(&format!("fit,r_squared,{},\n", f.r_squared));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Gnuplot script drawing each metric whose params read `key=number`.
    pub fn plot_script(&self) -> String {
        let numeric = |p: &str| p.split_once('=').is_some_and(|(_, v)| v.parse::<f64>().is_ok());
        let mut metrics: Vec<&str> = Vec::new();
        for e in &self.estimates {
            if !metrics.contains(&e.metric.as_str()) {
                metrics.push(&e.metric);
            }
        }
        metrics.retain(|m| {
            let es = self.series(m);
            es.len() >= 2 && es.iter().all(|e| numeric(&e.param))
        });
        let mut s = String::new();
        s.push_str("# gnuplot -p plot.gp\n");
        s.push_str("set datafile separator ','\n");
        s.push_str(&format!("set title '{}'\n", self.name));
        s.push_str("set terminal pngcairo size 900,600\n");
        s.push_str("x(c) = real(substr(c, strstrt(c, '=') + 1, 64))\n");
        for m in metrics {
            let with_err = self.series(m).iter().all(|e| e.stderr.is_some());
            s.push_str(&format!("set output '{}.png'\n", sanitize(m)));
            if with_err {
                s.push_str(&format!(
                    "plot 'report.csv' every ::1 using (strcol(2) eq '{m}' ? x(strcol(1)) : 1/0):3:4 with yerrorbars title '{m}'\n"
                ));
            } else {
                s.push_str(&format!(
                    "plot 'report.csv' every ::1 using (strcol(2) eq '{m}' ? x(strcol(1)) : 1/0):3 with points title '{m}'\n"
                ));
            }
        }
        s
    }

    /// Writes `report.csv`, `report.json` and `plot.gp` into `dir`.
    pub fn write_dir(&self, dir: &FsPath) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("plot.gp"), self.plot_script())?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

pub(crate) fn experiment_error(msg: impl Into<String>) -> Error {
    Error::Experiment(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut r = ExperimentReport::new("demo");
        r.push("t=1", "density", 0.5, Some(0.01));
        r.push("t=2", "exact", 1.0, None);
        r.fit = Some(Fit {
            slope: -0.5,
            intercept: 0.0,
            r_squared: 1.0,
        });
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "param,metric,value,stderr");
        assert_eq!(lines[1], "t=1,density,0.5,0.01");
        assert_eq!(lines[2], "t=2,exact,1,");
        assert_eq!(lines[3], "fit,slope,-0.5,");
        let back: ExperimentReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        r.push("t=4", "density", 0.35, Some(0.01));
        r.push("all", "mean", 0.35, Some(0.01));
        r.push("all2", "mean", 0.35, Some(0.01));
        let gp = r.plot_script();
        assert!(gp.contains("'density.png'") && gp.contains("report.csv"));
        assert!(!gp.contains("exact") && !gp.contains("mean"));
    }

    #[test]
    fn quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("ab"), "ab");
    }
}
