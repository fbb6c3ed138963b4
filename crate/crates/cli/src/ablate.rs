//! Ablation grids: contributing factors, pool selection size and training
//! set size. Every cell is run for each master seed and summarized by the
//! per-event median.

use std::fmt::Write as _;

use serde::Serialize;
use tritrain::ensemble_distill::Ensemble;
use tritrain::eval::{evaluate, MetricsReport};
use tritrain::seed;
use tritrain::semisup::tri_train;

use crate::config::Grid;
use crate::recipes::{self, median_auc, median_eer, Prepared, Seeds};
use crate::stages::{recipe_data, Run};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub label: String,
    /// One report per master seed, in seed order.
    pub reports: Vec<MetricsReport>,
    pub median_auc: Vec<Option<f64>>,
    pub median_eer: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    pub grid: Grid,
    pub seeds: Vec<u64>,
    pub events: Vec<String>,
    pub cells: Vec<Cell>,
}

impl AblationTable {
    fn new(grid: Grid, seeds: Vec<u64>) -> Self {
        Self {
            grid,
            seeds,
            events: Vec::new(),
            cells: Vec::new(),
        }
    }

    fn push(&mut self, label: String, report: MetricsReport) {
        if self.events.is_empty() {
            self.events = report.events.iter().map(|e| e.event.clone()).collect();
        }
        match self.cells.iter_mut().find(|c| c.label == label) {
            Some(c) => c.reports.push(report),
            None => self.cells.push(Cell {
                label,
                reports: vec![report],
                median_auc: Vec::new(),
                median_eer: Vec::new(),
            }),
        }
    }

    fn finish(&mut self) {
        for c in &mut self.cells {
            let refs: Vec<&MetricsReport> = c.reports.iter().collect();
            c.median_auc = median_auc(&refs);
            c.median_eer = median_eer(&refs);
        }
    }

    pub fn cell(&self, label: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.label == label)
    }

    /// AUC block then EER block; events as rows, cells as columns, values in
    /// percent with two decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "grid: {:?}, median over seeds {}", self.grid, seeds.join(" "));
        let width = self.cells.iter().map(|c| c.label.len()).max().unwrap_or(0).max(8);
        for (title, pick) in [("AUC (%)", 0), ("EER (%)", 1)] {
            let _ = writeln!(out, "\n{title}");
            let _ = write!(out, "{:<16}", "event");
            for c in &self.cells {
                let _ = write!(out, " {:>width$}", c.label);
            }
            out.push('\n');
            for (e, name) in self.events.iter().enumerate() {
                let _ = write!(out, "{name:<16}");
                for c in &self.cells {
                    let v = if pick == 0 { c.median_auc[e] } else { c.median_eer[e] };
                    let text = v.map_or("-".to_string(), |v| format!("{:.2}", 100.0 * v));
                    let _ = write!(out, " {text:>width$}");
                }
                out.push('\n');
            }
        }
        out
    }
}

pub(crate) fn run(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let settings = cfg.settings();
    let seeds = if cfg.ablate.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.ablate.seeds.clone()
    };
    let mut table = AblationTable::new(cfg.ablate.grid, seeds.clone());
    let mut shared: Option<Prepared> = None;
    for &master in &seeds {
        let data = match (&shared, cfg.data.train.is_some()) {
            (Some(d), _) => d.clone(),
            (None, from_files) => {
                let d = recipe_data(run, master)?;
                if from_files {
                    shared = Some(d.clone());
                }
                d
            }
        };
        let s = Seeds::from_master(master);
        match cfg.ablate.grid {
            Grid::Factors => {
                let [sup, ens, ens_data, six] = recipes::factors(&data, &settings, &s)?;
                table.push("Sup".into(), sup);
                table.push("+Ens".into(), ens);
                table.push("+Ens+Data".into(), ens_data);
                table.push("+2xEns+Data".into(), six);
            }
            Grid::K => {
                for &k in &cfg.ablate.k_values {
                    table.push(format!("k={k}"), recipes::tri_for_k(&data, &settings, &s, k)?);
                }
            }
            Grid::Ratio => {
                for &r in &cfg.ablate.ratios {
                    let sub = recipes::with_train_ratio(&data, r, seed::derive(s.split, 7))?;
                    let sup = recipes::supervised(&sub, &settings, &s)?;
                    table.push(format!("Sup@{r}"), evaluate(&sup, &sub.test)?);
                    let tri = tri_train(&sub.train, &sub.pool, &settings.tri_params(&sub.train, &s), Some(&sub.dev))?;
                    table.push(format!("Tri@{r}"), evaluate(&Ensemble::new(tri.ensemble_members())?, &sub.test)?);
                }
            }
        }
        run.say(format!("seed {master} done"));
    }
    table.finish();
    let p = run.output("ablation.json");
    let json = serde_json::to_string_pretty(&table).expect("serializable");
    std::fs::write(&p, json + "\n").map_err(|e| CliError::io(&p, e))?;
    let text = table.to_text();
    let p = run.output("ablation.txt");
    std::fs::write(&p, &text).map_err(|e| CliError::io(&p, e))?;
    run.say(text.trim_end());
    Ok(())
}
