//! Pass tables as JSON and as aligned text.

use serde::{Deserialize, Serialize};

use crate::score::{ESTIMATOR, STD_METHOD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub corpus: String,
    pub k: usize,
    pub problems: usize,
    /// Fraction in [0, 1].
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub estimator: String,
    pub std_method: String,
    pub resamples: usize,
    pub seed: u64,
    pub mathlib: Option<String>,
    pub cells: Vec<Cell>,
}

impl Report {
    pub fn new(resamples: usize, seed: u64, mathlib: Option<String>) -> Self {
        Report {
            estimator: ESTIMATOR.into(),
            std_method: STD_METHOD.into(),
            resamples,
            seed,
            mathlib,
            cells: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Rows are corpora, columns budgets, both in first-appearance order.
    pub fn to_text(&self) -> String {
        render_table(&self.cells)
    }
}

/// Display name for a corpus label.
pub fn corpus_label(name: &str) -> String {
    match name.to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
        "seed" | "seeds" => "Seed".into(),
        "type1" | "typei" => "Type I".into(),
        "type2" | "typeii" => "Type II".into(),
        "mix" | "mixed" => "Mix".into(),
        _ => name.into(),
    }
}

fn subscript(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '0'..='9' => char::from_u32('₀' as u32 + c.to_digit(10).unwrap()).unwrap(),
            '.' => '.',
            '-' => '₋',
            c => c,
        })
        .collect()
}

/// `52.0₂.₀` for mean 0.52 and std 0.02.
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{:.1}{}", mean * 100.0, subscript(&format!("{:.1}", std * 100.0)))
}

fn first_seen<T: PartialEq + Clone>(xs: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

pub fn render_table(cells: &[Cell]) -> String {
    if cells.is_empty() {
        return String::new();
    }
    let rows = first_seen(cells.iter().map(|c| c.corpus.clone()));
    let cols = first_seen(cells.iter().map(|c| c.k));
    let mut grid: Vec<Vec<String>> = vec![std::iter::once("corpus".to_string()).chain(cols.iter().map(|k| format!("pass@{k}"))).collect()];
    for r in &rows {
        let mut line = vec![corpus_label(r)];
        for k in &cols {
            line.push(
                cells
                    .iter()
                    .find(|c| &c.corpus == r && c.k == *k)
                    .map(|c| format_cell(c.mean, c.std))
                    .unwrap_or_else(|| "-".into()),
            );
        }
        grid.push(line);
    }
    let width: Vec<usize> =
        (0..=cols.len()).map(|j| grid.iter().map(|row| row[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &grid {
        let parts: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let pad = width[j] - s.chars().count();
                if j == 0 { format!("{s}{}", " ".repeat(pad)) } else { format!("{}{s}", " ".repeat(pad)) }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    }
    out
}
