//! Compare scenario CSV output against golden files, column by column.

use std::path::Path;

use super::config::GoldenOptions;
use super::{ScenarioError, ScenarioReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    /// 1-based data row; 0 for the header or row count.
    pub row: usize,
    pub column: String,
    pub actual: String,
    pub golden: String,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {} column {}: {} vs golden {}", self.row, self.column, self.actual, self.golden)
    }
}

fn records(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), ScenarioError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| Ok(rec?.iter().map(String::from).collect())).collect::<Result<_, csv::Error>>()?;
    Ok((header, rows))
}

/// Numeric cells must agree within the column tolerance (absolute);
/// everything else must match exactly.
pub fn compare_csv(actual: &str, golden: &str, tol: &GoldenOptions) -> Result<Vec<Mismatch>, ScenarioError> {
    let (ha, ra) = records(actual)?;
    let (hg, rg) = records(golden)?;
    let mut out = Vec::new();
    if ha != hg {
        out.push(Mismatch { row: 0, column: "header".into(), actual: ha.join(","), golden: hg.join(",") });
        return Ok(out);
    }
    if ra.len() != rg.len() {
        out.push(Mismatch { row: 0, column: "rows".into(), actual: ra.len().to_string(), golden: rg.len().to_string() });
    }
    for (i, (a, g)) in ra.iter().zip(&rg).enumerate() {
        for ((col, x), y) in ha.iter().zip(a).zip(g) {
            let t = tol.columns.get(col).copied().unwrap_or(tol.default_abs);
            let ok = match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(p), Ok(q)) => p == q || (p - q).abs() <= t,
                _ => x == y,
            };
            if !ok {
                out.push(Mismatch { row: i + 1, column: col.clone(), actual: x.clone(), golden: y.clone() });
            }
        }
    }
    Ok(out)
}

/// Compare every CSV of `report` that has a counterpart in `dir`, adding
/// one check per compared file. Returns the number of files compared.
pub fn check_against(report: &mut ScenarioReport, dir: &Path, tol: &GoldenOptions) -> Result<usize, ScenarioError> {
    let mut compared = 0;
    let files = report.files.clone();
    for (name, contents) in files.iter().filter(|f| f.0.ends_with(".csv")) {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let golden = std::fs::read_to_string(&path)?;
        let mism = compare_csv(contents, &golden, tol)?;
        compared += 1;
        if let Some(first) = mism.first() {
            report.note(format!("golden {name}: {} mismatches, first at {first}", mism.len()));
        }
        report.check(format!("golden {name}"), mism.is_empty(), mism.len() as f64, "0 mismatches");
    }
    Ok(compared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn per_column_tolerance() {
        let g = "name,x,y\na,1.0,2.0\nb,3.0,4.0\n";
        let a = "name,x,y\na,1.0000001,2.0\nb,3.0,4.01\n";
        let tight = GoldenOptions { default_abs: 1e-9, columns: BTreeMap::new() };
        let m = compare_csv(a, g, &tight).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].row, m[0].column.as_str()), (1, "x"));
        let loose = GoldenOptions { default_abs: 1e-6, columns: [("y".to_string(), 0.1)].into() };
        assert!(compare_csv(a, g, &loose).unwrap().is_empty());
    }

    #[test]
    fn text_and_shape() {
        let g = "name,x\na,1\n";
        assert_eq!(compare_csv("name,x\nb,1\n", g, &GoldenOptions::default()).unwrap().len(), 1);
        assert_eq!(compare_csv("name,z\na,1\n", g, &GoldenOptions::default()).unwrap()[0].column, "header");
        assert_eq!(compare_csv("name,x\na,1\nb,2\n", g, &GoldenOptions::default()).unwrap()[0].column, "rows");
    }
}
