//! Result-file and manifest emission. Row structs pin the column order for
//! both formats; a JSON file mirrors the CSV as an array of objects.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gwrg_core::Result;
use serde::Serialize;

use crate::config::OutFormat;

#[derive(Debug, Clone, Serialize)]
pub struct StatsRow {
    pub host: String,
    pub n: u32,
    pub i: u32,
    pub seed: u64,
    pub boundary_size: u64,
    pub isolated: u64,
    pub components: u64,
    pub largest_size: u64,
    pub diameter: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectivityRow {
    pub host: String,
    pub n: u32,
    pub seed: u64,
    pub tau: Option<u32>,
    pub tau_star: Option<u32>,
    pub censored: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub host: String,
    pub n: u32,
    pub params: String,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

pub fn write_rows<T: Serialize>(path: &Path, format: OutFormat, rows: &[T]) -> Result<()> {
    match format {
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(File::create(path)?);
            for row in rows {
                w.serialize(row).map_err(io_like)?;
            }
            w.flush()?;
        }
        OutFormat::Json => {
            let mut f = File::create(path)?;
            serde_json::to_writer_pretty(&mut f, rows).map_err(io_like)?;
            f.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn io_like<E: std::fmt::Display>(e: E) -> gwrg_core::Error {
    gwrg_core::Error::Io(std::io::Error::other(e.to_string()))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    out.with_file_name(name)
}

/// Flat key=value lines, insertion order preserved.
pub fn write_manifest(out: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut f = File::create(manifest_path(out))?;
    for (k, v) in pairs {
        writeln!(f, "{k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_fields_with_commas() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![EstimateRow {
            quantity: "green".into(),
            host: "z2".into(),
            n: 3,
            params: "x=Z:(1,-1);y=Z:(0,0)".into(),
            estimate: 1.25,
            stderr: 0.5,
            trials: 10,
            seed: 1,
        }];
        write_rows(&path, OutFormat::Csv, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "quantity,host,n,params,estimate,stderr,trials,seed"
        );
        assert!(text.contains("\"x=Z:(1,-1);y=Z:(0,0)\""));
        let mut r = csv::Reader::from_path(&path).unwrap();
        let rec = r.records().next().unwrap().unwrap();
        assert_eq!(&rec[3], "x=Z:(1,-1);y=Z:(0,0)");
    }

    #[test]
    fn csv_leaves_censored_times_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("conn.csv");
        let rows = vec![ConnectivityRow {
            host: "btree2".into(),
            n: 4,
            seed: 7,
            tau: None,
            tau_star: Some(2),
            censored: 1,
        }];
        write_rows(&path, OutFormat::Csv, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("btree2,4,7,,2,1"));
    }

    #[test]
    fn json_mirrors_csv_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.json");
        let rows = vec![StatsRow {
            host: "z1".into(),
            n: 2,
            i: 1,
            seed: 0,
            boundary_size: 2,
            isolated: 0,
            components: 1,
            largest_size: 2,
            diameter: 1,
        }];
        write_rows(&path, OutFormat::Json, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed[0]["host"], "z1");
        assert_eq!(parsed[0]["diameter"], 1);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn manifest_is_flat_key_value() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.csv");
        write_manifest(&out, &[("a".into(), "1".into()), ("b".into(), "x=y".into())]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv.manifest")).unwrap();
        assert_eq!(text, "a=1\nb=x=y\n");
    }
}
