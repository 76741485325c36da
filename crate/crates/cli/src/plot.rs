//! `plot-data`: two-column `time value` files for plotting tools.
//!
//! Right-limit rows follow their left-limit rows at the same time, so a
//! line plot of a series draws every impulse as a vertical drop.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::{Failure, PlotArgs};

const TRAJECTORY_HEADER: [&str; 9] = ["time", "k", "S", "I1", "I2", "R", "jump_flag", "strain", "applied_intensity"];
const COST_HEADER: [&str; 2] = ["time", "cumulative_J"];
const COMPARTMENTS: [&str; 4] = ["S", "I1", "I2", "R"];

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

/// Rows of a CSV with the expected header, as raw fields; an empty file
/// has no rows.
fn records(text: &str, header: &[&str], source: &Path) -> Result<Vec<(u64, csv::StringRecord)>, Failure> {
    let bad = |line: u64, what: String| Failure::Invalid(format!("{} row {line}: {what}", source.display()));
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.position().map_or(n as u64 + 1, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        if n == 0 {
            if !rec.iter().eq(header.iter().copied()) {
                return Err(bad(line, format!("expected header `{}`", header.join(","))));
            }
            continue;
        }
        if rec.len() != header.len() {
            return Err(bad(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, header: &[&str], line: u64, source: &Path) -> Result<T, Failure> {
    rec[i].trim().parse().map_err(|_| {
        Failure::Invalid(format!(
            "{} row {line}: column `{}` has unparsable value `{}`",
            source.display(),
            header[i],
            &rec[i]
        ))
    })
}

fn stem(input: &Path) -> String {
    let s = input.file_stem().map_or_else(|| "trajectory".into(), |s| s.to_string_lossy().into_owned());
    s.strip_suffix("_trajectory").map_or(s.clone(), str::to_string)
}

pub fn execute(args: &PlotArgs) -> Result<(), Failure> {
    let input = &args.input;
    let rows = records(&read(input)?, &TRAJECTORY_HEADER, input)?;
    let mut series: BTreeMap<u32, [String; 4]> = BTreeMap::new();
    for (line, rec) in &rows {
        let t: f64 = field(rec, 0, &TRAJECTORY_HEADER, *line, input)?;
        let k: u32 = field(rec, 1, &TRAJECTORY_HEADER, *line, input)?;
        let entry = series.entry(k).or_default();
        for (c, buf) in entry.iter_mut().enumerate() {
            let v: f64 = field(rec, 2 + c, &TRAJECTORY_HEADER, *line, input)?;
            let _ = writeln!(buf, "{t} {v}");
        }
    }

    let base = stem(input);
    let cost_path = args.cost.clone().unwrap_or_else(|| input.with_file_name(format!("{base}_cost.csv")));
    let cumulative = if cost_path.exists() {
        let mut buf = String::new();
        for (line, rec) in records(&read(&cost_path)?, &COST_HEADER, &cost_path)? {
            let t: f64 = field(&rec, 0, &COST_HEADER, line, &cost_path)?;
            let j: f64 = field(&rec, 1, &COST_HEADER, line, &cost_path)?;
            let _ = writeln!(buf, "{t} {j}");
        }
        buf
    } else if args.cost.is_some() {
        return Err(Failure::Io(format!("cannot read {}: file not found", cost_path.display())));
    } else {
        eprintln!("note: no cost series at {}, writing an empty J file", cost_path.display());
        String::new()
    };

    let dir: PathBuf = args.out.clone().unwrap_or_else(|| {
        input.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    });
    fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    let write = |name: String, contents: &str| -> Result<(), Failure> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(())
    };
    for (k, bufs) in &series {
        for (name, buf) in COMPARTMENTS.iter().zip(bufs) {
            write(format!("{base}_k{k}_{name}.dat"), buf)?;
        }
    }
    write(format!("{base}_J.dat"), &cumulative)
}
