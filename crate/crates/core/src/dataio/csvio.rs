use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Blip, Trajectory};
use crate::{Error, Phase, Result};

pub const HEADER: [&str; 9] = ["id", "type", "phase", "day", "t_s", "h_ft", "tas_kt", "rocd_ftmin", "h_target_ft"];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: String,
    #[serde(rename = "type")]
    aircraft_type: String,
    phase: String,
    day: String,
    t_s: f64,
    h_ft: f64,
    tas_kt: f64,
    rocd_ftmin: f64,
    h_target_ft: f64,
}

pub fn read_trajectories(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    read_trajectories_from(File::open(path)?)
}

/// Parses the trajectory CSV. Rows of one trajectory must be contiguous.
pub fn read_trajectories_from<R: Read>(reader: R) -> Result<Vec<Trajectory>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Format(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut out: Vec<Trajectory> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        let phase: Phase =
            row.phase.parse().map_err(|_| Error::Format(format!("line {line}: trajectory {}: unknown phase '{}'", row.id, row.phase)))?;
        let blip = Blip { t: row.t_s, h: row.h_ft, tas: row.tas_kt, rocd: row.rocd_ftmin };
        match out.last_mut() {
            Some(tr) if tr.id == row.id => {
                if tr.aircraft_type != row.aircraft_type || tr.phase != phase || tr.day != row.day {
                    return Err(Error::Format(format!("line {line}: trajectory {} changes metadata", row.id)));
                }
                tr.blips.push(blip);
            }
            _ => {
                if !seen.insert(row.id.clone()) {
                    return Err(Error::Format(format!("line {line}: trajectory {} rows not contiguous", row.id)));
                }
                out.push(Trajectory {
                    id: row.id,
                    aircraft_type: row.aircraft_type,
                    phase,
                    day: row.day,
                    blips: vec![blip],
                    h_target: row.h_target_ft,
                });
            }
        }
    }
    for tr in &out {
        tr.validate()?;
    }
    Ok(out)
}

pub fn write_trajectories(trajs: &[Trajectory], path: impl AsRef<Path>) -> Result<()> {
    let f = std::io::BufWriter::new(File::create(path)?);
    write_trajectories_to(trajs, f)
}

/// Writes with fixed precision: two decimals for every numeric column.
pub fn write_trajectories_to<W: Write>(trajs: &[Trajectory], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for tr in trajs {
        let target = format!("{:.2}", tr.h_target);
        for b in &tr.blips {
            w.write_record([
                tr.id.as_str(),
                tr.aircraft_type.as_str(),
                tr.phase.as_str(),
                tr.day.as_str(),
                &format!("{:.2}", b.t),
                &format!("{:.2}", b.h),
                &format!("{:.2}", b.tas),
                &format!("{:.2}", b.rocd),
                &target,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
