//! CSV export of simulation logs.

use std::io::Write;

use omniwrench_core::sim::RunLog;

use crate::error::IoError;

pub fn header(rotors: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["t", "x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "p", "q", "r"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=rotors).map(|i| format!("u_{i}")));
    for prefix in ["fsp", "msp", "fmeas"] {
        h.extend(["x", "y", "z"].iter().map(|a| format!("{prefix}_{a}")));
    }
    h.push("contact_flag".into());
    h
}

pub fn write_log<W: Write>(out: W, log: &RunLog, rotors: usize) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(rotors))?;
    for row in &log.rows {
        let s = &row.state;
        let mut rec: Vec<String> = Vec::with_capacity(26 + rotors);
        rec.push(format!("{:?}", row.t));
        for v in [&s.position, &s.velocity, &s.attitude, &s.body_rates] {
            rec.extend(v.iter().map(|x| format!("{x:?}")));
        }
        rec.extend(row.u.iter().map(|x| format!("{x:?}")));
        for v in [&row.f_sp, &row.m_sp, &row.f_meas] {
            rec.extend(v.iter().map(|x| format!("{x:?}")));
        }
        rec.push(if row.contact { "1" } else { "0" }.into());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| IoError::io("<log>", e))?;
    Ok(())
}
