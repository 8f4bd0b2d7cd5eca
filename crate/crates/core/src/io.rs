//! CSV formats for hybrid words, trajectories and output series. Numbers are
//! written with Rust's shortest round-trip float formatting.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::system::{HybridWord, OutputSeries, Trajectory};

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
}

/// Header `t,q,u_1..u_m`, one row per letter, modes 1-based.
pub fn write_hybrid_csv<W: Write>(w: &HybridWord, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "q".to_string()];
    header.extend((1..=w.m()).map(|j| format!("u_{j}")));
    wtr.write_record(&header)?;
    for t in 0..w.len() {
        let mut rec = vec![t.to_string(), w.mode(t).to_string()];
        rec.extend(w.input(t).iter().map(|x| x.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the format written by [`write_hybrid_csv`]. The input width is
/// taken from the `u_*` header columns; `t` must count up from 0.
pub fn read_hybrid_csv<R: Read>(input: R) -> Result<HybridWord> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let t_col = col("t").ok_or_else(|| Error::Parse("missing column t".into()))?;
    let q_col = col("q").ok_or_else(|| Error::Parse("missing column q".into()))?;
    let mut u_cols = Vec::new();
    while let Some(c) = col(&format!("u_{}", u_cols.len() + 1)) {
        u_cols.push(c);
    }
    if u_cols.is_empty() {
        return Err(Error::Parse("missing input columns u_1..u_m".into()));
    }
    let mut w = HybridWord::new(u_cols.len());
    let mut u = vec![0.0; u_cols.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::Parse(format!("short row {row}")));
        let t = parse_usize(field(t_col)?)?;
        if t != row {
            return Err(Error::Parse(format!("row {row} has t={t}")));
        }
        let q = parse_usize(field(q_col)?)?;
        for (slot, &c) in u.iter_mut().zip(&u_cols) {
            *slot = parse_f64(field(c)?)?;
        }
        w.push(q, &u);
    }
    Ok(w)
}

pub fn load_hybrid_csv(path: &Path) -> Result<HybridWord> {
    read_hybrid_csv(std::fs::File::open(path)?)
}

pub fn save_hybrid_csv(w: &HybridWord, path: &Path) -> Result<()> {
    write_hybrid_csv(w, std::fs::File::create(path)?)
}

/// Header `t,q,y_1..y_p,x_1..x_n`; `x` is the state at time `t` (before the
/// transition). The final state is not written.
pub fn write_trajectory_csv<W: Write>(w: &HybridWord, traj: &Trajectory, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "q".to_string()];
    header.extend((1..=traj.p()).map(|j| format!("y_{j}")));
    header.extend((1..=traj.n()).map(|j| format!("x_{j}")));
    wtr.write_record(&header)?;
    for t in 0..traj.len() {
        let mut rec = vec![t.to_string(), w.mode(t).to_string()];
        rec.extend(traj.output(t).iter().map(|x| x.to_string()));
        rec.extend(traj.state(t).iter().map(|x| x.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the `y_*` columns of a CSV (trajectory files, or bare output
/// files with header `t,y_1..y_p`).
pub fn read_output_csv<R: Read>(input: R) -> Result<OutputSeries> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let mut y_cols = Vec::new();
    while let Some(c) = headers.iter().position(|h| h.trim() == format!("y_{}", y_cols.len() + 1)) {
        y_cols.push(c);
    }
    if y_cols.is_empty() {
        return Err(Error::Parse("missing output columns y_1..y_p".into()));
    }
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for &c in &y_cols {
            values.push(parse_f64(rec.get(c).ok_or_else(|| Error::Parse(format!("short row {row}")))?)?);
        }
    }
    OutputSeries::from_flat(y_cols.len(), values)
}

pub fn load_output_csv(path: &Path) -> Result<OutputSeries> {
    read_output_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SwitchedLinearSystem;
    use nalgebra::DVector;

    #[test]
    fn hybrid_csv_round_trip() {
        let w = HybridWord::from_letters(2, &[(1, vec![0.1, -2.0]), (3, vec![1.0 / 3.0, 1e-300])]).unwrap();
        let mut buf = Vec::new();
        write_hybrid_csv(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,q,u_1,u_2\n"));
        assert_eq!(read_hybrid_csv(buf.as_slice()).unwrap(), w);
    }

    #[test]
    fn empty_hybrid_word() {
        let mut buf = Vec::new();
        write_hybrid_csv(&HybridWord::new(1), &mut buf).unwrap();
        assert!(read_hybrid_csv(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn rejects_out_of_order_rows() {
        let text = "t,q,u_1\n0,1,1.0\n2,1,0.5\n";
        assert!(read_hybrid_csv(text.as_bytes()).is_err());
        assert!(read_hybrid_csv("t,q\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn trajectory_outputs_round_trip() {
        let sys = SwitchedLinearSystem::scalar(&[0.4, 0.3], &[1.0, 2.0], &[1.0, 3.0]).unwrap();
        let w = HybridWord::from_letters(1, &[(1, vec![2.0]), (2, vec![5.0]), (1, vec![0.1])]).unwrap();
        let traj = sys.simulate(&w, &DVector::zeros(1)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&w, &traj, &mut buf).unwrap();
        let ys = read_output_csv(buf.as_slice()).unwrap();
        assert_eq!(ys.flat(), traj.outputs_flat());
    }
}
