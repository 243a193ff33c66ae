use std::io::Write;

use super::{SignalTable, SpectrumRow};
use crate::error::{Error, Result};

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("write failed: {e}"))
}

/// `set,term_index,term,spin,amplitude` with 1-based spins, rows in table
/// order.
pub fn write_signal_csv<W: Write>(table: &SignalTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["set", "term_index", "term", "spin", "amplitude"]).map_err(io_err)?;
    for r in &table.rows {
        w.write_record([
            r.set.to_string(),
            r.term_index.to_string(),
            r.term.to_string(),
            (r.spin + 1).to_string(),
            format!("{:.12}", r.amplitude),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// `set,term_index,term,spin,offset_hz,re,im`, one line per stick.
pub fn write_spectrum_csv<W: Write>(spectra: &[SpectrumRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["set", "term_index", "term", "spin", "offset_hz", "re", "im"]).map_err(io_err)?;
    for row in spectra {
        for s in &row.sticks {
            w.write_record([
                row.set.to_string(),
                row.term_index.to_string(),
                row.term.to_string(),
                (row.spin + 1).to_string(),
                format!("{:.6}", s.offset),
                format!("{:.12}", s.amplitude.re),
                format!("{:.12}", s.amplitude.im),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}
