use std::io::{self, Write};

use super::OperationRecord;

pub const CSV_HEADER: &str = "op_id,priority,strategy,error_injected,error_bit,detected,steps";

/// Writes one CSV row per operation record; the header goes out on creation.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write_record(&mut self, record: &OperationRecord) -> io::Result<()> {
        write!(self.out, "{},{},{},{},", record.op_id, record.priority, record.strategy, record.error_injected)?;
        if let Some(bit) = record.error_bit {
            write!(self.out, "{bit}")?;
        }
        writeln!(self.out, ",{},{}", record.detected, record.steps)
    }

    pub fn into_inner(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
