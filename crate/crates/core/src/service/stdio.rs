//! One JSON request per input line, one JSON response per output line.

use std::io::{self, BufRead, Write};

use super::protocol::handle_line;
use super::Engine;

pub fn run(engine: &Engine, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = handle_line(engine, &line);
        writeln!(output, "{resp}")?;
        output.flush()?;
    }
    Ok(())
}
