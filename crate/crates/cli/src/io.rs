use std::fs;
use std::io::{Read, Write};

use opsets::OpId;

/// Reads a file, or standard input for `-`.
pub fn read_input(path: &str) -> Result<Vec<u8>, String> {
    if path == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| format!("reading standard input: {e}"))?;
        Ok(buf)
    } else {
        fs::read(path).map_err(|e| format!("reading {path}: {e}"))
    }
}

/// Writes to a file, or standard output for `-`.
pub fn write_output(path: &str, text: &str) -> Result<(), String> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| format!("writing standard output: {e}"))
    } else {
        fs::write(path, text).map_err(|e| format!("writing {path}: {e}"))
    }
}

/// Parses `counter@node`. The node is everything after the first `@` and may
/// be empty; `root` is shorthand for the reserved root ID.
pub fn parse_id(s: &str) -> Result<OpId, String> {
    if s == "root" {
        return Ok(OpId::root());
    }
    let (counter, node) = s
        .split_once('@')
        .ok_or_else(|| format!("ID {s:?} is not of the form counter@node"))?;
    let counter = counter
        .parse::<u64>()
        .map_err(|_| format!("ID {s:?} has a bad counter"))?;
    Ok(OpId::new(counter, node))
}
