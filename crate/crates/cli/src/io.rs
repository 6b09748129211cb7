use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use arnmt::corpus::{read_lines, write_lines};
use arnmt::{Error, Result};

const STDIN: &str = "<stdin>";

/// Lines of a file, or of stdin when `path` is `None`.
pub fn read_input(path: Option<&Path>) -> Result<Vec<String>> {
    if let Some(p) = path {
        return read_lines(p);
    }
    let mut bytes = Vec::new();
    std::io::stdin()
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Io { path: PathBuf::from(STDIN), source: e })?;
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    if bytes.last() == Some(&b'\n') {
        bytes.pop();
    }
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            String::from_utf8(raw.to_vec()).map_err(|_| Error::Decode {
                path: PathBuf::from(STDIN),
                line: i + 1,
            })
        })
        .collect()
}

pub fn write_output(path: Option<&Path>, lines: &[String]) -> Result<()> {
    if let Some(p) = path {
        return write_lines(p, lines);
    }
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let io_err = |e| Error::Io { path: PathBuf::from("<stdout>"), source: e };
    for l in lines {
        writeln!(out, "{l}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_text(path: &Path) -> Result<String> {
    let lines = read_lines(path)?;
    Ok(lines.join("\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}
