use std::fmt::Display;
use std::fs;
use std::path::Path;

use fringe_core::io::write_pgm;
use fringe_core::{FringeError, Result, ScalarField};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| FringeError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| FringeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Effective parameters of a run, written as `config.txt`: a comment line
/// with the equivalent command followed by one `key = value` line per flag.
pub struct ConfigEcho {
    command: &'static str,
    entries: Vec<(String, String)>,
}

impl ConfigEcho {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            entries: Vec::new(),
        }
    }

    pub fn set(mut self, key: &str, value: impl Display) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    /// Boolean switch, echoed as `true`/`false`.
    pub fn flag(self, key: &str, on: bool) -> Self {
        self.set(key, on)
    }

    pub fn render(&self) -> String {
        let mut line = format!("# fringe {}", self.command);
        for (k, v) in &self.entries {
            match v.as_str() {
                "true" => line.push_str(&format!(" --{k}")),
                "false" => {}
                _ => line.push_str(&format!(" --{k} {v}")),
            }
        }
        let mut out = line + "\n";
        out.push_str(&format!("command = {}\n", self.command));
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("config.txt"), &self.render())
    }
}

/// Writes `<dir>/<stem>.pgm` scaled so that the field's min maps to 0 and its
/// max to 255, plus `<stem>.range.txt` recording that min and max.
pub fn write_preview(field: &ScalarField, dir: &Path, stem: &str) -> Result<()> {
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    let scaled = if span > 0.0 {
        field.map(|v| (v - lo) / span)
    } else {
        ScalarField::zeros(field.width(), field.height())
    };
    write_pgm(&scaled, dir.join(format!("{stem}.pgm")))?;
    write_text(
        &dir.join(format!("{stem}.range.txt")),
        &format!("min = {lo}\nmax = {hi}\n"),
    )
}
