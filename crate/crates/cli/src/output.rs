//! Artifact writing, confined to the output directory.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{config_error, CliError};

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Output {
            dir: dir.to_path_buf(),
        })
    }

    /// Write `name` (a bare file name) inside the output directory.
    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let bare = Path::new(name)
            .file_name()
            .is_some_and(|f| f == name && name != "." && name != "..");
        if !bare {
            return Err(config_error(format!("refusing to write `{name}`")));
        }
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Output { path, source })
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| config_error(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, text)
    }
}

/// `key = value` lines for the human-readable summaries.
#[derive(Debug, Default)]
pub struct Summary {
    pub title: String,
    lines: Vec<(String, String)>,
}

impl Summary {
    pub fn new(title: &str) -> Self {
        Summary {
            title: title.to_string(),
            lines: Vec::new(),
        }
    }

    pub fn line(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    /// Append pre-rendered `key = value` text.
    pub fn extend_text(&mut self, text: &str) {
        for l in text.lines() {
            if let Some((k, v)) = l.split_once(" = ") {
                self.line(k, v);
            }
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!("[{}]\n", self.title);
        for (k, v) in &self.lines {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }
}
