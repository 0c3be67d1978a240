use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::session::LogRecord;

/// Append-only JSON-lines logs, one file per session.
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: PathBuf) -> io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Store { dir })
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn create(&self, id: &str, record: &LogRecord) -> io::Result<()> {
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.path(id))?;
        write_line(&mut f, record)
    }

    pub fn append(&self, id: &str, record: &LogRecord) -> io::Result<()> {
        let mut f = OpenOptions::new().append(true).open(self.path(id))?;
        write_line(&mut f, record)
    }

    /// Every session log in id order.
    pub fn load_all(&self) -> io::Result<Vec<(String, Vec<LogRecord>)>> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .filter_map(|p| Some(p.file_stem()?.to_str()?.to_owned()))
            .collect();
        ids.sort();
        ids.into_iter()
            .map(|id| {
                let records = read_log(&self.path(&id))?;
                Ok((id, records))
            })
            .collect()
    }
}

fn write_line(f: &mut fs::File, record: &LogRecord) -> io::Result<()> {
    let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.sync_data()
}

fn read_log(path: &Path) -> io::Result<Vec<LogRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), n + 1),
            )
        })?;
        out.push(rec);
    }
    Ok(out)
}
