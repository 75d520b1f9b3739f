//! Append-only article log with an id → byte-offset index.
//!
//! Layout under the root directory:
//! - `articles.log`: one JSON article per line, never rewritten.
//! - `articles.idx`: `id<TAB>offset` per line. Only an accelerator; it is
//!   rebuilt from the log whenever it is missing or does not match.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use finnews_core::article::dedup_key;
use finnews_core::Article;

pub const LOG_FILE: &str = "articles.log";
pub const INDEX_FILE: &str = "articles.idx";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupted log entry at byte offset {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Appended {
    pub id: String,
    /// False when the id was already stored and nothing was written.
    pub inserted: bool,
}

#[derive(Debug)]
pub struct ArticleStore {
    root: PathBuf,
    log: File,
    offsets: HashMap<String, u64>,
    order: Vec<String>,
    end: u64,
}

impl ArticleStore {
    /// Opens or creates a store, rebuilding the index from the log if needed.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        let log_path = root.join(LOG_FILE);
        let log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| io_err(&log_path, e))?;
        let mut store = ArticleStore { root, log, offsets: HashMap::new(), order: Vec::new(), end: 0 };
        store.load()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.offsets.contains_key(id)
    }

    /// Ids in insertion order.
    pub fn ids(&self) -> &[String] {
        &self.order
    }

    /// Writes the article unless its id is already present.
    pub fn append(&mut self, article: &Article) -> Result<Appended, StoreError> {
        if self.offsets.contains_key(&article.id) {
            return Ok(Appended { id: article.id.clone(), inserted: false });
        }
        let mut line = serde_json::to_vec(article).expect("article serializes");
        line.push(b'\n');
        let offset = self.end;
        let log_path = self.root.join(LOG_FILE);
        self.log.write_all(&line).map_err(|e| io_err(&log_path, e))?;
        self.log.flush().map_err(|e| io_err(&log_path, e))?;
        self.end += line.len() as u64;

        let idx_path = self.root.join(INDEX_FILE);
        let mut idx = OpenOptions::new().create(true).append(true).open(&idx_path).map_err(|e| io_err(&idx_path, e))?;
        writeln!(idx, "{}\t{}", article.id, offset).map_err(|e| io_err(&idx_path, e))?;

        self.offsets.insert(article.id.clone(), offset);
        self.order.push(article.id.clone());
        Ok(Appended { id: article.id.clone(), inserted: true })
    }

    pub fn get(&self, id: &str) -> Result<Option<Article>, StoreError> {
        let Some(&offset) = self.offsets.get(id) else {
            return Ok(None);
        };
        let log_path = self.root.join(LOG_FILE);
        let mut file = File::open(&log_path).map_err(|e| io_err(&log_path, e))?;
        file.seek(SeekFrom::Start(offset)).map_err(|e| io_err(&log_path, e))?;
        let mut line = String::new();
        BufReader::new(file).read_line(&mut line).map_err(|e| io_err(&log_path, e))?;
        decode_line(line.trim_end_matches('\n'), offset).map(Some)
    }

    /// Every stored article in insertion order.
    pub fn scan(&self) -> Result<Vec<Article>, StoreError> {
        let (articles, _) = self.read_log_from(0)?;
        Ok(articles.into_iter().map(|(_, a)| a).collect())
    }

    fn read_log_from(&self, start: u64) -> Result<(Vec<(u64, Article)>, u64), StoreError> {
        let log_path = self.root.join(LOG_FILE);
        let mut file = File::open(&log_path).map_err(|e| io_err(&log_path, e))?;
        file.seek(SeekFrom::Start(start)).map_err(|e| io_err(&log_path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| io_err(&log_path, e))?;
        let mut out = Vec::new();
        let mut offset = start;
        for chunk in bytes.split_inclusive(|&b| b == b'\n') {
            if chunk.last() != Some(&b'\n') {
                return Err(StoreError::Corrupt { offset, reason: "unterminated final line".into() });
            }
            let text = std::str::from_utf8(&chunk[..chunk.len() - 1])
                .map_err(|_| StoreError::Corrupt { offset, reason: "line is not UTF-8".into() })?;
            out.push((offset, decode_line(text, offset)?));
            offset += chunk.len() as u64;
        }
        Ok((out, offset))
    }

    fn load(&mut self) -> Result<(), StoreError> {
        let log_len = self.log.metadata().map_err(|e| io_err(&self.root.join(LOG_FILE), e))?.len();
        if let Some((offsets, order)) = self.read_index(log_len) {
            // Trust the index only if the log holds exactly the indexed lines.
            let last_end = match order.last() {
                None => 0,
                Some(id) => {
                    let off = offsets[id];
                    let (tail, end) = self.read_log_from(off)?;
                    if tail.len() == 1 && tail[0].1.id == *id {
                        end
                    } else {
                        u64::MAX
                    }
                }
            };
            if last_end == log_len {
                self.offsets = offsets;
                self.order = order;
                self.end = log_len;
                return Ok(());
            }
        }
        self.rebuild_index()
    }

    fn read_index(&self, log_len: u64) -> Option<(HashMap<String, u64>, Vec<String>)> {
        let text = fs::read_to_string(self.root.join(INDEX_FILE)).ok()?;
        let mut offsets = HashMap::new();
        let mut order = Vec::new();
        let mut prev: Option<u64> = None;
        for line in text.lines() {
            let (id, off) = line.split_once('\t')?;
            let off: u64 = off.parse().ok()?;
            if off >= log_len || prev.is_some_and(|p| off <= p) || offsets.insert(id.to_string(), off).is_some() {
                return None;
            }
            prev = Some(off);
            order.push(id.to_string());
        }
        Some((offsets, order))
    }

    /// Full scan of the log; rewrites `articles.idx`.
    pub fn rebuild_index(&mut self) -> Result<(), StoreError> {
        let (entries, end) = self.read_log_from(0)?;
        self.offsets.clear();
        self.order.clear();
        let mut idx = String::new();
        for (offset, a) in entries {
            if self.offsets.insert(a.id.clone(), offset).is_some() {
                return Err(StoreError::Corrupt { offset, reason: format!("duplicate id {}", a.id) });
            }
            idx.push_str(&format!("{}\t{}\n", a.id, offset));
            self.order.push(a.id);
        }
        self.end = end;
        let idx_path = self.root.join(INDEX_FILE);
        fs::write(&idx_path, idx).map_err(|e| io_err(&idx_path, e))
    }
}

fn decode_line(text: &str, offset: u64) -> Result<Article, StoreError> {
    let a: Article = serde_json::from_str(text).map_err(|e| StoreError::Corrupt { offset, reason: e.to_string() })?;
    if a.id != dedup_key(&a) {
        return Err(StoreError::Corrupt { offset, reason: format!("id {} does not match its content", a.id) });
    }
    Ok(a)
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), source }
}
