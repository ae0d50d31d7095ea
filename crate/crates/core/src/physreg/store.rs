use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::AdversarialExample;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Identifier of the model checkpoint the campaign tested.
    pub model: Option<String>,
    pub campaign_seed: Option<u64>,
}

/// Adversarial examples indexed by parent row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AxStore {
    records: Vec<AdversarialExample>,
    by_parent: HashMap<usize, Vec<usize>>,
    pub provenance: Provenance,
}

impl AxStore {
    pub fn new(records: Vec<AdversarialExample>, provenance: Provenance) -> Self {
        let mut by_parent: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, r) in records.iter().enumerate() {
            by_parent.entry(r.parent_index).or_default().push(k);
        }
        Self {
            records,
            by_parent,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[AdversarialExample] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &AdversarialExample> {
        self.records.iter()
    }

    /// Records linked to `parent`.
    pub fn for_parent(&self, parent: usize) -> impl Iterator<Item = &AdversarialExample> {
        self.by_parent
            .get(&parent)
            .into_iter()
            .flatten()
            .map(move |&k| &self.records[k])
    }

    /// `(batch position, record)` for every record whose parent is in `batch`.
    pub fn lookup(&self, batch: &[usize]) -> Vec<(usize, &AdversarialExample)> {
        batch
            .iter()
            .enumerate()
            .flat_map(|(pos, &p)| self.for_parent(p).map(move |r| (pos, r)))
            .collect()
    }

    /// `(batch position, record index)` pairs, same order as [`AxStore::lookup`].
    pub fn lookup_indices(&self, batch: &[usize]) -> Vec<(usize, usize)> {
        batch
            .iter()
            .enumerate()
            .flat_map(|(pos, p)| self.by_parent.get(p).into_iter().flatten().map(move |&k| (pos, k)))
            .collect()
    }

    /// Fails with the first parent index outside `0..n_rows`.
    pub fn check_parents(&self, n_rows: usize) -> Result<()> {
        match self.records.iter().find(|r| r.parent_index >= n_rows) {
            Some(r) => Err(Error::OrphanAdversarial(r.parent_index)),
            None => Ok(()),
        }
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        Ok(Self::new(records, Provenance::default()))
    }
}
