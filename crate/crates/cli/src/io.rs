use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use interdict_core::instances::Instance;
use interdict_core::oracle::LabelRecord;
use interdict_core::rng::keyed_hash;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Instances with ids; unnamed ones get `line-N` from their 1-based line.
pub fn read_instances(path: &Path) -> Result<Vec<(String, Instance)>> {
    let raw: Vec<Instance> = read_jsonl(path)?;
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, inst)| (inst.id().map(str::to_string).unwrap_or_else(|| format!("line-{}", i + 1)), inst))
        .collect())
}

pub fn read_labels(path: &Path) -> Result<HashMap<String, LabelRecord>> {
    let records: Vec<LabelRecord> = read_jsonl(path)?;
    let mut map = HashMap::with_capacity(records.len());
    for r in records {
        let id = r.instance.clone();
        if map.insert(id.clone(), r).is_some() {
            bail!("duplicate label for instance {id}");
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    All,
}

/// Half train, a quarter validation, a quarter test, decided per id.
pub fn split_of(id: &str, seed: u64) -> Split {
    match keyed_hash(seed, &format!("split:{id}")) % 4 {
        0 | 1 => Split::Train,
        2 => Split::Val,
        _ => Split::Test,
    }
}

pub fn in_split(id: &str, seed: u64, split: Split) -> bool {
    split == Split::All || split_of(id, seed) == split
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("cannot create directory {}", path.display()))
}
