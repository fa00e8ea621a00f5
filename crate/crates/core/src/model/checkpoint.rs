//! Text checkpoints.
//!
//! ```text
//! ldm-checkpoint v1 kind=mlp input_dim=4 num_classes=3 hidden_dim=16 seed=7 params=131
//! 0.1234...
//! ...
//! ```
//!
//! One parameter per line, written with the shortest decimal representation
//! that parses back to the same `f64`.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{ModelKind, ModelSpec, TrainedModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "ldm-checkpoint";
const VERSION: &str = "v1";

pub fn write_checkpoint<W: Write>(model: &TrainedModel, mut out: W) -> Result<()> {
    let spec = model.spec();
    write!(
        out,
        "{CHECKPOINT_MAGIC} {VERSION} kind={} input_dim={} num_classes={}",
        spec.kind, spec.input_dim, spec.num_classes
    )?;
    if let Some(h) = spec.hidden_dim {
        write!(out, " hidden_dim={h}")?;
    }
    writeln!(out, " seed={} params={}", spec.seed, model.params().len())?;
    for v in &model.params().values {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<TrainedModel> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty file".into()))??;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Checkpoint("missing header".into()));
    }
    match fields.next() {
        Some(VERSION) => {}
        other => {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                other.unwrap_or("<none>")
            )))
        }
    }
    let mut kind = None;
    let mut input_dim = None;
    let mut num_classes = None;
    let mut hidden_dim = None;
    let mut seed = None;
    let mut count = None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad header field `{field}`")))?;
        let num = || {
            value
                .parse::<u64>()
                .map_err(|_| Error::Checkpoint(format!("bad value for {key}: `{value}`")))
        };
        match key {
            "kind" => kind = Some(value.parse::<ModelKind>()?),
            "input_dim" => input_dim = Some(num()? as usize),
            "num_classes" => num_classes = Some(num()? as usize),
            "hidden_dim" => hidden_dim = Some(num()? as usize),
            "seed" => seed = Some(num()?),
            "params" => count = Some(num()? as usize),
            _ => return Err(Error::Checkpoint(format!("unknown header field `{key}`"))),
        }
    }
    let missing = |name: &str| Error::Checkpoint(format!("header lacks {name}"));
    let spec = ModelSpec {
        kind: kind.ok_or_else(|| missing("kind"))?,
        input_dim: input_dim.ok_or_else(|| missing("input_dim"))?,
        num_classes: num_classes.ok_or_else(|| missing("num_classes"))?,
        hidden_dim,
        seed: seed.ok_or_else(|| missing("seed"))?,
    };
    spec.validate()?;
    let count = count.ok_or_else(|| missing("params"))?;

    let mut values = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|_| Error::Checkpoint(format!("line {}: not a number: `{line}`", i + 2)))?;
        values.push(v);
    }
    if values.len() != count {
        return Err(Error::Checkpoint(format!(
            "header declares {count} parameters, found {}",
            values.len()
        )));
    }
    TrainedModel::new(spec, values)
}

impl TrainedModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        write_checkpoint(self, std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        read_checkpoint(std::io::BufReader::new(file))
    }
}
