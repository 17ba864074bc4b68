//! Flat text checkpoints.
//!
//! ```text
//! align-entropy-checkpoint 1
//! model <vocab_size> <context> <feature_dim> <hidden> <left_context> <right_context>
//! block <name> <rows> <cols>
//! <rows lines of cols values>
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so a save/load cycle is
//! bit-exact. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::corpus::ContentLines;
use super::{ModelConfig, Params, ToyModel, BLOCK_NAMES};
use crate::error::{Error, Result};

const MAGIC: &str = "align-entropy-checkpoint";
const VERSION: u32 = 1;

pub fn write_checkpoint(w: &mut impl Write, header: &[String], model: &ToyModel) -> Result<()> {
    let mut buf = String::new();
    for h in header {
        writeln!(buf, "# {h}").unwrap();
    }
    let c = &model.config;
    writeln!(buf, "{MAGIC} {VERSION}").unwrap();
    writeln!(
        buf,
        "model {} {} {} {} {} {}",
        c.vocab_size, c.context, c.feature_dim, c.hidden, c.left_context, c.right_context
    )
    .unwrap();
    let shapes = Params::shapes(c);
    for ((name, block), (rows, cols)) in BLOCK_NAMES.iter().zip(model.params.blocks()).zip(shapes) {
        writeln!(buf, "block {name} {rows} {cols}").unwrap();
        for r in 0..rows {
            let row: Vec<String> = block[r * cols..(r + 1) * cols].iter().map(|v| format!("{v:?}")).collect();
            buf.push_str(&row.join(" "));
            buf.push('\n');
        }
    }
    w.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn read_checkpoint(r: impl BufRead) -> Result<ToyModel> {
    let mut lines = ContentLines::new(r);
    let (ln, magic) = lines.expect("checkpoint header")?;
    if magic.split_whitespace().collect::<Vec<_>>() != [MAGIC, &VERSION.to_string()] {
        return Err(Error::parse(ln, format!("expected `{MAGIC} {VERSION}`")));
    }
    let (ln, head) = lines.expect("model line")?;
    let f: Vec<&str> = head.split_whitespace().collect();
    if f.len() != 7 || f[0] != "model" {
        return Err(Error::parse(ln, "expected `model <V> <c> <d> <h> <left_context> <right_context>`"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(ln, format!("bad number `{s}`")));
    let config = ModelConfig {
        vocab_size: num(f[1])?,
        context: num(f[2])?,
        feature_dim: num(f[3])?,
        hidden: num(f[4])?,
        left_context: num(f[5])?,
        right_context: num(f[6])?,
    };
    let mut model = ToyModel::zeros(config)?;
    let shapes = Params::shapes(&config);
    for ((name, block), (rows, cols)) in BLOCK_NAMES.iter().zip(model.params.blocks_mut()).zip(shapes) {
        let (ln, head) = lines.expect("block line")?;
        let f: Vec<&str> = head.split_whitespace().collect();
        if f.len() != 4 || f[0] != "block" || f[1] != *name {
            return Err(Error::parse(ln, format!("expected `block {name} {rows} {cols}`")));
        }
        if num(f[2])? != rows || num(f[3])? != cols {
            return Err(Error::parse(ln, format!("block {name} must be {rows}x{cols}")));
        }
        for r in 0..rows {
            let (ln, row) = lines.expect("parameter row")?;
            let vals = row
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad value `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != cols {
                return Err(Error::parse(ln, format!("row must have {cols} values")));
            }
            block[r * cols..(r + 1) * cols].copy_from_slice(&vals);
        }
    }
    if let Some((ln, _)) = lines.next_line()? {
        return Err(Error::parse(ln, "trailing content after last block"));
    }
    Ok(model)
}

pub fn save_checkpoint(path: &Path, header: &[String], model: &ToyModel) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, header, model)?;
    crate::io::write_atomic(path, &buf)
}

pub fn load_checkpoint(path: &Path) -> Result<ToyModel> {
    read_checkpoint(BufReader::new(std::fs::File::open(path)?))
}
