//! File formats: point-cloud CSV, loss CSV, checkpoints, atomic writes.
//!
//! ## Checkpoint layout (text, version 1)
//!
//! ```text
//! monge-mmd checkpoint 1
//! epoch <completed epochs>
//! layers <L>
//! <inputs> <outputs> <activation>        # L lines, input layer first
//! params <count>
//! <value>                                # count lines, flat parameter order
//! optimizer none
//! ```
//!
//! or, with optimizer state,
//!
//! ```text
//! optimizer adam <step_count> <lr> <beta1> <beta2> <eps>
//! first_moment <count>
//! <value> ...
//! second_moment <count>
//! <value> ...
//! ```
//!
//! followed by a final `end` line. Floats use Rust's shortest round-trip
//! exponent form, so save/load is bit-exact.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerShape, MlpParams};
use crate::optim::{AdamHyper, AdamState};
use crate::sample::SampleSet;
use crate::train::EpochRecord;

const CHECKPOINT_MAGIC: &str = "monge-mmd checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// CSV with header `x0,x1,...`, one point per row, 17 significant digits.
pub fn points_to_csv(points: &SampleSet) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..points.dim()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in points.points() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_points_csv(path: &Path, points: &SampleSet) -> Result<()> {
    write_atomic(path, points_to_csv(points).as_bytes())
}

pub fn read_points_csv(path: &Path) -> Result<SampleSet> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let dim = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .len();
    if dim == 0 {
        return Err(Error::format(path, "missing header"));
    }
    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(path, format!("row {}: `{field}` is not a number", row + 1))
            })?;
            data.push(v);
        }
    }
    SampleSet::from_flat(dim, data).map_err(|e| Error::format(path, e.to_string()))
}

/// Loss history as `epoch,objective,mmd2,cost`.
pub fn loss_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,objective,mmd2,cost\n");
    for r in history {
        let _ = writeln!(out, "{},{:e},{:e},{:e}", r.epoch, r.objective, r.mmd2, r.cost);
    }
    out
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            record
                .get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(path, "malformed loss row"))
        };
        out.push(EpochRecord {
            epoch: num(0)? as usize,
            objective: num(1)?,
            mmd2: num(2)?,
            cost: num(3)?,
        });
    }
    Ok(out)
}

fn next_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> std::result::Result<(usize, &'a str), String> {
    lines
        .next()
        .ok_or_else(|| "unexpected end of checkpoint".to_string())
}

/// Network parameters plus optional optimizer state and epoch counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: MlpParams,
    pub optimizer: Option<AdamState>,
    pub epoch: usize,
}

fn push_values(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "{name} {}", values.len());
    for v in values {
        let _ = writeln!(out, "{v:e}");
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        let _ = writeln!(out, "epoch {}", self.epoch);
        let _ = writeln!(out, "layers {}", self.params.layers().len());
        for s in self.params.layers() {
            let _ = writeln!(out, "{} {} {}", s.inputs, s.outputs, s.activation.name());
        }
        push_values(&mut out, "params", self.params.as_slice());
        match &self.optimizer {
            None => out.push_str("optimizer none\n"),
            Some(opt) => {
                let h = opt.hyper;
                let _ = writeln!(
                    out,
                    "optimizer adam {} {:e} {:e} {:e} {:e}",
                    opt.step_count, h.lr, h.beta1, h.beta2, h.eps
                );
                push_values(&mut out, "first_moment", &opt.first_moment);
                push_values(&mut out, "second_moment", &opt.second_moment);
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?).map_err(|msg| Error::format(path, msg))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = || next_line(&mut lines);

        let (_, header) = next()?;
        let version = header
            .strip_prefix(CHECKPOINT_MAGIC)
            .ok_or("not a monge-mmd checkpoint")?
            .trim();
        if version != CHECKPOINT_VERSION.to_string() {
            return Err(format!("unsupported checkpoint version `{version}`"));
        }

        fn keyed<'a>(line: (usize, &'a str), key: &str) -> std::result::Result<Vec<&'a str>, String> {
            let mut parts = line.1.split_whitespace();
            if parts.next() != Some(key) {
                return Err(format!("line {}: expected `{key}`", line.0));
            }
            Ok(parts.collect())
        }
        fn parse_num<T: std::str::FromStr>(s: Option<&&str>, line: usize) -> std::result::Result<T, String> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| format!("line {line}: malformed number"))
        }

        let l = next()?;
        let epoch: usize = parse_num(keyed(l, "epoch")?.first(), l.0)?;
        let l = next()?;
        let n_layers: usize = parse_num(keyed(l, "layers")?.first(), l.0)?;
        let mut shapes = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let (ln, line) = next()?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(format!("line {ln}: expected `<inputs> <outputs> <activation>`"));
            }
            shapes.push(LayerShape {
                inputs: parse_num(parts.first(), ln)?,
                outputs: parse_num(parts.get(1), ln)?,
                activation: Activation::from_name(parts[2])
                    .ok_or_else(|| format!("line {ln}: unknown activation `{}`", parts[2]))?,
            });
        }

        fn read_values<'a>(
            next: &mut impl FnMut() -> std::result::Result<(usize, &'a str), String>,
            key: &str,
        ) -> std::result::Result<Vec<f64>, String> {
            let l = next()?;
            let count: usize = parse_num(keyed(l, key)?.first(), l.0)?;
            let mut v = Vec::with_capacity(count.min(1 << 24));
            for _ in 0..count {
                let (ln, line) = next()?;
                v.push(line.parse().map_err(|_| format!("line {ln}: `{line}` is not a number"))?);
            }
            Ok(v)
        }
        let values = read_values(&mut next, "params")?;
        let params = MlpParams::from_parts(shapes, values).map_err(|e| e.to_string())?;

        let l = next()?;
        let opt_fields = keyed(l, "optimizer")?;
        let optimizer = match opt_fields.first() {
            Some(&"none") => None,
            Some(&"adam") => {
                let hyper = AdamHyper {
                    lr: parse_num(opt_fields.get(2), l.0)?,
                    beta1: parse_num(opt_fields.get(3), l.0)?,
                    beta2: parse_num(opt_fields.get(4), l.0)?,
                    eps: parse_num(opt_fields.get(5), l.0)?,
                };
                let step_count: u64 = parse_num(opt_fields.get(1), l.0)?;
                let mut state =
                    AdamState::new(params.num_params(), hyper).map_err(|e| e.to_string())?;
                state.step_count = step_count;
                state.first_moment = read_values(&mut next, "first_moment")?;
                state.second_moment = read_values(&mut next, "second_moment")?;
                if state.first_moment.len() != params.num_params()
                    || state.second_moment.len() != params.num_params()
                {
                    return Err("optimizer moments do not match parameter count".into());
                }
                Some(state)
            }
            _ => return Err(format!("line {}: unknown optimizer", l.0)),
        };
        let (ln, end) = next()?;
        if end != "end" {
            return Err(format!("line {ln}: expected `end`"));
        }
        Ok(Checkpoint {
            params,
            optimizer,
            epoch,
        })
    }
}
