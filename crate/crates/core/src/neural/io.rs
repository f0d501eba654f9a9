//! Plain-text model files.
//!
//! ```text
//! hlwnet-model 1
//! meta ap_type II
//! bounds input 3
//! lo -20e0 0e0 0e0
//! hi 4.5e1 3.141592653589793e0 1e1
//! mlp msnn
//! widths 3 16 4 1
//! activations relu relu sigmoid
//! loss mse
//! layer 0 16 3
//! <16 weight rows of 3 values>
//! bias <16 values>
//! ...
//! end
//! ```
//! Floats use the shortest representation that parses back to the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::dataset::ColumnBounds;
use super::mlp::{Activation, LossKind, Mlp, MlpSpec};
use crate::error::{Error, Result};

const MAGIC: &str = "hlwnet-model";
const VERSION: u32 = 1;

fn bad(n: usize, what: &str) -> Error {
    Error::Parse(format!("model file line {}: {what}", n + 1))
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let last = self.lines.last().map_or(0, |l| l.0);
        let line = self.lines.get(self.pos).copied().ok_or_else(|| bad(last, "unexpected end of file"))?;
        self.pos += 1;
        Ok(line)
    }

    fn field(&mut self, key: &str) -> Result<(usize, Vec<String>)> {
        let (n, line) = self.next()?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(bad(n, &format!("expected {key:?}")));
        }
        Ok((n, toks.map(str::to_string).collect()))
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>> {
        let (n, toks) = self.field(key)?;
        toks.iter().map(|t| t.parse::<f64>().map_err(|_| bad(n, &format!("bad number {t:?}")))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelBundle {
    pub meta: BTreeMap<String, String>,
    pub bounds: BTreeMap<String, ColumnBounds>,
    pub models: BTreeMap<String, Mlp>,
}

fn push_floats(out: &mut String, head: &str, values: &[f64]) {
    out.push_str(head);
    for v in values {
        write!(out, " {v:e}").expect("write to string");
    }
    out.push('\n');
}

impl ModelBundle {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").expect("write to string");
        }
        for (name, b) in &self.bounds {
            writeln!(out, "bounds {name} {}", b.width()).expect("write to string");
            push_floats(&mut out, "lo", &b.lo);
            push_floats(&mut out, "hi", &b.hi);
        }
        for (name, m) in &self.models {
            let spec = m.spec();
            writeln!(out, "mlp {name}").expect("write to string");
            let widths: Vec<String> = spec.widths.iter().map(usize::to_string).collect();
            writeln!(out, "widths {}", widths.join(" ")).expect("write to string");
            let acts: Vec<String> = spec.activations.iter().map(Activation::to_string).collect();
            writeln!(out, "activations {}", acts.join(" ")).expect("write to string");
            writeln!(out, "loss {}", spec.loss).expect("write to string");
            for l in 0..m.n_layers() {
                let (n_in, n_out) = (spec.widths[l], spec.widths[l + 1]);
                writeln!(out, "layer {l} {n_out} {n_in}").expect("write to string");
                let (w, b) = m.layer(l);
                for row in w.chunks(n_in) {
                    push_floats(&mut out, "w", row);
                }
                push_floats(&mut out, "bias", b);
            }
            out.push_str("end\n");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).collect();
        let mut cur = Cursor { lines, pos: 0 };
        let (n, header) = cur.next().map_err(|_| Error::Parse("empty model file".into()))?;
        let mut head = header.split_whitespace();
        if head.next() != Some(MAGIC) {
            return Err(bad(n, "missing model header"));
        }
        match head.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(VERSION) => {}
            other => return Err(bad(n, &format!("unsupported version {other:?}"))),
        }

        let mut bundle = ModelBundle::default();
        while !cur.done() {
            let (n, line) = cur.next()?;
            let mut it = line.split_whitespace();
            match it.next() {
                Some("meta") => {
                    let key = it.next().ok_or_else(|| bad(n, "meta without key"))?;
                    let value = line.trim_start()["meta".len()..].trim_start()[key.len()..].trim().to_string();
                    bundle.meta.insert(key.to_string(), value);
                }
                Some("bounds") => {
                    let name = it.next().ok_or_else(|| bad(n, "bounds without name"))?.to_string();
                    let width: usize = it.next().and_then(|w| w.parse().ok()).ok_or_else(|| bad(n, "bounds width"))?;
                    let lo = cur.floats("lo")?;
                    let hi = cur.floats("hi")?;
                    if lo.len() != width || hi.len() != width {
                        return Err(bad(n, "bounds width mismatch"));
                    }
                    bundle.bounds.insert(name, ColumnBounds::new(lo, hi)?);
                }
                Some("mlp") => {
                    let name = it.next().ok_or_else(|| bad(n, "mlp without name"))?.to_string();
                    let (m, w) = cur.field("widths")?;
                    let widths = w
                        .iter()
                        .map(|t| t.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad(m, "bad widths"))?;
                    let (_, a) = cur.field("activations")?;
                    let activations = a.iter().map(|t| t.parse()).collect::<Result<Vec<Activation>>>()?;
                    let (m, l) = cur.field("loss")?;
                    let loss: LossKind = l.first().ok_or_else(|| bad(m, "missing loss"))?.parse()?;
                    let spec = MlpSpec::new(widths, activations, loss)?;
                    let mut params = Vec::with_capacity(spec.n_params());
                    for layer in 0..spec.widths.len() - 1 {
                        let (n_in, n_out) = (spec.widths[layer], spec.widths[layer + 1]);
                        let (m, l) = cur.field("layer")?;
                        if l != [layer.to_string(), n_out.to_string(), n_in.to_string()] {
                            return Err(bad(m, "layer shape mismatch"));
                        }
                        for _ in 0..n_out {
                            let row = cur.floats("w")?;
                            if row.len() != n_in {
                                return Err(bad(m, "weight row width"));
                            }
                            params.extend(row);
                        }
                        let b = cur.floats("bias")?;
                        if b.len() != n_out {
                            return Err(bad(m, "bias width"));
                        }
                        params.extend(b);
                    }
                    let (m, l) = cur.next()?;
                    if l.trim() != "end" {
                        return Err(bad(m, "expected end"));
                    }
                    bundle.models.insert(name, Mlp::from_params(spec, params)?);
                }
                _ => return Err(bad(n, &format!("unexpected line {line:?}"))),
            }
        }
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_text(&text)
    }
}

pub fn save_model(model: &Mlp, path: &Path) -> Result<()> {
    let mut bundle = ModelBundle::default();
    bundle.models.insert("model".into(), model.clone());
    bundle.save(path)
}

pub fn load_model(path: &Path) -> Result<Mlp> {
    let mut bundle = ModelBundle::load(path)?;
    bundle
        .models
        .remove("model")
        .ok_or_else(|| Error::Parse(format!("{} holds no model named \"model\"", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn text_round_trip_is_exact() {
        let spec = MlpSpec::relu_stack(vec![3, 16, 4, 1], Activation::Sigmoid, LossKind::Mse).unwrap();
        let m = Mlp::new(spec, &mut rng_for(11, &[])).unwrap();
        let mut b = ModelBundle::default();
        b.meta.insert("ap_type".into(), "IV".into());
        b.meta.insert("note".into(), "two words".into());
        b.bounds.insert("input".into(), ColumnBounds::new(vec![-20.0, 0.0, 1e-300], vec![0.1, 3.5, 10.0]).unwrap());
        b.models.insert("msnn".into(), m);
        let back = ModelBundle::from_text(&b.to_text()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn corrupt_files_rejected() {
        assert!(ModelBundle::from_text("").is_err());
        assert!(ModelBundle::from_text("hlwnet-model 2\n").is_err());
        assert!(ModelBundle::from_text(
            "hlwnet-model 1\nmlp x\nwidths 2 1\nactivations sigmoid\nloss mse\nlayer 0 1 2\nw 1e0\nbias 0e0\nend\n"
        )
        .is_err());
    }
}
