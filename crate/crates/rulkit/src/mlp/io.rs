//! Plain-text model persistence.
//!
//! Parameters are written as decimal scientific notation with 17 significant
//! digits, which round-trips every finite `f64` exactly: a reloaded model
//! predicts bit-for-bit identically.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::{Activation, LayerSpec, MlpModel};

const MAGIC: &str = "mlp-regressor v1";

fn fmt(value: f64) -> String {
    format!("{value:.16e}")
}

impl Activation {
    fn parse(token: &str) -> Result<Activation> {
        match token {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::ModelFormat(format!("unknown activation `{other}`"))),
        }
    }
}

impl MlpModel {
    /// Serializes the model to the text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("input_width {}\n", self.input_width));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("layers {}\n", self.specs.len()));
        for spec in &self.specs {
            out.push_str(&format!(
                "layer {} {} {} {}\n",
                spec.activation.name(),
                spec.width,
                fmt(spec.l1),
                fmt(spec.l2)
            ));
        }
        for (l, spec) in self.specs.iter().enumerate() {
            let fan_in = self.weights[l].len() / spec.width;
            out.push_str(&format!("weights {l}\n"));
            for i in 0..fan_in {
                let row: Vec<String> = self.weights[l][i * spec.width..(i + 1) * spec.width]
                    .iter()
                    .map(|&w| fmt(w))
                    .collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            out.push_str(&format!("biases {l}\n"));
            let row: Vec<String> = self.biases[l].iter().map(|&b| fmt(b)).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    /// Parses a model from the text format.
    pub fn from_text(text: &str) -> Result<MlpModel> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| {
                Error::ModelFormat(format!("unexpected end of file, expected {what}"))
            })
        };

        if next("header")? != MAGIC {
            return Err(Error::ModelFormat(format!("missing `{MAGIC}` header")));
        }
        let input_width = parse_field(next("input_width")?, "input_width")?;
        let seed: u64 = parse_field(next("seed")?, "seed")?;
        let layer_count: usize = parse_field(next("layers")?, "layers")?;

        let mut specs = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            let line = next("layer")?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 5 || tokens[0] != "layer" {
                return Err(Error::ModelFormat(format!("malformed layer line `{line}`")));
            }
            specs.push(LayerSpec {
                activation: Activation::parse(tokens[1])?,
                width: parse_value(tokens[2], "layer width")?,
                l1: parse_value(tokens[3], "l1")?,
                l2: parse_value(tokens[4], "l2")?,
            });
        }

        let mut weights = Vec::with_capacity(layer_count);
        let mut biases = Vec::with_capacity(layer_count);
        let mut fan_in = input_width;
        for (l, spec) in specs.iter().enumerate() {
            expect_line(next("weights")?, &format!("weights {l}"))?;
            let mut layer = Vec::with_capacity(fan_in * spec.width);
            for _ in 0..fan_in {
                let row = parse_row(next("weight row")?, spec.width)?;
                layer.extend_from_slice(&row);
            }
            weights.push(layer);
            expect_line(next("biases")?, &format!("biases {l}"))?;
            biases.push(parse_row(next("bias row")?, spec.width)?);
            fan_in = spec.width;
        }
        expect_line(next("end")?, "end")?;

        let model = MlpModel {
            input_width,
            specs,
            weights,
            biases,
            seed,
        };
        // Reuse the construction checks so a tampered file cannot produce a
        // model that build() would reject.
        MlpModel::build(model.input_width, model.specs.clone(), 0)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MlpModel> {
        MlpModel::from_text(&fs::read_to_string(path)?)
    }
}

fn expect_line(line: &str, expected: &str) -> Result<()> {
    if line.trim() != expected {
        return Err(Error::ModelFormat(format!(
            "expected `{expected}`, found `{line}`"
        )));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(line: &str, name: &str) -> Result<T> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(key), Some(value), None) if key == name => parse_value(value, name),
        _ => Err(Error::ModelFormat(format!(
            "malformed `{name}` line: `{line}`"
        ))),
    }
}

fn parse_value<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::ModelFormat(format!("cannot parse {what} from `{token}`")))
}

fn parse_row(line: &str, width: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|t| parse_value(t, "parameter"))
        .collect::<Result<_>>()?;
    if values.len() != width {
        return Err(Error::ModelFormat(format!(
            "expected {width} values per row, found {}",
            values.len()
        )));
    }
    Ok(values)
}
