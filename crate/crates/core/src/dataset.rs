//! CSV datasets with header `f1,...,fd,label[,weight]`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::risk::Sample;

/// Reads a sample from CSV text.
pub fn read_sample<R: Read>(reader: R) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Parse("missing `label` column".into()))?;
    let weight_col = headers.iter().position(|h| h == "weight");
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&k| k != label_col && Some(k) != weight_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Parse("no feature columns".into()));
    }

    let mut instances = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let x = feature_cols
            .iter()
            .map(|&k| {
                field(k).parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}: bad feature value `{}`", line + 1, field(k)))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let y = match field(label_col).parse::<i64>() {
            Ok(1) => 1,
            Ok(-1) => -1,
            _ => {
                return Err(Error::Parse(format!(
                    "row {}: label `{}` is not 1 or -1",
                    line + 1,
                    field(label_col)
                )))
            }
        };
        if let Some(k) = weight_col {
            weights.push(field(k).parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {}: bad weight `{}`", line + 1, field(k)))
            })?);
        }
        instances.push(x);
        labels.push(y);
    }
    if instances.is_empty() {
        return Err(Error::Parse("dataset has no rows".into()));
    }
    match weight_col {
        Some(_) => Sample::weighted(instances, labels, weights),
        None => Sample::new(instances, labels),
    }
}

pub fn load_sample(path: &Path) -> Result<Sample> {
    let file = std::fs::File::open(path)?;
    read_sample(std::io::BufReader::new(file))
}

/// Writes a sample; the weight column is included only for non-uniform weights.
pub fn write_sample<W: Write>(sample: &Sample, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=sample.dim()).map(|k| format!("f{k}")).collect();
    header.push("label".into());
    let weighted = !sample.is_uniform();
    if weighted {
        header.push("weight".into());
    }
    wtr.write_record(&header)?;
    for j in 0..sample.len() {
        let mut row: Vec<String> = sample.instances()[j].iter().map(|v| v.to_string()).collect();
        row.push(sample.labels()[j].to_string());
        if weighted {
            row.push(sample.weights()[j].to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
