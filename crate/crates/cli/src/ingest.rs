//! Long-format count data: one `country,gold_cause,predicted_cause,count`
//! record per cell, optionally preceded by a `causes,<label>,...` line that
//! fixes the cause list and its order.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use misclass_core::{CauseSet, CountMatrix};

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 4] = ["country", "gold_cause", "predicted_cause", "count"];

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub causes: CauseSet,
    /// In order of first appearance.
    pub countries: Vec<String>,
    pub counts: Vec<CountMatrix>,
}

fn parse_err(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("line {line}: {msg}"))
}

pub fn ingest_path(path: &Path) -> CliResult<Ingested> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    ingest(file)
}

pub fn ingest<R: Read>(input: R) -> CliResult<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let next = |records: &mut csv::StringRecordsIter<R>| -> CliResult<Option<(u64, csv::StringRecord)>> {
        match records.next() {
            None => Ok(None),
            Some(Err(e)) => {
                let line = e.position().map_or(0, |p| p.line());
                Err(parse_err(line, e))
            }
            Some(Ok(r)) => Ok(Some((r.position().map_or(0, |p| p.line()), r))),
        }
    };

    let (mut line, mut first) =
        next(&mut records)?.ok_or_else(|| CliError::Parse("empty input".into()))?;
    let declared: Option<Vec<String>> = if first.get(0) == Some("causes") {
        let labels: Vec<String> = first.iter().skip(1).map(str::to_string).collect();
        CauseSet::new(labels.clone()).map_err(|e| parse_err(line, e))?;
        (line, first) = next(&mut records)?.ok_or_else(|| parse_err(line + 1, "missing header"))?;
        Some(labels)
    } else {
        None
    };
    if first.iter().ne(HEADER) {
        return Err(parse_err(
            line,
            format!("expected header `{}`", HEADER.join(",")),
        ));
    }

    let mut causes: Vec<String> = declared.clone().unwrap_or_default();
    let mut cause_index: HashMap<String, usize> =
        causes.iter().enumerate().map(|(k, c)| (c.clone(), k)).collect();
    let mut countries: Vec<String> = Vec::new();
    let mut country_index: HashMap<String, usize> = HashMap::new();
    let mut seen: HashMap<(usize, usize, usize), u64> = HashMap::new();
    let mut cells: Vec<(usize, usize, usize, u64)> = Vec::new();

    while let Some((line, rec)) = next(&mut records)? {
        if rec.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, found {}", rec.len())));
        }
        let mut cause = |label: &str| -> CliResult<usize> {
            if label.is_empty() {
                return Err(parse_err(line, "empty cause label"));
            }
            if let Some(&k) = cause_index.get(label) {
                return Ok(k);
            }
            if declared.is_some() {
                return Err(parse_err(line, format!("cause `{label}` is not in the declared list")));
            }
            causes.push(label.to_string());
            cause_index.insert(label.to_string(), causes.len() - 1);
            Ok(causes.len() - 1)
        };
        let gold = cause(&rec[1])?;
        let predicted = cause(&rec[2])?;
        let country = &rec[0];
        if country.is_empty() {
            return Err(parse_err(line, "empty country"));
        }
        let s = *country_index.entry(country.to_string()).or_insert_with(|| {
            countries.push(country.to_string());
            countries.len() - 1
        });
        let count: i128 = rec[3]
            .parse()
            .map_err(|_| parse_err(line, format!("count `{}` is not an integer", &rec[3])))?;
        if count < 0 {
            return Err(parse_err(line, format!("negative count {count}")));
        }
        let count = u64::try_from(count).map_err(|_| parse_err(line, "count too large"))?;
        if let Some(first) = seen.insert((s, gold, predicted), line) {
            return Err(parse_err(
                line,
                format!(
                    "duplicate triple ({country}, {}, {}), first given on line {first}",
                    &rec[1], &rec[2]
                ),
            ));
        }
        cells.push((s, gold, predicted, count));
    }
    if countries.is_empty() {
        return Err(CliError::Parse("no data rows".into()));
    }
    let causes = CauseSet::new(causes).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut counts = vec![CountMatrix::zeros(causes.clone()); countries.len()];
    for (s, i, j, n) in cells {
        counts[s].set(i, j, n);
    }
    Ok(Ingested {
        causes,
        countries,
        counts,
    })
}

/// Writes every cell, zeros included, after a `causes` line, so that
/// [`ingest`] returns the same data.
pub fn emit<W: Write>(out: W, data: &Ingested) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_writer(out);
    let mut first = vec!["causes".to_string()];
    first.extend(data.causes.labels().iter().cloned());
    w.write_record(&first)?;
    w.write_record(HEADER)?;
    let labels = data.causes.labels();
    for (country, counts) in data.countries.iter().zip(&data.counts) {
        for (i, gold) in labels.iter().enumerate() {
            for (j, predicted) in labels.iter().enumerate() {
                w.write_record([country, gold, predicted, &counts.get(i, j).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CliResult<Ingested> {
        ingest(s.as_bytes())
    }

    #[test]
    fn two_countries_full_grid() {
        let d = parse(
            "country,gold_cause,predicted_cause,count\n\
             A,x,x,5\nA,x,y,1\nA,y,x,2\nA,y,y,7\n\
             B,x,x,3\nB,x,y,0\nB,y,x,4\nB,y,y,1\n",
        )
        .unwrap();
        assert_eq!(d.countries, ["A", "B"]);
        assert_eq!(d.counts[0].total(), 15);
        assert_eq!(d.counts[1].total(), 8);
        assert_eq!(d.counts[1].get(1, 0), 4);
    }

    #[test]
    fn absent_triples_are_zero() {
        let d = parse("country,gold_cause,predicted_cause,count\nA,x,y,3\nA,y,y,2\n").unwrap();
        assert_eq!(d.causes.labels(), ["x", "y"]);
        assert_eq!(d.counts[0].get(0, 0), 0);
        assert_eq!(d.counts[0].get(1, 0), 0);
    }

    #[test]
    fn declared_causes_fix_order_and_labels() {
        let d = parse("causes,z,y,x\ncountry,gold_cause,predicted_cause,count\nA,x,y,3\n").unwrap();
        assert_eq!(d.causes.labels(), ["z", "y", "x"]);
        assert_eq!(d.counts[0].get(2, 1), 3);
        let e = parse("causes,x,y\ncountry,gold_cause,predicted_cause,count\nA,x,w,3\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn errors_name_their_line() {
        let dup = "country,gold_cause,predicted_cause,count\nA,x,y,3\nA,y,y,1\nA,x,y,4\n";
        let e = parse(dup).unwrap_err();
        assert!(matches!(e, CliError::Parse(_)));
        assert!(e.to_string().contains("line 4") && e.to_string().contains("line 2"), "{e}");

        let neg = "country,gold_cause,predicted_cause,count\nA,x,y,-3\n";
        assert!(parse(neg).unwrap_err().to_string().contains("line 2: negative"));

        let ragged = "country,gold_cause,predicted_cause,count\nA,x,y,3\nA,x,2\n";
        assert!(parse(ragged).unwrap_err().to_string().contains("line 3"));

        let bad = "country,gold,predicted,count\nA,x,y,3\n";
        assert!(parse(bad).unwrap_err().to_string().contains("line 1"));
        assert!(parse("").is_err());
    }

    #[test]
    fn quoted_fields_follow_rfc4180() {
        let d = parse(
            "country,gold_cause,predicted_cause,count\n\"Sierra, Leone\",\"a \"\"b\"\"\",c,2\n",
        )
        .unwrap();
        assert_eq!(d.countries, ["Sierra, Leone"]);
        assert_eq!(d.causes.labels(), ["a \"b\"", "c"]);
    }

    #[test]
    fn emit_round_trips() {
        let d = parse(
            "country,gold_cause,predicted_cause,count\n\"S, L\",x,y,3\nS,y,z,2\nS,z,z,9\n",
        )
        .unwrap();
        let mut buf = Vec::new();
        emit(&mut buf, &d).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), d);
        let d = parse("country,gold_cause,predicted_cause,count\nS,x,y,3\n").unwrap();
        let mut buf = Vec::new();
        emit(&mut buf, &d).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), d);
    }
}
