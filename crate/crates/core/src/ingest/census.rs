//! Census microdata: the variable schema and the household CSV parser.
//!
//! The CSV must carry `household_id`, `block_id`, and one column per
//! schema variable. Binary cells accept `yes`/`no`/`1`/`0`/empty;
//! percentage cells accept numbers in [0, 100] or empty. Empty cells
//! become missing values, kept as missing downstream.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Binary,
    Percentage,
}

/// Whether a larger value indicates a better-off household. Needed to
/// orient all variables the same way before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherIsBetter,
    HigherIsWorse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusVariable {
    pub name: String,
    pub kind: VariableKind,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusSchema {
    pub variables: Vec<CensusVariable>,
}

impl CensusSchema {
    /// The default schema: 15 housing-unit yes/no variables and 11
    /// household-member percentage variables. Everything is oriented
    /// higher-is-better except crowding by multiple households.
    pub fn default_variables() -> Self {
        fn var(name: &str, kind: VariableKind, polarity: Polarity) -> CensusVariable {
            CensusVariable { name: name.to_string(), kind, polarity }
        }
        use Polarity::{HigherIsBetter, HigherIsWorse};
        use VariableKind::{Binary, Percentage};
        CensusSchema {
            variables: vec![
                var("more_than_one_household_per_housing_unit", Binary, HigherIsWorse),
                var("walls_industrial_materials", Binary, HigherIsBetter),
                var("floor_industrial_materials", Binary, HigherIsBetter),
                var("access_electricity", Binary, HigherIsBetter),
                var("access_water", Binary, HigherIsBetter),
                var("access_sewerage", Binary, HigherIsBetter),
                var("access_natural_gas", Binary, HigherIsBetter),
                var("access_waste_collection", Binary, HigherIsBetter),
                var("waste_collection_over_3_per_week", Binary, HigherIsBetter),
                var("access_internet", Binary, HigherIsBetter),
                var("wc_connected_to_sewage", Binary, HigherIsBetter),
                var("has_bedroom", Binary, HigherIsBetter),
                var("independent_kitchen", Binary, HigherIsBetter),
                var("kitchen_connected_to_water", Binary, HigherIsBetter),
                var("under_3_persons_per_bedroom", Binary, HigherIsBetter),
                var("pct_members_men", Percentage, HigherIsBetter),
                var("pct_members_over_64", Percentage, HigherIsBetter),
                var("pct_without_indigenous_members", Percentage, HigherIsBetter),
                var("pct_members_in_birth_municipality", Percentage, HigherIsBetter),
                var("pct_members_not_sick", Percentage, HigherIsBetter),
                var("pct_members_without_disability", Percentage, HigherIsBetter),
                var("pct_members_not_illiterate", Percentage, HigherIsBetter),
                var("pct_members_over_24_with_college", Percentage, HigherIsBetter),
                var("pct_members_15_to_64_working", Percentage, HigherIsBetter),
                var("pct_members_married_or_partnered", Percentage, HigherIsBetter),
                var("pct_women_with_children", Percentage, HigherIsBetter),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.variables.is_empty() {
            return Err("schema lists no variables".into());
        }
        let mut seen = BTreeSet::new();
        for v in &self.variables {
            if v.name.trim().is_empty() {
                return Err("schema contains an empty variable name".into());
            }
            if !seen.insert(v.name.as_str()) {
                return Err(format!("duplicate variable name `{}`", v.name));
            }
        }
        Ok(())
    }

    /// Load a YAML sidecar of the form `variables: [{name, kind, polarity}, ...]`.
    pub fn from_yaml_path(path: &Path) -> Result<Self, ParseError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
        let schema: CensusSchema = serde_yaml::from_str(&text)
            .map_err(|e| ParseError::Format { path: path.to_path_buf(), message: e.to_string() })?;
        schema
            .validate()
            .map_err(|message| ParseError::Format { path: path.to_path_buf(), message })?;
        Ok(schema)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("schema serializes")
    }
}

/// One census household, values aligned to the schema's variable order.
/// Binary variables hold 0/1, percentages hold [0, 100]; `None` is a
/// missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRecord {
    pub household_id: String,
    pub block_id: String,
    pub values: Vec<Option<f64>>,
}

fn parse_cell(
    raw: &str,
    kind: VariableKind,
    path: &Path,
    line: usize,
    column: &str,
) -> Result<Option<f64>, ParseError> {
    let cell_err = |message: String| ParseError::Cell {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    };
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match kind {
        VariableKind::Binary => match raw {
            "yes" | "1" => Ok(Some(1.0)),
            "no" | "0" => Ok(Some(0.0)),
            other => Err(cell_err(format!("expected yes/no/1/0 or empty, found `{other}`"))),
        },
        VariableKind::Percentage => {
            let value: f64 =
                raw.parse().map_err(|_| cell_err(format!("`{raw}` is not a number")))?;
            if !value.is_finite() || !(0.0..=100.0).contains(&value) {
                return Err(cell_err(format!("{value} is outside [0, 100]")));
            }
            Ok(Some(value))
        }
    }
}

/// Parse a census CSV against a schema, preserving row order.
pub fn parse_census(path: &Path, schema: &CensusSchema) -> Result<Vec<HouseholdRecord>, ParseError> {
    schema
        .validate()
        .map_err(|message| ParseError::Format { path: path.to_path_buf(), message })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => ParseError::Io { path: path.to_path_buf(), source },
            other => ParseError::Format { path: path.to_path_buf(), message: format!("{other:?}") },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| ParseError::Format { path: path.to_path_buf(), message: e.to_string() })?
        .clone();
    let col_of = |name: &str| -> Result<usize, ParseError> {
        headers.iter().position(|h| h == name).ok_or_else(|| ParseError::Column {
            path: path.to_path_buf(),
            column: name.to_string(),
            message: "column missing from header".into(),
        })
    };
    let id_col = col_of("household_id")?;
    let block_col = col_of("block_id")?;
    let var_cols: Vec<usize> =
        schema.variables.iter().map(|v| col_of(&v.name)).collect::<Result<_, _>>()?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| ParseError::Format { path: path.to_path_buf(), message: e.to_string() })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let mut values = Vec::with_capacity(schema.variables.len());
        for (var, &col) in schema.variables.iter().zip(&var_cols) {
            let raw = row.get(col).unwrap_or("");
            values.push(parse_cell(raw, var.kind, path, line, &var.name)?);
        }
        let household_id = row.get(id_col).unwrap_or("").to_string();
        if values.iter().all(Option::is_none) {
            return Err(ParseError::Line {
                path: path.to_path_buf(),
                line,
                message: format!("household `{household_id}` has no observed variables"),
            });
        }
        records.push(HouseholdRecord {
            household_id,
            block_id: row.get(block_col).unwrap_or("").to_string(),
            values,
        });
    }
    Ok(records)
}

/// Serialize households back to the CSV layout accepted by
/// [`parse_census`]. Binary values are written as yes/no.
pub fn write_census_csv<W: Write>(
    w: W,
    schema: &CensusSchema,
    records: &[HouseholdRecord],
) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = vec!["household_id".to_string(), "block_id".to_string()];
    header.extend(schema.variables.iter().map(|v| v.name.clone()));
    writer.write_record(&header)?;
    for record in records {
        let mut row = vec![record.household_id.clone(), record.block_id.clone()];
        for (var, value) in schema.variables.iter().zip(&record.values) {
            row.push(match (value, var.kind) {
                (None, _) => String::new(),
                (Some(v), VariableKind::Binary) => {
                    (if *v == 1.0 { "yes" } else { "no" }).to_string()
                }
                (Some(v), VariableKind::Percentage) => format!("{v}"),
            });
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::NamedTempFile;

    fn small_schema() -> CensusSchema {
        CensusSchema {
            variables: vec![
                CensusVariable {
                    name: "access_water".into(),
                    kind: VariableKind::Binary,
                    polarity: Polarity::HigherIsBetter,
                },
                CensusVariable {
                    name: "pct_members_not_sick".into(),
                    kind: VariableKind::Percentage,
                    polarity: Polarity::HigherIsBetter,
                },
            ],
        }
    }

    fn write_file(content: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn yes_maps_to_one() {
        let f = write_file("household_id,block_id,access_water,pct_members_not_sick\nh1,b1,yes,40\n");
        let records = parse_census(f.path(), &small_schema()).unwrap();
        assert_eq!(records[0].values[0], Some(1.0));
        assert_eq!(records[0].values[1], Some(40.0));
    }

    #[test]
    fn percentage_out_of_range_names_column() {
        let f = write_file("household_id,block_id,access_water,pct_members_not_sick\nh1,b1,yes,150\n");
        match parse_census(f.path(), &small_schema()) {
            Err(ParseError::Cell { column, line, .. }) => {
                assert_eq!(column, "pct_members_not_sick");
                assert_eq!(line, 2);
            }
            other => panic!("expected cell error, got {other:?}"),
        }
    }

    #[test]
    fn empty_cell_is_missing_but_record_accepted() {
        let f = write_file("household_id,block_id,access_water,pct_members_not_sick\nh1,b1,no,\n");
        let records = parse_census(f.path(), &small_schema()).unwrap();
        assert_eq!(records[0].values, vec![Some(0.0), None]);
    }

    #[test]
    fn missing_column_is_reported() {
        let f = write_file("household_id,block_id,access_water\nh1,b1,yes\n");
        match parse_census(f.path(), &small_schema()) {
            Err(ParseError::Column { column, .. }) => assert_eq!(column, "pct_members_not_sick"),
            other => panic!("expected column error, got {other:?}"),
        }
    }

    #[test]
    fn all_missing_household_is_rejected() {
        let f = write_file("household_id,block_id,access_water,pct_members_not_sick\nh1,b1,,\n");
        match parse_census(f.path(), &small_schema()) {
            Err(ParseError::Line { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("h1"));
            }
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn default_schema_shape() {
        let schema = CensusSchema::default_variables();
        schema.validate().unwrap();
        assert_eq!(schema.variables.len(), 26);
        let binary = schema.variables.iter().filter(|v| v.kind == VariableKind::Binary).count();
        assert_eq!(binary, 15);
        assert_eq!(schema.variables.len() - binary, 11);
        let worse: Vec<&str> = schema
            .variables
            .iter()
            .filter(|v| v.polarity == Polarity::HigherIsWorse)
            .map(|v| v.name.as_str())
            .collect();
        assert_eq!(worse, vec!["more_than_one_household_per_housing_unit"]);
    }

    #[test]
    fn schema_yaml_round_trip() {
        let schema = CensusSchema::default_variables();
        let f = write_file(&schema.to_yaml());
        assert_eq!(CensusSchema::from_yaml_path(f.path()).unwrap(), schema);
    }

    #[test]
    fn duplicate_schema_names_rejected() {
        let mut schema = small_schema();
        schema.variables.push(schema.variables[0].clone());
        let f = write_file("household_id,block_id\n");
        assert!(matches!(parse_census(f.path(), &schema), Err(ParseError::Format { .. })));
    }

    #[test]
    fn census_round_trip() {
        let schema = small_schema();
        let f = write_file(
            "household_id,block_id,access_water,pct_members_not_sick\nh1,b1,yes,40.5\nh2,b1,no,\nh3,b2,,12\n",
        );
        let records = parse_census(f.path(), &schema).unwrap();
        let mut buf = Vec::new();
        write_census_csv(&mut buf, &schema, &records).unwrap();
        let f2 = write_file(std::str::from_utf8(&buf).unwrap());
        assert_eq!(parse_census(f2.path(), &schema).unwrap(), records);
    }
}
