//! Simulation dataset: embedded rows, CSV I/O and the preprocessing pipeline
//! (ordinal label codes, z-scoring, seeded train/test split).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::Topology;

pub const COLUMNS: [&str; 6] = [
    "Lattice Type",
    "Thickness (mm)",
    "Young Modulus of Alloy (GPa)",
    "Poisson Ratio",
    "Conductivity of Alloy (W/m.K)",
    "Young Modulus of Architected Material (GPa)",
];

pub const N_FEATURES: usize = 5;

pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["lattice_type", "thickness", "young_modulus", "poisson_ratio", "conductivity"];

const EMBEDDED_CSV: &str = include_str!("../data/lattice_moduli.csv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub lattice_type: String,
    pub thickness: f64,
    pub alloy_young_modulus: f64,
    pub poisson_ratio: f64,
    pub conductivity: f64,
    pub target_young_modulus: f64,
}

impl SampleRow {
    pub fn topology(&self) -> Option<Topology> {
        Topology::from_label(&self.lattice_type)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<SampleRow>,
}

impl Dataset {
    pub fn new(rows: Vec<SampleRow>) -> Self {
        Dataset { rows }
    }

    pub fn rows(&self) -> &[SampleRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target_young_modulus).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<SampleRow> {
        indices.iter().map(|&i| self.rows[i].clone()).collect()
    }

    pub fn to_csv(&self) -> String {
        serialize_csv(self)
    }
}

/// The 110 simulation rows, parsed once.
pub fn embedded_dataset() -> Dataset {
    static CACHE: OnceLock<Dataset> = OnceLock::new();
    CACHE
        .get_or_init(|| parse_csv(EMBEDDED_CSV).expect("embedded dataset is well formed"))
        .clone()
}

/// Raw text of the embedded dataset.
pub fn embedded_csv() -> &'static str {
    EMBEDDED_CSV
}

/// Parses the six-column schema. Columns are matched by header name; `row`
/// in parse errors is the 1-based data row (the header is row 0).
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse { row: 0, column: String::new(), message: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let present: BTreeSet<&str> = header.iter().map(String::as_str).collect();
    let missing: Vec<String> =
        COLUMNS.iter().filter(|c| !present.contains(*c)).map(|c| c.to_string()).collect();
    let mut extra: Vec<String> =
        header.iter().filter(|h| !COLUMNS.contains(&h.as_str())).cloned().collect();
    if present.len() != header.len() {
        extra.push("<duplicate column>".into());
    }
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Schema { missing, extra });
    }
    let position: Vec<usize> =
        COLUMNS.iter().map(|c| header.iter().position(|h| h == c).expect("checked above")).collect();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record =
            record.map_err(|e| Error::Parse { row, column: String::new(), message: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let number = |c: usize| -> Result<f64> {
            let raw = record[position[c]].trim();
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                row,
                column: COLUMNS[c].to_string(),
                message: format!("'{raw}' is not a finite decimal number"),
            })
        };
        rows.push(SampleRow {
            lattice_type: record[position[0]].trim().to_string(),
            thickness: number(1)?,
            alloy_young_modulus: number(2)?,
            poisson_ratio: number(3)?,
            conductivity: number(4)?,
            target_young_modulus: number(5)?,
        });
    }
    Ok(Dataset { rows })
}

/// Writes the schema header and rows; numbers use the shortest decimal that
/// round-trips, which reproduces the embedded strings exactly.
pub fn serialize_csv(dataset: &Dataset) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(COLUMNS).expect("write to memory");
    for r in &dataset.rows {
        writer
            .write_record([
                r.lattice_type.clone(),
                r.thickness.to_string(),
                r.alloy_young_modulus.to_string(),
                r.poisson_ratio.to_string(),
                r.conductivity.to_string(),
                r.target_young_modulus.to_string(),
            ])
            .expect("write to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

/// Fitted encoder and scaler. Codes follow the byte order of the labels seen
/// in training; scaling uses the population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub category_codes: BTreeMap<String, usize>,
    pub feature_means: [f64; N_FEATURES],
    pub feature_stds: [f64; N_FEATURES],
}

pub fn fit_preprocess(train_rows: &[SampleRow]) -> Result<PreprocessState> {
    if train_rows.is_empty() {
        return Err(invalid("cannot fit preprocessing on an empty training set"));
    }
    let labels: BTreeSet<&str> = train_rows.iter().map(|r| r.lattice_type.as_str()).collect();
    let category_codes: BTreeMap<String, usize> =
        labels.into_iter().enumerate().map(|(i, l)| (l.to_string(), i)).collect();
    let encoded: Vec<[f64; N_FEATURES]> =
        train_rows.iter().map(|r| raw_features(&category_codes, r)).collect::<Result<_>>()?;

    let n = encoded.len() as f64;
    let mut feature_means = [0.0; N_FEATURES];
    let mut feature_stds = [0.0; N_FEATURES];
    for c in 0..N_FEATURES {
        let mean = encoded.iter().map(|x| x[c]).sum::<f64>() / n;
        let var = encoded.iter().map(|x| (x[c] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        feature_means[c] = mean;
        feature_stds[c] = if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 };
    }
    Ok(PreprocessState { category_codes, feature_means, feature_stds })
}

fn raw_features(codes: &BTreeMap<String, usize>, row: &SampleRow) -> Result<[f64; N_FEATURES]> {
    let code = codes.get(&row.lattice_type).ok_or_else(|| Error::UnknownLabel {
        label: row.lattice_type.clone(),
        known: codes.keys().cloned().collect(),
    })?;
    Ok([*code as f64, row.thickness, row.alloy_young_modulus, row.poisson_ratio, row.conductivity])
}

impl PreprocessState {
    pub fn known_labels(&self) -> Vec<String> {
        self.category_codes.keys().cloned().collect()
    }

    /// Encoded but unscaled feature vector.
    pub fn encode(&self, row: &SampleRow) -> Result<[f64; N_FEATURES]> {
        raw_features(&self.category_codes, row)
    }

    pub fn transform_row(&self, row: &SampleRow) -> Result<Vec<f64>> {
        let raw = self.encode(row)?;
        Ok((0..N_FEATURES).map(|c| (raw[c] - self.feature_means[c]) / self.feature_stds[c]).collect())
    }
}

pub fn apply_preprocess(state: &PreprocessState, rows: &[SampleRow]) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| state.transform_row(r)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Shuffles `0..n` with ChaCha8 seeded from `seed` (Fisher-Yates via
/// `rand::seq::SliceRandom`); the first `round(test_fraction * n)` indices
/// form the test set.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(invalid(format!("a {test_fraction} split of {n} rows leaves an empty side")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order[..n_test].to_vec();
    let train = order[n_test..].to_vec();
    Ok(SplitIndices { train, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(d: &Dataset, label: &str, t: f64, e: f64) -> f64 {
        d.rows()
            .iter()
            .find(|r| r.lattice_type == label && r.thickness == t && r.alloy_young_modulus == e)
            .map(|r| r.target_young_modulus)
            .unwrap()
    }

    #[test]
    fn embedded_rows() {
        let d = embedded_dataset();
        assert_eq!(d.len(), 110);
        assert_eq!(d.rows().iter().filter(|r| r.alloy_young_modulus == 208.0).count(), 55);
        assert_eq!(find(&d, "Simple Cubic", 0.1, 208.0), 0.0869701);
        assert_eq!(find(&d, "Diamond", 0.1, 138.8), 0.000279763);
        let ti = d.rows().iter().find(|r| r.alloy_young_modulus == 138.8).unwrap();
        assert_eq!(ti.poisson_ratio, 0.342);
        assert!(d.rows().iter().all(|r| r.topology().is_some()));
        assert!(d.rows().iter().all(|r| r.target_young_modulus > 0.0));
        for t in [0.1, 0.2, 0.3, 0.4, 0.5] {
            assert_eq!(d.rows().iter().filter(|r| r.thickness == t).count(), 22);
        }
    }

    #[test]
    fn target_checksum() {
        // exact decimal sum of the printed targets is 1092.142182533
        let s: f64 = embedded_dataset().targets().iter().sum();
        assert!((s - 1092.142182533).abs() < 1e-9);
    }

    #[test]
    fn serialization_reproduces_embedded_text() {
        assert_eq!(embedded_dataset().to_csv(), EMBEDDED_CSV);
        assert_eq!(parse_csv(&embedded_dataset().to_csv()).unwrap(), embedded_dataset());
    }

    #[test]
    fn handwritten_fixture() {
        let text = format!(
            "{}\nOctet,0.25,100,0.3,12.5,1.5e-3\nMade Up,1,2,-0.1,0,42\n",
            COLUMNS.join(",")
        );
        let d = parse_csv(&text).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(
            d.rows()[0],
            SampleRow {
                lattice_type: "Octet".into(),
                thickness: 0.25,
                alloy_young_modulus: 100.0,
                poisson_ratio: 0.3,
                conductivity: 12.5,
                target_young_modulus: 0.0015,
            }
        );
        assert_eq!(d.rows()[1].lattice_type, "Made Up");
        assert!(d.rows()[1].topology().is_none());
        assert_eq!(d.rows()[1].poisson_ratio, -0.1);
    }

    #[test]
    fn missing_column_is_named() {
        let text = format!("{}\n", COLUMNS[..5].join(","));
        match parse_csv(&text) {
            Err(Error::Schema { missing, extra }) => {
                assert_eq!(missing, vec![COLUMNS[5].to_string()]);
                assert!(extra.is_empty());
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn extra_column_is_named() {
        let text = format!("{},Notes\n", COLUMNS.join(","));
        match parse_csv(&text) {
            Err(Error::Schema { missing, extra }) => {
                assert!(missing.is_empty());
                assert_eq!(extra, vec!["Notes".to_string()]);
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let text = format!("{}\nOctet,0.1,208,0.28,9.7,1\nOctet,thin,208,0.28,9.7,1\n", COLUMNS.join(","));
        match parse_csv(&text) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, COLUMNS[1]);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn label_codes_are_lexicographic() {
        let state = fit_preprocess(embedded_dataset().rows()).unwrap();
        let expected = [
            "Body Centred Cubic",
            "Diamond",
            "FCC Foam",
            "Face Centred Cubic",
            "Hexagonal Honeycomb",
            "Iso Truss",
            "Kelvin Cell",
            "Octet",
            "Re entrant Honeycomb",
            "Simple Cubic",
            "Triangular Honeycomb",
        ];
        for (code, label) in expected.iter().enumerate() {
            assert_eq!(state.category_codes[*label], code);
        }
    }

    #[test]
    fn training_columns_are_standardized() {
        let d = embedded_dataset();
        let split = train_test_split(d.len(), 0.2, 3).unwrap();
        let train = d.subset(&split.train);
        let state = fit_preprocess(&train).unwrap();
        let x = apply_preprocess(&state, &train).unwrap();
        let n = x.len() as f64;
        for c in 0..N_FEATURES {
            let mean = x.iter().map(|r| r[c]).sum::<f64>() / n;
            let std = (x.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-9, "column {c} mean {mean}");
            assert!((std - 1.0).abs() < 1e-9, "column {c} std {std}");
        }
    }

    #[test]
    fn mean_row_maps_to_origin_and_constant_columns_pass() {
        let rows: Vec<SampleRow> = (0..4)
            .map(|i| SampleRow {
                lattice_type: "Octet".into(),
                thickness: 0.1 * (i + 1) as f64,
                alloy_young_modulus: 208.0,
                poisson_ratio: 0.28,
                conductivity: 9.7,
                target_young_modulus: 1.0,
            })
            .collect();
        let state = fit_preprocess(&rows).unwrap();
        assert_eq!(state.feature_stds[2], 1.0);
        let mean_row = SampleRow { thickness: state.feature_means[1], ..rows[0].clone() };
        let z = state.transform_row(&mean_row).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12), "{z:?}");
    }

    #[test]
    fn unknown_label_lists_known_ones() {
        let state = fit_preprocess(embedded_dataset().rows()).unwrap();
        let row = SampleRow { lattice_type: "Gyroid".into(), ..embedded_dataset().rows()[0].clone() };
        match state.transform_row(&row) {
            Err(Error::UnknownLabel { known, .. }) => assert_eq!(known.len(), 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(matches!(fit_preprocess(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let a = train_test_split(110, 0.2, 0).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (88, 22));
        assert_eq!(a, train_test_split(110, 0.2, 0).unwrap());
        let b = train_test_split(110, 0.2, 1).unwrap();
        assert_ne!(a.test, b.test);
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..110).collect::<Vec<_>>());
    }

    #[test]
    fn split_fraction_out_of_range() {
        for f in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(train_test_split(110, f, 0).is_err());
        }
    }

    mod properties {
        use super::super::*;
        use proptest::prelude::*;

        fn row(label: &str, v: [f64; 4]) -> SampleRow {
            SampleRow {
                lattice_type: label.into(),
                thickness: v[0],
                alloy_young_modulus: v[1],
                poisson_ratio: v[2],
                conductivity: v[3],
                target_young_modulus: 1.0,
            }
        }

        proptest! {
            #[test]
            fn transform_is_affine_per_column(
                fit in prop::collection::vec(prop::array::uniform4(-100f64..100.0), 3..12),
                a in prop::array::uniform4(-100f64..100.0),
                b in prop::array::uniform4(-100f64..100.0),
                alpha in -3f64..3.0,
            ) {
                let labels = ["Octet", "Diamond", "Kelvin Cell"];
                let rows: Vec<SampleRow> =
                    fit.iter().enumerate().map(|(i, v)| row(labels[i % 3], *v)).collect();
                let state = fit_preprocess(&rows).unwrap();
                let beta = 1.0 - alpha;
                let mix: [f64; 4] = std::array::from_fn(|c| alpha * a[c] + beta * b[c]);
                let out = apply_preprocess(&state, &[row("Octet", a), row("Octet", b), row("Octet", mix)]).unwrap();
                for c in 0..N_FEATURES {
                    let expected = alpha * out[0][c] + beta * out[1][c];
                    let scale = 1.0 + out[0][c].abs() + out[1][c].abs();
                    prop_assert!((out[2][c] - expected).abs() <= 1e-9 * scale * (1.0 + alpha.abs()));
                }
            }
        }
    }
}
