//! Utility: train classifiers on synthetic rows, test them on real rows.
//!
//! The score is the mean test accuracy over the classifier suite — synthetic
//! data is useful to the extent that models trained on it transfer to real
//! data.

use serde::Serialize;

use crate::data::schema::ColumnKind;
use crate::data::table::TableData;
use crate::error::{Error, Result};
use crate::metrics::align::{align_cats, check_matched_schemas};
use crate::metrics::classifiers::{predict, ClassifierKind, Design, DEFAULT_CLASSIFIERS};

#[derive(Debug, Clone, Serialize)]
pub struct ClassifierScore {
    pub kind: ClassifierKind,
    pub accuracy: f64,
    /// Set when the synthetic label column had a single class and the
    /// classifier degenerated to a majority-class predictor.
    pub single_class_fallback: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UtilityReport {
    pub per_classifier: Vec<ClassifierScore>,
    pub mean: f64,
    pub label_column: String,
}

fn build_designs(
    synth_train: &TableData,
    real_test: &TableData,
    label_col: usize,
) -> Result<(Design, Design)> {
    let mut train = Design { dense: vec![Vec::new(); synth_train.n_rows()], numeric: vec![Vec::new(); synth_train.n_rows()], cats: vec![Vec::new(); synth_train.n_rows()], cat_sizes: Vec::new() };
    let mut test = Design { dense: vec![Vec::new(); real_test.n_rows()], numeric: vec![Vec::new(); real_test.n_rows()], cats: vec![Vec::new(); real_test.n_rows()], cat_sizes: Vec::new() };
    for (c, col) in real_test.schema.columns.iter().enumerate() {
        if c == label_col {
            continue;
        }
        match col.kind {
            ColumnKind::Numeric => {
                for (d, &v) in train.dense.iter_mut().zip(synth_train.numeric_column(c)?.iter()) {
                    d.push(v);
                }
                for (d, &v) in train.numeric.iter_mut().zip(synth_train.numeric_column(c)?.iter()) {
                    d.push(v);
                }
                for (d, &v) in test.dense.iter_mut().zip(real_test.numeric_column(c)?.iter()) {
                    d.push(v);
                }
                for (d, &v) in test.numeric.iter_mut().zip(real_test.numeric_column(c)?.iter()) {
                    d.push(v);
                }
            }
            ColumnKind::Categorical => {
                let a = align_cats(real_test, synth_train, c)?;
                let one_hot = |design: &mut Design, ids: &[u32]| {
                    for ((dense, cats), &id) in
                        design.dense.iter_mut().zip(design.cats.iter_mut()).zip(ids)
                    {
                        let base = dense.len();
                        dense.resize(base + a.union_size, 0.0);
                        dense[base + id as usize] = 1.0;
                        cats.push(id);
                    }
                };
                one_hot(&mut train, &a.synth_ids);
                one_hot(&mut test, &a.real_ids);
                train.cat_sizes.push(a.union_size);
                test.cat_sizes.push(a.union_size);
            }
        }
    }
    Ok((train, test))
}

pub fn utility(
    synth_train: &TableData,
    real_test: &TableData,
    label_column: &str,
    classifiers: &[ClassifierKind],
) -> Result<UtilityReport> {
    check_matched_schemas(real_test, synth_train)?;
    if synth_train.rows().is_empty() || real_test.rows().is_empty() {
        return Err(Error::config("utility over an empty table"));
    }
    let label_col = real_test
        .schema
        .column_index(label_column)
        .ok_or_else(|| Error::UnknownColumn(label_column.to_string()))?;
    if real_test.schema.columns[label_col].kind != ColumnKind::Categorical {
        return Err(Error::config(format!(
            "label column '{label_column}' must be categorical"
        )));
    }
    if real_test.schema.columns.len() < 2 {
        return Err(Error::config("utility needs at least one feature column"));
    }

    let labels = align_cats(real_test, synth_train, label_col)?;
    let n_classes = labels.union_size;
    let mut train_y: Vec<usize> = labels.synth_ids.iter().map(|&i| i as usize).collect();
    let test_y: Vec<usize> = labels.real_ids.iter().map(|&i| i as usize).collect();
    let (mut train, test) = build_designs(synth_train, real_test, label_col)?;

    // Canonicalize the training order so the score depends on the synthetic
    // table as a multiset of rows, not on how it happened to be sorted.
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&a, &b| {
        train.dense[a]
            .iter()
            .zip(&train.dense[b])
            .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(train_y[a].cmp(&train_y[b]))
    });
    train.dense = order.iter().map(|&i| train.dense[i].clone()).collect();
    train.numeric = order.iter().map(|&i| train.numeric[i].clone()).collect();
    train.cats = order.iter().map(|&i| train.cats[i].clone()).collect();
    train_y = order.iter().map(|&i| train_y[i]).collect();

    let single_class = train_y.iter().all(|&y| y == train_y[0]);
    let mut per_classifier = Vec::new();
    for &kind in classifiers {
        let preds: Vec<usize> = if single_class {
            vec![train_y[0]; test.len()]
        } else {
            predict(kind, &train, &train_y, n_classes, &test)
        };
        let accuracy =
            preds.iter().zip(&test_y).filter(|(p, y)| p == y).count() as f64 / test_y.len() as f64;
        per_classifier.push(ClassifierScore { kind, accuracy, single_class_fallback: single_class });
    }
    let mean =
        per_classifier.iter().map(|c| c.accuracy).sum::<f64>() / per_classifier.len() as f64;
    Ok(UtilityReport { per_classifier, mean, label_column: label_column.to_string() })
}

/// Convenience wrapper running the full default suite.
pub fn utility_default(
    synth_train: &TableData,
    real_test: &TableData,
    label_column: &str,
) -> Result<UtilityReport> {
    utility(synth_train, real_test, label_column, &DEFAULT_CLASSIFIERS)
}
