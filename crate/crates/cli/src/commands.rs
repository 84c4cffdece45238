//! Subcommand implementations. Each takes plain arguments so integration
//! tests can call them without going through argument parsing.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabdiff::data::schema::TableSchema;
use tabdiff::data::table::{load_csv, TableData};
use tabdiff::diffusion::model::synthesize_table;
use tabdiff::federation::{run_local_baseline, FederationState};
use tabdiff::metrics::{evaluate, heatmap_eval};

use crate::checkpoint::{Checkpoint, CheckpointKind, ClientEntry};
use crate::config::RunConfig;
use crate::pipeline::{write_history_csv, write_table_csv, Prepared};
use crate::toydata;

fn load_prepared(config_path: &Path, overrides: &[String]) -> Result<Prepared> {
    let config = RunConfig::load(config_path, overrides)?;
    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Prepared::load(config, &base)
}

/// Validates the data pipeline and writes the client partition manifest.
pub fn prepare(config_path: &Path, overrides: &[String]) -> Result<()> {
    let prepared = load_prepared(config_path, overrides)?;
    let out = prepared.config.output_dir();
    std::fs::create_dir_all(&out)?;
    let manifest = out.join("partition.txt");
    let mut f = std::fs::File::create(&manifest)
        .with_context(|| format!("creating {}", manifest.display()))?;
    let split = prepared.config.split_column(&prepared.schema)?;
    let col = prepared.schema.column_index(split).expect("validated split column");
    writeln!(f, "split column: {split}")?;
    for (i, rows) in prepared.partition.client_rows.iter().enumerate() {
        let category = rows
            .first()
            .map(|&r| prepared.data.row(r)[col].as_cat().expect("categorical split"))
            .map(|id| prepared.data.category_name(col, id))
            .unwrap_or("<empty>");
        writeln!(f, "client {i}: {} rows ({category})", rows.len())?;
    }
    writeln!(f, "dropped: {} rows", prepared.partition.dropped_row_count)?;

    println!(
        "{} rows, {} columns, {} clients ({} rows dropped), encoded dim {}",
        prepared.data.n_rows(),
        prepared.schema.columns.len(),
        prepared.partition.n_clients(),
        prepared.partition.dropped_row_count,
        prepared.codec.encoded_dim(&prepared.schema),
    );
    println!("wrote {}", manifest.display());
    Ok(())
}

/// Trains the federated model (or a standalone per-client baseline) and
/// writes checkpoints plus the round-loss history.
pub fn train(
    config_path: &Path,
    overrides: &[String],
    resume: Option<&Path>,
    local: Option<usize>,
) -> Result<()> {
    let prepared = load_prepared(config_path, overrides)?;
    let out = prepared.config.output_dir();
    std::fs::create_dir_all(&out)?;
    let fc = prepared.federation_config();

    if let Some(id) = local {
        if resume.is_some() {
            bail!("--resume is only supported for federated training");
        }
        if id >= prepared.partition.n_clients() {
            bail!("client {id} out of range: {} clients", prepared.partition.n_clients());
        }
        let sets = prepared.client_sets()?;
        let total_steps = fc.rounds * fc.client_steps;
        let (model, losses) =
            run_local_baseline(prepared.setup()?, &sets[id].0, &fc, id, total_steps)?;
        let loss_path = out.join(format!("local_{id}_losses.csv"));
        let mut f = std::fs::File::create(&loss_path)?;
        writeln!(f, "step,loss")?;
        for (i, l) in losses.iter().enumerate() {
            writeln!(f, "{i},{l}")?;
        }
        let ckpt = prepared.checkpoint_with(
            CheckpointKind::Local(id as u32),
            &model.params,
            Vec::<ClientEntry>::new(),
            fc.rounds,
            Vec::new(),
        );
        let path = out.join(format!("local_{id}.ckpt"));
        ckpt.save(&path)?;
        println!(
            "local client {id}: {total_steps} steps, final loss {:.6}",
            losses.last().copied().unwrap_or(f64::NAN)
        );
        println!("saved {}", path.display());
        return Ok(());
    }

    let mut state: FederationState = match resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let state = prepared.restore(&ckpt)?;
            println!("resumed from {} at round {}", path.display(), state.round);
            state
        }
        None => FederationState::init(prepared.setup()?, prepared.client_sets()?, &fc)?,
    };

    let history_path = out.join("history.csv");
    let snapshots = out.join("snapshots");
    let snapshot_every = prepared.config.federation.snapshot_every;
    while state.round < fc.rounds {
        state.run_round(&fc)?;
        write_history_csv(&state.history, state.clients.len(), &history_path)?;
        let done = state.round;
        let loss = state.history.last().expect("round just ran").aggregate_loss;
        println!("round {done}/{} loss {loss:.6}", fc.rounds);
        if done % snapshot_every == 0 && done < fc.rounds {
            prepared
                .checkpoint(&state)
                .save(&snapshots.join(format!("round_{done:05}.ckpt")))?;
        }
    }
    write_history_csv(&state.history, state.clients.len(), &history_path)?;
    let path = out.join("model.ckpt");
    prepared.checkpoint(&state).save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}

/// Draws synthetic rows from a checkpoint and writes them as CSV.
pub fn sample(checkpoint: &Path, rows: usize, seed: u64, output: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.model()?;
    let codec = ckpt.codec()?;
    let schema = ckpt.schema()?;
    let vocabs = ckpt.full_vocabs()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = synthesize_table(&model, &codec, &schema, &vocabs, rows, &mut rng)?;
    write_table_csv(&table, output)?;
    println!("wrote {rows} rows to {}", output.display());
    Ok(())
}

/// Scores a synthetic table against real data and writes a JSON report.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cmd(
    schema_path: &Path,
    real_path: &Path,
    synth_path: &Path,
    label_column: Option<&str>,
    no_utility: bool,
    max_pairs: usize,
    output: Option<&Path>,
) -> Result<()> {
    let schema = TableSchema::load(schema_path)?;
    let real = load_csv(real_path, &schema).context("loading real csv")?;
    let synth = load_csv(synth_path, &schema).context("loading synthetic csv")?;
    let label = if no_utility {
        None
    } else {
        let resolved = label_column
            .or(schema.label_column.as_deref())
            .or(schema.split_column.as_deref());
        if resolved.is_none() {
            eprintln!("note: no label column available, skipping utility");
        }
        resolved
    };
    let report = evaluate(&real, &synth, label, max_pairs)?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = output {
        std::fs::write(path, &json)?;
        println!("wrote {}", path.display());
    } else {
        println!("{json}");
    }
    let utility = report
        .utility
        .as_ref()
        .map(|u| format!("{:.4}", u.mean))
        .unwrap_or_else(|| "skipped".to_string());
    println!(
        "fidelity {:.4}  utility {utility}  coverage {:.4}  dcr {:.4}",
        report.fidelity.omega, report.coverage.mean, report.privacy.median_dcr
    );
    Ok(())
}

/// Cross-client heatmaps: every listed model scored against every split-column
/// subset of the real data. `models` entries are `name=path.csv`.
pub fn report(
    schema_path: &Path,
    real_path: &Path,
    models: &[String],
    split_column: Option<&str>,
    output: &Path,
) -> Result<()> {
    if models.is_empty() {
        bail!("report needs at least one --model name=path.csv");
    }
    let schema = TableSchema::load(schema_path)?;
    let real = load_csv(real_path, &schema).context("loading real csv")?;
    let split = split_column
        .or(schema.split_column.as_deref())
        .ok_or_else(|| anyhow::anyhow!("no split column: pass --split-column or set it in the schema"))?;
    let col = schema
        .column_index(split)
        .ok_or_else(|| anyhow::anyhow!("split column {split} is not a schema column"))?;

    let ids = real.cat_column(col)?;
    let mut subsets: Vec<(String, TableData)> = Vec::new();
    for cat in 0..real.vocab(col).len() {
        let rows: Vec<usize> = ids
            .iter()
            .enumerate()
            .filter(|(_, &id)| id as usize == cat)
            .map(|(i, _)| i)
            .collect();
        if !rows.is_empty() {
            subsets.push((real.category_name(col, cat as u32).to_string(), real.subset(&rows)));
        }
    }

    let mut model_tables: Vec<(String, TableData)> = Vec::new();
    for spec in models {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("model '{spec}' is not of the form name=path.csv"))?;
        let table = load_csv(path, &schema)
            .with_context(|| format!("loading model table {path}"))?;
        model_tables.push((name.to_string(), table));
    }

    let heatmap = heatmap_eval(&model_tables, &subsets)?;
    std::fs::create_dir_all(output)?;
    for (name, matrix) in [
        ("fidelity", &heatmap.fidelity),
        ("coverage", &heatmap.coverage),
        ("privacy", &heatmap.privacy),
    ] {
        let path = output.join(format!("{name}.csv"));
        let f = std::fs::File::create(&path)?;
        matrix.write_csv(f)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Generates the deterministic toy dataset plus its schema file.
pub fn toydata_cmd(rows: usize, seed: u64, output: &Path) -> Result<()> {
    std::fs::create_dir_all(output)?;
    let table = toydata::toy_table(rows, seed);
    let csv_path = output.join("toy.csv");
    write_table_csv(&table, &csv_path)?;
    let schema_path = output.join("schema.toml");
    std::fs::write(&schema_path, toydata::toy_schema().to_toml())?;
    println!("wrote {} and {}", csv_path.display(), schema_path.display());
    Ok(())
}

/// Resolves an output path for tests and callers who need it.
pub fn default_checkpoint_path(config: &RunConfig) -> PathBuf {
    config.output_dir().join("model.ckpt")
}
