//! Run directories, manifests and subcommand execution.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use distreg_core::embeddings::Embedder;
use distreg_core::experiments::{run_bias_probe, run_ecological_experiment, run_gmm_experiment, run_rate_experiment};
use distreg_core::io::{fmt_f64, load_dataset, load_samples, write_embeddings};
use distreg_core::kernel_ridge::{cross_validate, fit, KernelConfig, RidgeModel};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{self, Payload, RunConfig};
use crate::CliError;

pub struct Options {
    pub config: PathBuf,
    pub overrides: Vec<String>,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    payload: &'a str,
    config_hash: &'a str,
    created_unix: u64,
    threads: usize,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    seeds: Vec<u64>,
    resolved_config: &'a str,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::from(distreg_core::Error::Io { path: path.to_path_buf(), source: e })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Files written into the run directory, in order.
struct Outputs {
    dir: PathBuf,
    names: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.names.push(name.to_owned());
        Ok(())
    }
}

fn create_run_dir(out: &Path, hash: &str, stamp: u64) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let base = format!("{hash}-{stamp}");
    for k in 0.. {
        let name = if k == 0 { base.clone() } else { format!("{base}-{k}") };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_err(&dir, e)),
        }
    }
    unreachable!("unbounded search")
}

pub fn execute(command: &str, opts: Options) -> Result<PathBuf, CliError> {
    if let Some(t) = opts.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    let text = fs::read_to_string(&opts.config).map_err(|e| io_err(&opts.config, e))?;
    let payload = config::parse(&text, &opts.overrides)?;
    let expected_ok = match command {
        "experiment" => payload.is_experiment(),
        other => payload.table_name() == other,
    };
    if !expected_ok {
        return Err(CliError::usage(format!(
            "subcommand {command} does not match the [{}] table in {}",
            payload.table_name(),
            opts.config.display()
        )));
    }
    let base = opts
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let resolved = toml::to_string(&RunConfig::from_payload(&payload))
        .map_err(|e| CliError::usage(format!("cannot echo config: {e}")))?;
    let hash = hex(&Sha256::digest(resolved.as_bytes())[..8]);
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());

    let dir = create_run_dir(&opts.out, &hash, stamp)?;
    let mut outputs = Outputs { dir: dir.clone(), names: Vec::new() };
    let result = (|| -> Result<(Vec<PathBuf>, Vec<u64>), CliError> {
        outputs.write("config.toml", &resolved)?;
        dispatch(&payload, &base, &mut outputs)
    })();
    let (inputs, seeds) = match result {
        Ok(v) => v,
        Err(e) => {
            let _ = fs::remove_dir_all(&dir);
            return Err(e);
        }
    };
    let inputs = inputs
        .iter()
        .map(|p| {
            Ok(InputRecord {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        command,
        payload: payload.table_name(),
        config_hash: &hash,
        created_unix: stamp,
        threads: rayon::current_num_threads(),
        inputs,
        outputs: outputs.names.clone(),
        seeds,
        resolved_config: &resolved,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::usage(e.to_string()))?;
    outputs.write("MANIFEST.json", text)?;
    Ok(dir)
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::usage(e.to_string()))
}

/// Runs the payload; returns input files read and seeds used.
fn dispatch(payload: &Payload, base: &Path, out: &mut Outputs) -> Result<(Vec<PathBuf>, Vec<u64>), CliError> {
    let at = |p: &Path| base.join(p);
    match payload {
        Payload::Embed(p) => {
            let samples = at(&p.samples);
            let (dim, dists) = load_samples(&samples)?;
            let cfg = p.embedding.resolve(dim, base)?;
            let embedder = Embedder::new(&cfg, dim)?;
            let vectors = embedder.embed_all(&dists)?;
            let ids: Vec<&str> = dists.iter().map(|d| d.group_id()).collect();
            let mut buf = Vec::new();
            write_embeddings(&mut buf, &ids, &vectors).map_err(|e| io_err(&out.dir.join(&p.output), e))?;
            out.write(&p.output, buf)?;
            out.write(&format!("{}.fingerprint", p.output), format!("{}\n", embedder.fingerprint()))?;
            let mut inputs = vec![samples];
            inputs.extend(p.embedding.input_files().iter().map(|f| at(f)));
            Ok((inputs, p.embedding.seeds()))
        }
        Payload::Fit(p) => {
            let (samples, labels) = (at(&p.samples), at(&p.labels));
            let data = load_dataset(&samples, &labels)?;
            let cfg = p.embedding.resolve(data.dim(), base)?;
            let embedder = Embedder::new(&cfg, data.dim())?;
            let x = embedder.embed_all(data.distributions())?;
            let mut seeds = p.embedding.seeds();
            let (lambda, length_scale) = match &p.cv {
                Some(cv) => {
                    let r = cross_validate(&x, data.labels(), cv)?;
                    let mut table = String::from("lambda,length_scale,mse\n");
                    for e in &r.table {
                        table += &format!("{},{},{}\n", fmt_f64(e.lambda), fmt_f64(e.length_scale), fmt_f64(e.mse));
                    }
                    out.write("cv.csv", table)?;
                    seeds.push(cv.seed);
                    (r.lambda, r.length_scale)
                }
                None => (
                    p.lambda.ok_or_else(|| CliError::usage("fit needs lambda or a cv table"))?,
                    p.length_scale,
                ),
            };
            let model = fit(&x, data.labels(), lambda, KernelConfig::new(length_scale)?)?;
            out.write("model.json", model.to_json()? + "\n")?;
            let mut inputs = vec![samples, labels];
            inputs.extend(p.embedding.input_files().iter().map(|f| at(f)));
            Ok((inputs, seeds))
        }
        Payload::Predict(p) => {
            let (model_path, samples) = (at(&p.model), at(&p.samples));
            let text = fs::read_to_string(&model_path).map_err(|e| io_err(&model_path, e))?;
            let model = RidgeModel::from_json(&text)?;
            let (dim, dists) = load_samples(&samples)?;
            let cfg = p.embedding.resolve(dim, base)?;
            let embedder = Embedder::new(&cfg, dim)?;
            if embedder.fingerprint() != model.fingerprint() {
                return Err(distreg_core::Error::FingerprintMismatch {
                    expected: model.fingerprint().to_string(),
                    found: embedder.fingerprint().to_string(),
                }
                .into());
            }
            let x = embedder.embed_all(&dists)?;
            let pred = model.predict_batch(&x)?;
            let mut csv = String::from("group_id,prediction\n");
            for (d, y) in dists.iter().zip(&pred) {
                csv += &format!("{},{}\n", d.group_id(), fmt_f64(*y));
            }
            out.write("predictions.csv", csv)?;
            let mut inputs = vec![model_path, samples];
            inputs.extend(p.embedding.input_files().iter().map(|f| at(f)));
            Ok((inputs, p.embedding.seeds()))
        }
        Payload::Rate(p) => {
            let report = run_rate_experiment(&p.resolve(base)?)?;
            out.write("rate_cells.csv", report.cells_csv())?;
            out.write("rate_replicates.csv", report.replicates_csv())?;
            out.write("summary.json", json(&report)?)?;
            let mut seeds = vec![p.seed];
            seeds.extend(p.embedding.seeds());
            Ok((files(&p.embedding, base), seeds))
        }
        Payload::Gmm(p) => {
            let report = run_gmm_experiment(&p.resolve(base)?)?;
            out.write("gmm_cells.csv", report.cells_csv())?;
            out.write("gmm_replicates.csv", report.replicates_csv())?;
            out.write("summary.json", json(&report)?)?;
            let mut seeds = vec![p.seed, p.cv.seed];
            seeds.extend(p.embedding.seeds());
            Ok((files(&p.embedding, base), seeds))
        }
        Payload::Bias(p) => {
            let report = run_bias_probe(&p.resolve(base)?)?;
            out.write("bias.csv", report.csv())?;
            out.write("summary.json", json(&report)?)?;
            let mut seeds = vec![p.seed];
            seeds.extend(p.embedding.seeds());
            Ok((files(&p.embedding, base), seeds))
        }
        Payload::Eco(c) => {
            let report = run_ecological_experiment(c)?;
            out.write("eco_scores.csv", report.scores_csv())?;
            out.write("eco_effects.csv", report.effects_csv())?;
            out.write("summary.json", json(&report)?)?;
            Ok((Vec::new(), vec![c.seed, c.cv.seed]))
        }
    }
}

fn files(embedding: &config::EmbeddingSpec, base: &Path) -> Vec<PathBuf> {
    embedding.input_files().iter().map(|f| base.join(f)).collect()
}
