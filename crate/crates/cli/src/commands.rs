use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use fbdeconv::deconvolve::{
    deconvolve_with, read_cache, truncated_svd, write_cache, write_cells_csv, write_spectrum_csv, CacheHeader,
    SvdOptions,
};
use fbdeconv::eval::{
    correlation, density_histogram, sweep_seeds, write_roc_csv, write_sweep_csv, PipelineParams, SweepParameter,
};
use fbdeconv::ratings::{center_and_normalize, read_ratings, DatasetSpec, Format, Preset, PRESETS};
use fbdeconv::scoring::{item_rank, score, write_ranking_csv, write_scores_csv, RansacParams, Scaling, ScoringParams};
use fbdeconv::synthetic::{simulate, SyntheticConfig};
use fbdeconv::{Deconvolution, Ratings};

use crate::args::{DeconvolveArgs, EvalArgs, Invocation, ReplayArgs, ScoreArgs, SimulateArgs};
use crate::error::CliError;
use crate::manifest::{Manifest, SweepManifest, MANIFEST_FILE};
use crate::output::{read_input, sha256_hex, Artifacts};

/// Input path to digest.
type Inputs = BTreeMap<String, String>;

pub fn run(invocation: Invocation, out: &Path) -> Result<(), CliError> {
    let (artifacts, inputs) = execute(&invocation)?;
    commit(invocation, artifacts, inputs, out)
}

fn commit(invocation: Invocation, mut artifacts: Artifacts, inputs: Inputs, out: &Path) -> Result<(), CliError> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        invocation,
        inputs,
        outputs: artifacts.digests(),
    };
    artifacts.add(MANIFEST_FILE, manifest.to_toml().into_bytes());
    artifacts.commit(out)?;
    for name in artifacts.names() {
        eprintln!("wrote {}", out.join(name).display());
    }
    Ok(())
}

pub fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let manifest = Manifest::load(&args.manifest)?;
    for (path, digest) in &manifest.inputs {
        let actual = sha256_hex(&read_input(Path::new(path))?);
        if &actual != digest {
            return Err(CliError::Data(format!("input {path} changed since the recorded run")));
        }
    }
    let (artifacts, inputs) = execute(&manifest.invocation)?;
    if args.verify {
        let produced = artifacts.digests();
        if produced != manifest.outputs {
            let differing: Vec<&str> = manifest
                .outputs
                .keys()
                .chain(produced.keys())
                .filter(|k| produced.get(*k) != manifest.outputs.get(*k))
                .map(String::as_str)
                .collect();
            return Err(CliError::Data(format!(
                "outputs differ from the recorded run: {differing:?}"
            )));
        }
    }
    let out = match &args.out {
        Some(o) => o.clone(),
        None => args
            .manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    commit(manifest.invocation, artifacts, inputs, &out)
}

fn execute(invocation: &Invocation) -> Result<(Artifacts, Inputs), CliError> {
    match invocation {
        Invocation::Simulate(a) => simulate_cmd(a),
        Invocation::Deconvolve(a) => deconvolve_cmd(a),
        Invocation::Score(a) => score_cmd(a),
        Invocation::Eval(a) => eval_cmd(a),
    }
}

fn synthetic_config(a: &SimulateArgs) -> SyntheticConfig {
    SyntheticConfig {
        n_users: a.users,
        n_items: a.items,
        gamma: a.gamma,
        epsilon: a.epsilon,
        e: a.e,
        r: a.r,
        iterations: a.iterations,
        seed: a.seed,
        scope: a.scope.into(),
        ..SyntheticConfig::default()
    }
}

fn simulate_cmd(a: &SimulateArgs) -> Result<(Artifacts, Inputs), CliError> {
    let data = simulate(&synthetic_config(a))?;
    let mut art = Artifacts::default();
    art.render("true.csv", |w| data.r_true.write_csv(w))?;
    art.render("observed.csv", |w| data.r_obs.write_csv(w))?;
    art.render("labels.csv", |w| data.write_labels_csv(w))?;

    let mut config = toml::to_string(a).expect("simulate arguments are serializable");
    writeln!(config, "\n[result]").unwrap();
    writeln!(config, "true_ratings = {}", data.r_true.nnz()).unwrap();
    writeln!(config, "observed_ratings = {}", data.r_obs.nnz()).unwrap();
    writeln!(config, "induced_ratings = {}", data.induced_count()).unwrap();
    writeln!(config, "true_effect = {}", data.true_effect()).unwrap();
    writeln!(
        config,
        "density_per_round = {:?}",
        data.rounds.iter().map(|r| r.density).collect::<Vec<_>>()
    )
    .unwrap();
    writeln!(
        config,
        "accepted_per_round = {:?}",
        data.rounds.iter().map(|r| r.accepted).collect::<Vec<_>>()
    )
    .unwrap();
    art.add("config.toml", config.into_bytes());
    Ok((art, Inputs::new()))
}

struct Prepared {
    ratings: Ratings,
    result: Deconvolution,
    requested_k: usize,
    input_digest: String,
    dropped_items: usize,
}

fn resolve_preset(name: &Option<String>) -> Result<Option<&'static Preset>, CliError> {
    match name {
        None => Ok(None),
        Some(n) => Preset::find(n).map(Some).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            CliError::Usage(format!("unknown dataset `{n}` (known: {})", known.join(", ")))
        }),
    }
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--alpha {alpha} must lie in (0, 1]")))
    }
}

fn cache_key(input_digest: &str, spec: &DatasetSpec) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(input_digest.as_bytes());
    h.update(spec.format.tag().as_bytes());
    h.update((spec.min_rpi as u64).to_le_bytes());
    if let Some((lo, hi)) = spec.scale {
        h.update(lo.to_le_bytes());
        h.update(hi.to_le_bytes());
    }
    h.finalize().into()
}

fn prepare(a: &DeconvolveArgs) -> Result<Prepared, CliError> {
    check_alpha(a.alpha)?;
    if a.k == Some(0) {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let preset = resolve_preset(&a.dataset)?;
    let format: Format = a
        .format
        .map(Into::into)
        .or(preset.map(|p| p.format))
        .unwrap_or(Format::Csv);
    let spec = DatasetSpec {
        format,
        min_rpi: a.min_rpi.or(preset.map(|p| p.min_rpi)).unwrap_or(1),
        scale: preset.and_then(|p| p.scale),
    };

    let bytes = read_input(&a.input)?;
    let input_digest = sha256_hex(&bytes);
    let ratings: Ratings = read_ratings(Cursor::new(bytes), &a.input, &spec)?;
    let normalized = center_and_normalize(&ratings)?;
    let full = normalized.n_users().min(normalized.n_columns());
    let requested_k = a.k.or(preset.map(|p| p.k)).unwrap_or(full);
    let k = if requested_k > full {
        eprintln!("warning: k = {requested_k} exceeds the {full} available dimensions; using {full}");
        full
    } else {
        requested_k
    };

    let opts = SvdOptions::with_seed(a.seed);
    let header = CacheHeader {
        rows: normalized.n_users() as u64,
        columns: normalized.n_columns() as u64,
        requested_k: k as u64,
        seed: a.seed,
        alpha: a.alpha,
        digest: cache_key(&input_digest, &spec),
    };
    let cache_file = a
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("{}-k{k}-s{}.svd", &hex::encode(header.digest)[..16], a.seed)));
    let cached = match &cache_file {
        Some(path) if path.exists() => match fs::File::open(path)
            .map_err(|e| e.to_string())
            .and_then(|f| read_cache(std::io::BufReader::new(f), &header).map_err(|e| e.to_string()))
        {
            Ok(hit) => hit,
            Err(e) => {
                eprintln!("warning: ignoring cache entry {}: {e}", path.display());
                None
            }
        },
        _ => None,
    };
    let spectrum = match cached {
        Some(s) => s,
        None => {
            let s = truncated_svd(&normalized.matrix, k, &opts)?;
            if let Some(path) = &cache_file {
                if let Err(e) = store_cache(path, &header, &s) {
                    eprintln!("warning: could not write cache entry {}: {e}", path.display());
                }
            }
            s
        }
    };
    if spectrum.rank_deficient() {
        eprintln!(
            "warning: requested k = {} but the matrix has numerical rank {}; using {}",
            spectrum.requested_k,
            spectrum.k(),
            spectrum.k()
        );
    }
    let dropped_items = normalized.dropped_items.len();
    let result = deconvolve_with(&normalized, spectrum, a.alpha)?;
    Ok(Prepared {
        ratings,
        result,
        requested_k,
        input_digest,
        dropped_items,
    })
}

fn store_cache(path: &Path, header: &CacheHeader, s: &fbdeconv::Spectrum) -> Result<(), String> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| e.to_string())?;
    write_cache(std::io::BufWriter::new(&mut tmp), header, s).map_err(|e| e.to_string())?;
    tmp.flush().map_err(|e| e.to_string())?;
    tmp.persist(path).map_err(|e| e.to_string())?;
    Ok(())
}

fn deconvolution_summary(p: &Prepared) -> String {
    let d = &p.result;
    let mut s = String::new();
    writeln!(s, "users = {}", p.ratings.n_users()).unwrap();
    writeln!(s, "items = {}", p.ratings.n_items()).unwrap();
    writeln!(s, "ratings = {}", p.ratings.nnz()).unwrap();
    writeln!(s, "retained_items = {}", d.retained_items.len()).unwrap();
    writeln!(s, "dropped_items = {}", p.dropped_items).unwrap();
    writeln!(s, "alpha = {:?}", d.alpha).unwrap();
    writeln!(s, "requested_k = {}", p.requested_k).unwrap();
    writeln!(s, "k = {}", d.spectrum.k()).unwrap();
    writeln!(s, "rank_deficient = {}", d.spectrum.k() < p.requested_k).unwrap();
    writeln!(s, "svd_residual = {:e}", d.spectrum.residual).unwrap();
    writeln!(s, "input_sha256 = \"{}\"", p.input_digest).unwrap();
    s
}

fn inputs_of(a: &DeconvolveArgs, p: &Prepared) -> Inputs {
    Inputs::from([(a.input.to_string_lossy().into_owned(), p.input_digest.clone())])
}

fn deconvolve_cmd(a: &DeconvolveArgs) -> Result<(Artifacts, Inputs), CliError> {
    let p = prepare(a)?;
    let mut art = Artifacts::default();
    art.render("cells.csv", |w| write_cells_csv(w, &p.result, &p.ratings))?;
    art.render("spectrum.csv", |w| write_spectrum_csv(w, &p.result))?;
    art.add(
        "summary.toml",
        format!("[deconvolution]\n{}", deconvolution_summary(&p)).into_bytes(),
    );
    Ok((art, inputs_of(a, &p)))
}

fn score_cmd(a: &ScoreArgs) -> Result<(Artifacts, Inputs), CliError> {
    if a.bins < 2 {
        return Err(CliError::Usage("--bins must be at least 2".into()));
    }
    let params = ScoringParams {
        ransac: RansacParams {
            iterations: a.ransac_iterations,
            threshold_fraction: a.ransac_threshold,
            min_points: a.min_points,
        },
        scaling: if a.per_item_scaling {
            Scaling::PerItem
        } else {
            Scaling::Global
        },
        seed: a.data.seed,
    };
    let p = prepare(&a.data)?;
    let report = score(&p.result, &params)?;
    let ranking = item_rank(&report.ratings);
    let pairs: Vec<(f64, f64)> = report.ratings.iter().map(|r| (r.observed, r.deconvolved)).collect();

    let mut art = Artifacts::default();
    art.render("scores.csv", |w| write_scores_csv(w, &report, &p.ratings))?;
    art.render("ranking.csv", |w| write_ranking_csv(w, &ranking, &p.ratings))?;
    art.render("spectrum.csv", |w| write_spectrum_csv(w, &p.result))?;
    art.render("histogram.csv", |w| density_histogram(&pairs, a.bins)?.write_csv(w))?;

    let mut s = String::new();
    writeln!(s, "[score]").unwrap();
    writeln!(s, "rs_score = {:?}", report.rs.value).unwrap();
    writeln!(s, "n_scored = {}", report.rs.n_scored).unwrap();
    writeln!(s, "n_nonzero = {}", report.rs.n_nonzero).unwrap();
    writeln!(s, "n_skipped = {}", report.rs.n_skipped).unwrap();
    writeln!(
        s,
        "skipped_items = {}",
        report.fits.iter().filter(|f| f.line().is_none()).count()
    )
    .unwrap();
    writeln!(
        s,
        "scaling = \"{}\"",
        if a.per_item_scaling { "per-item" } else { "global" }
    )
    .unwrap();
    writeln!(s, "scale = {:?}", report.scale).unwrap();
    if let Ok(c) = correlation(&pairs) {
        writeln!(s, "correlation = {c:?}").unwrap();
    }
    writeln!(s, "\n[deconvolution]\n{}", deconvolution_summary(&p)).unwrap();
    art.add("summary.toml", s.into_bytes());
    eprintln!("RS score {:.4} over {} ratings", report.rs.value, report.rs.n_scored);
    Ok((art, inputs_of(&a.data, &p)))
}

fn eval_cmd(a: &EvalArgs) -> Result<(Artifacts, Inputs), CliError> {
    let bytes = read_input(&a.sweep)?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|_| CliError::Usage(format!("{} is not UTF-8", a.sweep.display())))?;
    let m = SweepManifest::parse(&text, &a.sweep)?;
    let parameter: SweepParameter = m.parameter.parse()?;
    if m.seeds == 0 {
        return Err(CliError::Usage("sweep needs at least one seed".into()));
    }
    if parameter == SweepParameter::Alpha {
        for &v in &m.grid {
            check_alpha(v)?;
        }
    } else {
        check_alpha(m.pipeline.alpha)?;
    }
    let base = synthetic_config(&(&m.simulation).into());
    let pipeline = PipelineParams {
        alpha: m.pipeline.alpha,
        k: m.pipeline.k,
        svd: SvdOptions::with_seed(m.pipeline.seed),
        scoring: ScoringParams::with_seed(m.pipeline.seed),
        histogram_bins: m.pipeline.bins,
    };
    let result = sweep_seeds(&base, &pipeline, parameter, &m.grid, m.seeds)?;

    let mut art = Artifacts::default();
    art.render("sweep.csv", |w| write_sweep_csv(w, &result.rows()))?;
    for (s, run) in result.runs.iter().enumerate() {
        for p in &run.points {
            let tag = format!("{}_{}_seed{s}", parameter.name(), p.value);
            art.render(format!("roc_{tag}.csv"), |w| write_roc_csv(w, &p.evaluation.roc))?;
            art.render(format!("histogram_{tag}.csv"), |w| p.evaluation.histogram.write_csv(w))?;
        }
    }
    let mut s = String::new();
    writeln!(s, "parameter = \"{}\"", parameter.name()).unwrap();
    writeln!(s, "grid = {:?}", result.grid).unwrap();
    writeln!(s, "seeds = {}", m.seeds).unwrap();
    writeln!(s, "mean_auc = {:?}", result.mean_auc).unwrap();
    writeln!(s, "mean_rs_score = {:?}", result.mean_rs).unwrap();
    writeln!(s, "mean_true_effect = {:?}", result.mean_true_effect).unwrap();
    art.add("sweep_summary.toml", s.into_bytes());
    let inputs = Inputs::from([(a.sweep.to_string_lossy().into_owned(), sha256_hex(&bytes))]);
    Ok((art, inputs))
}
