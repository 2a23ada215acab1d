use std::fmt::Display;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use bca::embio::{self, EmbeddingFile};
use bca::harness::{self, run_stream, run_stream_from, time_phases, AblationMode, RunOptions, RunReport, SweepGrid};
use bca::synthgen::{generate, LabeledEmbedding, StreamSpec};
use bca::{AdapterConfig, AdapterState, EmbeddingVector, Error, Result};

use crate::args::{parse_shifts, AdaptArgs, BenchArgs, ExportPriorArgs, GenArgs, InspectArgs, RunArgs, SweepArgs};

pub struct Ctx {
    seed: Option<u64>,
    quiet: bool,
    output_dir: PathBuf,
}

impl Ctx {
    pub fn new(seed: Option<u64>, quiet: bool, output_dir: PathBuf) -> Self {
        Self { seed, quiet, output_dir }
    }

    /// Print a line; a closed stdout (e.g. piped into `head`) is not an error.
    fn say(&self, text: impl Display) {
        if !self.quiet {
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }

    fn echo(&self, key: &str, value: impl Display) {
        self.say(format_args!("{key}={value}"));
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))?;
        Ok(self.output_dir.join(name))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

// --- gen -------------------------------------------------------------------

pub fn gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => serde_json::from_slice::<StreamSpec>(&read(path)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
        None => {
            let mut s = StreamSpec::new(a.classes, a.dim, a.samples, 0);
            s.templates_per_class = a.templates;
            s.noise_scale = a.noise;
            s.text_perturbation = a.text_perturbation;
            s.min_separation = a.min_separation;
            s.shift = parse_shifts(&a.shift, a.classes)?;
            s
        }
    };
    if let Some(seed) = ctx.seed {
        spec.seed = seed;
    }
    let task = generate::<f32>(&spec)?;
    let stream_name = format!("{}stream.bcae", a.prefix);
    let text_name = format!("{}text.bcae", a.prefix);
    let meta_name = format!("{}meta.json", a.prefix);
    let stream = EmbeddingFile::from_stream(&task.stream, spec.num_classes)?;
    let text = EmbeddingFile::from_bank(&task.text_embeddings, spec.num_classes)?;
    let stream_path = ctx.write(&stream_name, &stream.encode())?;
    let text_path = ctx.write(&text_name, &text.encode())?;
    let meta = serde_json::json!({
        "generator": "synthgen",
        "spec": spec,
        "num_embeddings": spec.num_embeddings(),
        "stream": stream_name,
        "text_embeddings": text_name,
    });
    let meta_bytes = serde_json::to_vec_pretty(&meta).expect("json value serializes");
    let meta_path = ctx.write(&meta_name, &meta_bytes)?;

    ctx.echo("spec", serde_json::to_string(&spec).expect("spec serializes"));
    ctx.echo("seed", spec.seed);
    ctx.echo("num_embeddings", spec.num_embeddings());
    ctx.echo("stream", stream_path.display());
    ctx.echo("text_embeddings", text_path.display());
    ctx.echo("meta", meta_path.display());
    Ok(())
}

// --- shared input handling -------------------------------------------------

struct Inputs {
    text: Vec<EmbeddingVector<f32>>,
    stream: Vec<LabeledEmbedding<f32>>,
    num_classes: usize,
    dim: usize,
}

fn load_inputs(a: &AdaptArgs) -> Result<Inputs> {
    let text = embio::read_embeddings(&a.text_embeddings)?;
    let stream = embio::read_embeddings(&a.embeddings)?;
    let (k, d) = (text.num_classes(), text.dim());
    if k == 0 {
        return Err(Error::InvalidConfig(format!("{}: header K is 0", a.text_embeddings.display())));
    }
    if stream.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: stream.dim() });
    }
    if stream.num_classes() != k {
        return Err(Error::InvalidConfig(format!(
            "stream has K = {} but the text bank has K = {k}",
            stream.num_classes()
        )));
    }
    if !stream.header.labeled {
        return Err(Error::InvalidConfig(format!("{}: evaluation needs a labeled stream", a.embeddings.display())));
    }
    Ok(Inputs { text: text.embeddings()?, stream: stream.stream()?, num_classes: k, dim: d })
}

fn config_from(a: &AdaptArgs, inputs: &Inputs) -> AdapterConfig {
    let base = AdapterConfig::with_preset(inputs.text.len(), inputs.num_classes, inputs.dim, a.preset);
    base.tau(a.tau.unwrap_or(base.tau))
        .counts(a.n1.unwrap_or(base.n1), a.n2.unwrap_or(base.n2))
        .temperature(a.temperature)
}

fn options(a: &AdaptArgs, mode: AblationMode) -> RunOptions {
    RunOptions { mode, strategy: a.strategy, window: a.window, time_phases: a.time }
}

fn echo_inputs(ctx: &Ctx, a: &AdaptArgs) {
    ctx.echo("embeddings", a.embeddings.display());
    ctx.echo("text_embeddings", a.text_embeddings.display());
    ctx.echo("preset", a.preset.name());
}

fn with_seed(ctx: &Ctx, report: RunReport) -> RunReport {
    match ctx.seed {
        Some(s) => report.with_seed(s),
        None => report,
    }
}

// --- run -------------------------------------------------------------------

pub fn run(ctx: &Ctx, a: &RunArgs) -> Result<()> {
    let inputs = load_inputs(&a.adapt)?;
    let mut state = match &a.resume {
        Some(path) => {
            let state: AdapterState<f32> = embio::load_state(path)?;
            let c = state.config();
            if c.dim != inputs.dim || c.num_classes != inputs.num_classes {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint has K = {}, d = {}; stream has K = {}, d = {}",
                    c.num_classes, c.dim, inputs.num_classes, inputs.dim
                )));
            }
            state
        }
        None => AdapterState::init(inputs.text.clone(), config_from(&a.adapt, &inputs))?,
    };
    if a.start_index > inputs.stream.len() {
        return Err(Error::IndexOutOfRange { index: a.start_index, len: inputs.stream.len() });
    }
    if a.checkpoint_every == Some(0) {
        return Err(Error::InvalidConfig("--checkpoint-every must be positive".into()));
    }
    let opts = options(&a.adapt, a.mode);
    let stream = &inputs.stream[a.start_index..];
    let every = a.checkpoint_every;
    let report = run_stream_from(&mut state, stream, a.start_index, &opts, |index, s| match every {
        Some(n) if (index + 1) % n == 0 => {
            let path = ctx.out_path(&format!("state-{}.bcas", index + 1))?;
            embio::save_state(path, s)
        }
        _ => Ok(()),
    })?;
    let report = with_seed(ctx, report);
    let metrics = ctx.write("metrics.csv", &embio::encode_metrics_csv(&report.records)?)?;
    let table = ctx.write("report.csv", &harness::encode_report_csv([&report])?)?;
    if let Some(path) = &a.save_state {
        embio::save_state(path, &state)?;
    }

    echo_inputs(ctx, &a.adapt);
    if let Some(path) = &a.resume {
        ctx.echo("resume", path.display());
    }
    ctx.echo("start_index", a.start_index);
    ctx.say(report.summary_text().trim_end());
    ctx.echo("metrics", metrics.display());
    ctx.echo("report", table.display());
    Ok(())
}

// --- ablate ----------------------------------------------------------------

fn print_table(ctx: &Ctx, reports: &[(String, &RunReport)]) {
    ctx.say(format_args!("{:<24} {:>10} {:>10} {:>10}", "row", "overall", "last_half", "updates"));
    for (label, r) in reports {
        ctx.say(format_args!(
            "{:<24} {:>10.6} {:>10.6} {:>10}",
            label, r.overall_accuracy, r.last_half_accuracy, r.updates_fired
        ));
    }
}

fn echo_config(ctx: &Ctx, c: &AdapterConfig, opts: &RunOptions) {
    ctx.echo("num_embeddings", c.num_embeddings);
    ctx.echo("num_classes", c.num_classes);
    ctx.echo("dim", c.dim);
    ctx.echo("tau", c.tau);
    ctx.echo("n1", c.n1);
    ctx.echo("n2", c.n2);
    ctx.echo("temperature", c.temperature);
    ctx.echo("strategy", strategy_label(opts));
    ctx.echo("window", opts.window);
    ctx.echo("seed", ctx.seed.map_or("none".to_string(), |s| s.to_string()));
}

fn strategy_label(opts: &RunOptions) -> String {
    match opts.strategy {
        bca::UpdateStrategy::CountBased => "count".into(),
        bca::UpdateStrategy::Momentum { alpha } => format!("momentum:{alpha}"),
    }
}

pub fn ablate(ctx: &Ctx, a: &AdaptArgs) -> Result<()> {
    let inputs = load_inputs(a)?;
    let config = config_from(a, &inputs);
    let mut reports = Vec::with_capacity(4);
    for mode in AblationMode::ALL {
        let mut state = AdapterState::init(inputs.text.clone(), config)?;
        let report = run_stream(&mut state, &inputs.stream, &options(a, mode))
            .inspect_err(|_| eprintln!("mode {mode} failed"))?;
        reports.push(with_seed(ctx, report));
    }
    let path = ctx.write("ablation.csv", &harness::encode_report_csv(&reports)?)?;

    echo_inputs(ctx, a);
    echo_config(ctx, &config, &options(a, AblationMode::Full));
    let rows: Vec<(String, &RunReport)> = reports.iter().map(|r| (r.mode.to_string(), r)).collect();
    print_table(ctx, &rows);
    ctx.echo("table", path.display());
    Ok(())
}

// --- sweep -----------------------------------------------------------------

pub fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let inputs = load_inputs(&a.adapt)?;
    let config = config_from(&a.adapt, &inputs);
    let grid = SweepGrid { taus: a.taus.clone(), n1s: a.n1s.clone(), n2s: a.n2s.clone() };
    let opts = options(&a.adapt, a.mode);
    let mut rows = harness::sweep(&inputs.text, &inputs.stream, config, &grid, &opts)?;
    for row in &mut rows {
        row.report = with_seed(ctx, row.report.clone());
    }
    let path = ctx.write("sweep.csv", &harness::encode_sweep_csv(&rows)?)?;

    echo_inputs(ctx, &a.adapt);
    ctx.echo("mode", a.mode);
    echo_config(ctx, &config, &opts);
    ctx.echo("cells", rows.len());
    let labels: Vec<(String, &RunReport)> =
        rows.iter().map(|r| (format!("tau={} n1={} n2={}", r.tau, r.n1, r.n2), &r.report)).collect();
    print_table(ctx, &labels);
    ctx.echo("table", path.display());
    Ok(())
}

// --- inspect ---------------------------------------------------------------

fn entropy(row: &[f32]) -> f64 {
    row.iter().map(|&p| p as f64).filter(|&p| p > 0.0).map(|p| p * (1.0 / p).ln()).sum()
}

/// Bucket label for a count: `0`, `1`, `2-3`, `4-7`, ...
fn bucket(n: u64) -> (u32, String) {
    if n == 0 {
        return (0, "0".into());
    }
    let b = 64 - n.leading_zeros();
    let lo = 1u64 << (b - 1);
    let hi = (lo << 1) - 1;
    (b, if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") })
}

pub fn inspect(ctx: &Ctx, a: &InspectArgs) -> Result<()> {
    match (&a.state, &a.embeddings) {
        (Some(path), _) => inspect_state(ctx, path),
        (None, Some(path)) => inspect_embeddings(ctx, path),
        (None, None) => Err(Error::InvalidConfig("pass --state or --embeddings".into())),
    }
}

fn inspect_state(ctx: &Ctx, path: &Path) -> Result<()> {
    let state: AdapterState<f32> = embio::decode_state(&read(path)?)?;
    let c = state.config();
    let per_row: Vec<u64> =
        (0..c.num_embeddings).map(|m| (state.c1().get(m) - c.n1).max(state.c2().get(m) - c.n2)).collect();
    let e_total: u64 = state.c1().as_slice().iter().map(|v| v - c.n1).sum();
    let p_total: u64 = state.c2().as_slice().iter().map(|v| v - c.n2).sum();
    let norm_err = state.bank().rows().map(|r| (bca::embedding::norm(r) - 1.0).abs()).fold(0.0, f64::max);
    let sum_err =
        state.priors().rows().map(|r| (r.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let entropies: Vec<f64> = state.priors().rows().map(entropy).collect();

    ctx.echo("file", path.display());
    ctx.echo("format", "BCAS");
    ctx.echo("num_embeddings", c.num_embeddings);
    ctx.echo("num_classes", c.num_classes);
    ctx.echo("dim", c.dim);
    ctx.echo("tau", c.tau);
    ctx.echo("n1", c.n1);
    ctx.echo("n2", c.n2);
    ctx.echo("temperature", c.temperature);
    ctx.echo("checkpoint_bytes", embio::CheckpointLayout::for_config(c).total());
    ctx.echo("prior_bytes", embio::CheckpointLayout::for_config(c).priors);
    ctx.echo("embedding_updates_total", e_total);
    ctx.echo("prior_updates_total", p_total);
    ctx.echo("updates_total", per_row.iter().sum::<u64>());
    let mut hist: std::collections::BTreeMap<u32, (String, usize)> = Default::default();
    for &n in &per_row {
        let (b, label) = bucket(n);
        hist.entry(b).or_insert((label, 0)).1 += 1;
    }
    for (label, count) in hist.values() {
        ctx.echo(&format!("updates_histogram[{label}]"), count);
    }
    ctx.echo("max_norm_error", norm_err);
    ctx.echo("max_prior_sum_error", sum_err);
    let mean = entropies.iter().sum::<f64>() / entropies.len() as f64;
    ctx.echo("entropy_min", entropies.iter().copied().fold(f64::INFINITY, f64::min));
    ctx.echo("entropy_mean", mean);
    ctx.echo("entropy_max", entropies.iter().copied().fold(0.0, f64::max));
    for (m, h) in entropies.iter().enumerate() {
        ctx.echo(&format!("entropy[{m}]"), h);
    }
    Ok(())
}

fn inspect_embeddings(ctx: &Ctx, path: &Path) -> Result<()> {
    let file = EmbeddingFile::decode(&read(path)?)?;
    let h = file.header;
    let mut warnings = Vec::new();
    let mut max_err = 0.0f64;
    let mut off_norm = 0usize;
    for i in 0..file.len() {
        let err = (bca::embedding::norm(file.row(i)) - 1.0).abs();
        max_err = max_err.max(err);
        if err > bca::embedding::INPUT_NORM_TOLERANCE {
            off_norm += 1;
        }
    }
    if off_norm > 0 {
        warnings.push(format!("{off_norm} rows are not unit norm"));
    }
    let k = file.num_classes();
    if !h.labeled && k > 0 && !file.len().is_multiple_of(k) {
        warnings.push(format!("{} rows is not a multiple of K = {k}", file.len()));
    }
    if k == 0 {
        warnings.push("header K is 0".into());
    }

    ctx.echo("file", path.display());
    ctx.echo("format", "BCAE");
    ctx.echo("version", h.version);
    ctx.echo("labeled", h.labeled);
    ctx.echo("dim", h.dim);
    ctx.echo("num_classes", h.num_classes);
    ctx.echo("count", h.count);
    ctx.echo("max_norm_error", max_err);
    if h.labeled {
        let mut counts = vec![0usize; k];
        let mut unlabeled = 0;
        for &l in &file.labels {
            match usize::try_from(l) {
                Ok(c) => counts[c] += 1,
                Err(_) => unlabeled += 1,
            }
        }
        ctx.echo("unlabeled", unlabeled);
        for (c, n) in counts.iter().enumerate() {
            ctx.echo(&format!("label_count[{c}]"), n);
        }
    } else if let Some(c) = file.len().checked_div(k) {
        ctx.echo("templates_per_class", c);
    }
    ctx.echo("warnings", warnings.len());
    for w in &warnings {
        ctx.echo("warning", w);
    }
    Ok(())
}

// --- export-prior ----------------------------------------------------------

pub fn export_prior(ctx: &Ctx, a: &ExportPriorArgs) -> Result<()> {
    let state: AdapterState<f32> = embio::load_state(&a.state)?;
    let path = ctx.out_path(&a.out)?;
    embio::export_prior_csv(&state, &path, a.top_n)?;
    let classes = embio::top_classes(&state, a.top_n);
    ctx.echo("state", a.state.display());
    ctx.echo("top_n", a.top_n.map_or("all".to_string(), |n| n.to_string()));
    ctx.echo("columns", classes.len());
    ctx.echo("prior", path.display());
    Ok(())
}

// --- bench -----------------------------------------------------------------

pub fn bench(ctx: &Ctx, a: &BenchArgs) -> Result<()> {
    if a.iterations == 0 {
        return Err(Error::InvalidConfig("--iterations must be positive".into()));
    }
    let seed = ctx.seed.unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Malformed(format!("csv: {e}"));
    let header = [
        "dim",
        "num_embeddings",
        "num_classes",
        "t2_us",
        "t3_us",
        "t4_cal_us",
        "t4_rw_us",
        "step_us",
        "samples",
        "updates",
    ];
    w.write_record(header).map_err(csv_err)?;
    ctx.echo("iterations", a.iterations);
    ctx.echo("samples", a.samples);
    ctx.echo("seed", seed);
    ctx.say(format_args!(
        "{:>6} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "d", "M", "K", "t2_us", "t3_us", "t4cal_us", "t4rw_us", "step_us"
    ));
    for &d in &a.dims {
        for &k in &a.classes {
            let mut spec = StreamSpec::new(k, d, a.samples, seed);
            spec.text_perturbation = 0.5;
            spec.min_separation = 0.1;
            let task = generate::<f32>(&spec)?;
            let state = AdapterState::init(task.text_embeddings, AdapterConfig::new(k, k, d))?;
            let t = time_phases(&state, &task.stream, a.iterations)?;
            let us = |s: f64| s * 1e6;
            let row = [us(t.membership), us(t.posterior), us(t.update_compute), us(t.state_write), us(t.step)];
            ctx.say(format_args!(
                "{:>6} {:>6} {:>6} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
                d, k, k, row[0], row[1], row[2], row[3], row[4]
            ));
            let mut rec = vec![d.to_string(), k.to_string(), k.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(t.samples.to_string());
            rec.push(t.updates.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(format!("csv: {e}")))?;
    let path = ctx.write("bench.csv", &bytes)?;
    ctx.echo("table", path.display());
    Ok(())
}
