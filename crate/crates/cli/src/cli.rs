use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsrlab_core::arch::{
    final_geometry, preset, render_table, report, AnalysisError, FULL_PRESETS, TOY_PRESETS,
};
use tsrlab_core::grammar::{detokenize, parse, split_structure, tokenize_with_bound, Token};
use tsrlab_core::nn::{
    narrow, positive_params, probe_encoder, save_checkpoint, synth_dataset, theoretical_box, train_toy,
    write_loss_csv, ModelInstance, ProbeMethod,
};

use crate::eval::{evaluate, load_annotations, load_predictions, Split};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tsrlab", version, about = "Table structure recognition lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parameter, MAC, receptive-field and sequence-length report for presets.
    Analyze(AnalyzeArgs),
    /// Score prediction files against annotations.
    Teds(TedsArgs),
    /// Compare the theoretical receptive field with a sensitivity probe.
    ProbeRf(ProbeArgs),
    /// Overfit a toy model on synthetic tables.
    ToyTrain(TrainArgs),
    /// Tokenize a structure string and round-trip it.
    Tokenize(TokenizeArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Preset name, repeatable; `all` lists every full-size preset.
    #[arg(long, required = true)]
    preset: Vec<String>,
    /// Square input side in pixels (defaults to the preset's own size).
    #[arg(long)]
    input_size: Option<usize>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TedsArgs {
    /// Annotation file (JSON lines).
    #[arg(long)]
    gt: PathBuf,
    /// Prediction file (JSON lines with `tokens` or `html`).
    #[arg(long)]
    pred: PathBuf,
    /// Write the full JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Only evaluate annotations of this split.
    #[arg(long)]
    split: Option<Split>,
    /// Worker threads (default: one per processor).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[arg(long)]
    preset: String,
    #[arg(long)]
    input_size: Option<usize>,
    /// Output position `row,col`, repeatable (default: first, middle and last).
    #[arg(long, value_parser = parse_pos)]
    at: Vec<(usize, usize)>,
    #[arg(long, env = "TSRLAB_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value = "toy-linearproj-8")]
    preset: String,
    /// Number of distinct synthetic tables.
    #[arg(long, default_value_t = 8)]
    tables: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 3e-3)]
    lr: f64,
    #[arg(long, env = "TSRLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the loss curve as CSV.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Save the trained parameters.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TokenizeArgs {
    /// Structure string such as `<tbody><tr><td></td></tr></tbody>`.
    structure: String,
    #[arg(long)]
    json: bool,
}

fn parse_pos(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("expected ROW,COL")?;
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x}: {e}"));
    Ok((num(r)?, num(c)?))
}

/// Failure carrying its exit code.
struct Failure(i32, String);

fn usage(msg: impl ToString) -> Failure {
    Failure(EXIT_USAGE, msg.to_string())
}

fn data(msg: impl ToString) -> Failure {
    Failure(EXIT_DATA, msg.to_string())
}

fn io(e: std::io::Error) -> Failure {
    data(e)
}

fn preset_error(e: AnalysisError) -> Failure {
    match e {
        AnalysisError::UnknownPreset(_) => usage(e),
        e => data(e),
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a, out),
        Command::Teds(a) => teds(a, out),
        Command::ProbeRf(a) => probe_rf(a, out),
        Command::ToyTrain(a) => toy_train(a, out),
        Command::Tokenize(a) => tokenize(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut names = Vec::new();
    for p in &a.preset {
        if p == "all" {
            names.extend(FULL_PRESETS.iter().map(|s| s.to_string()));
        } else {
            names.push(p.clone());
        }
    }
    let mut reports = Vec::new();
    for name in &names {
        let mut spec = preset(name).map_err(preset_error)?;
        if let Some(s) = a.input_size {
            spec = spec.with_input_size(s, s);
        }
        reports.push(report(&spec).map_err(data)?);
    }
    if a.json {
        let text = if reports.len() == 1 {
            serde_json::to_string_pretty(&reports[0])
        } else {
            serde_json::to_string_pretty(&reports)
        };
        writeln!(out, "{}", text.expect("report serializes")).map_err(io)?;
    } else {
        write!(out, "{}", render_table(&reports)).map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn teds(a: TedsArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if a.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let gt = load_annotations(&a.gt, a.split).map_err(data)?;
    let pred = load_predictions(&a.pred).map_err(data)?;
    let mut rep = evaluate(&gt.records, &pred, a.threads).map_err(data)?;
    rep.split = a.split;
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    writeln!(
        out,
        "samples {} (simple {}, complex {}), skipped annotation lines {}",
        rep.n_samples, rep.n_simple, rep.n_complex, gt.skipped
    )
    .map_err(io)?;
    writeln!(out, "TEDS simple  {}", pct(rep.teds_simple)).map_err(io)?;
    writeln!(out, "TEDS complex {}", pct(rep.teds_complex)).map_err(io)?;
    writeln!(out, "TEDS all     {:.2}", rep.teds_all).map_err(io)?;
    writeln!(out, "flags {}", rep.flags.len()).map_err(io)?;
    if let Some(path) = a.report {
        std::fs::write(&path, rep.to_json()).map_err(|e| data(format!("{}: {e}", path.display())))?;
    }
    Ok(EXIT_OK)
}

fn probe_rf(a: ProbeArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut spec = preset(&a.preset).map_err(preset_error)?;
    if let Some(s) = a.input_size {
        spec = spec.with_input_size(s, s);
    }
    let g = final_geometry(&spec.encoder).map_err(data)?;
    let (oh, ow) = g.out_size;
    let positions = if a.at.is_empty() {
        vec![(0, 0), (oh / 2, ow / 2), (oh - 1, ow - 1)]
    } else {
        a.at.clone()
    };
    if let Some(p) = positions.iter().find(|p| p.0 >= oh || p.1 >= ow) {
        return Err(usage(format!(
            "position {p:?} is outside the {oh}x{ow} feature map"
        )));
    }
    // Widths do not affect the receptive field, so only toy models run at full width.
    let toy = TOY_PRESETS.contains(&a.preset.as_str());
    let model = if toy {
        Some(ModelInstance::new(spec.clone(), a.seed).map_err(data)?)
    } else {
        None
    };
    let thin = narrow(&spec.encoder);
    let thin_params = positive_params(&thin, a.seed);
    writeln!(
        out,
        "{}: RF {} px, stride {}, feature map {oh}x{ow}",
        a.preset, g.rf, g.jump
    )
    .map_err(io)?;
    let mut all_match = true;
    for pos in positions {
        let want = theoretical_box(&spec.encoder, pos).map_err(data)?;
        let got = match &model {
            Some(m) => m.empirical_rf(pos),
            None => probe_encoder(&thin, &thin_params, pos, ProbeMethod::Auto),
        }
        .map_err(data)?;
        let ok = got == want;
        all_match &= ok;
        writeln!(
            out,
            "({}, {}) theoretical {want} empirical {got} {}",
            pos.0,
            pos.1,
            if ok { "match" } else { "MISMATCH" }
        )
        .map_err(io)?;
    }
    Ok(if all_match { EXIT_OK } else { EXIT_DATA })
}

fn toy_train(a: TrainArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if a.tables == 0 || a.steps == 0 {
        return Err(usage("--tables and --steps must be positive"));
    }
    let spec = preset(&a.preset).map_err(preset_error)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let samples = synth_dataset(&mut rng, a.tables, spec.max_len);
    let mut m = ModelInstance::new(spec, a.seed).map_err(data)?;
    let curve = train_toy(&mut m, &samples, a.steps, a.lr).map_err(data)?;
    let every = (a.steps / 10).max(1);
    for (i, l) in curve.iter().enumerate() {
        if i % every == 0 || i + 1 == curve.len() {
            writeln!(out, "step {i:>5} loss {l:.6}").map_err(io)?;
        }
    }
    let decode_len = m.spec().max_len;
    let mut exact = 0;
    for (img, gt) in &samples {
        if m.greedy_decode(img, decode_len).map_err(data)?.tokens() == gt.tokens() {
            exact += 1;
        }
    }
    writeln!(out, "exact decodes {exact}/{}", samples.len()).map_err(io)?;
    if let Some(path) = a.loss_csv {
        let f = File::create(&path).map_err(io)?;
        write_loss_csv(BufWriter::new(f), &curve).map_err(io)?;
    }
    if let Some(path) = a.checkpoint {
        let f = File::create(&path).map_err(io)?;
        let mut w = BufWriter::new(f);
        save_checkpoint(&m, &mut w).map_err(data)?;
        w.flush().map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn tokenize(a: TokenizeArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let seq = tokenize_with_bound(&split_structure(&a.structure), usize::MAX).expect("unbounded");
    if let Some(pos) = seq.tokens().iter().position(|t| *t == Token::Unk) {
        return Err(data(format!("token {pos} is outside the vocabulary")));
    }
    let back = detokenize(&seq).map_err(data)?;
    let round_trip = back == a.structure;
    let well_formed = parse(seq.tokens()).is_ok();
    if a.json {
        let v = serde_json::json!({
            "ids": seq.ids(),
            "tokens": seq.tokens().iter().map(|t| t.surface()).collect::<Vec<_>>(),
            "structure": back,
            "round_trip": round_trip,
            "well_formed": well_formed,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json")).map_err(io)?;
    } else {
        let ids: Vec<String> = seq.ids().iter().map(u32::to_string).collect();
        writeln!(out, "ids {}", ids.join(" ")).map_err(io)?;
        writeln!(out, "structure {back}").map_err(io)?;
        writeln!(out, "round-trip {}", if round_trip { "ok" } else { "changed" }).map_err(io)?;
        writeln!(out, "well-formed {}", if well_formed { "yes" } else { "no" }).map_err(io)?;
    }
    Ok(if round_trip { EXIT_OK } else { EXIT_DATA })
}
