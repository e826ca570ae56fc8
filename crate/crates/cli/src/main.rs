mod config;
mod plot;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use braidforge::braid_words::{
    closure_permutation, loop_to_signed_singular, parse_classical_word, parse_loop_word,
    strand_components, BraidError, BraidWord, ClassicalBraidWord, LoopBraidWord,
};
use braidforge::constructors::{
    algorithm0, algorithm1, algorithm1_holomorphic, algorithm2, degree_bound,
    pass_through_incidence, pattern_bound_input, satellite_builder, BoundInput, ConstructionResult,
    LambdaChoice, SatellitePattern,
};
use braidforge::vector_field::FieldForm;
use braidforge::verifier::{verify, CheckName};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{LambdaSetting, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "braidforge",
    version,
    about = "Polynomials whose zero sets are closed braids, loop braids and braided surfaces"
)]
struct Cli {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "BRAIDFORGE_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct WordInput {
    /// Braid word such as "s1^-1 s2 r1".
    #[arg(long, conflicts_with = "file")]
    word: Option<String>,
    /// File holding the word as text or as braid JSON.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Number of strands (taken from braid JSON when omitted).
    #[arg(long)]
    strands: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum WordKind {
    Auto,
    Classical,
    Loop,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Classical,
    Loop,
    Holomorphic,
    Spin,
    Satellite,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Emit {
    Bundle,
    G,
    F,
    Ftilde,
    Bounds,
    Degrees,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormArg {
    Ranada,
    Cross4,
}

impl From<FormArg> for FieldForm {
    fn from(f: FormArg) -> FieldForm {
        match f {
            FormArg::Ranada => FieldForm::Ranada,
            FormArg::Cross4 => FieldForm::Cross4,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a braid word and print its closure data as JSON.
    Parse {
        #[command(flatten)]
        input: WordInput,
        #[arg(long, value_enum, default_value = "auto")]
        kind: WordKind,
    },
    /// Build the polynomial for a braid word.
    Build {
        #[arg(long, value_enum)]
        algorithm: AlgorithmArg,
        #[command(flatten)]
        input: WordInput,
        /// Rotation number of a spinning build.
        #[arg(long, allow_negative_numbers = true)]
        n: Option<i64>,
        /// "auto" or a positive scale.
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long, value_enum, default_value = "bundle")]
        emit: Emit,
        /// Satellite pattern per component: "trivial" or "WORD@STRANDS".
        #[arg(long = "pattern")]
        patterns: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a bundle numerically. Exit status 0 on PASS, 1 on FAIL.
    Verify {
        bundle: PathBuf,
        /// Rescale the bundle before checking.
        #[arg(long)]
        lambda: Option<f64>,
        /// Checks to leave out, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_check)]
        skip: Vec<CheckName>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the divergence-free field of a loop-type bundle as CSV.
    Vectorfield {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        /// Fixed time for every sample instead of random times.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write CSV files for plotting a bundle.
    Plotdata {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 8)]
        slices: usize,
        /// Points per strand in each slice file.
        #[arg(long, default_value_t = 64)]
        per_strand: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the degree bound for a word without building it.
    Bounds {
        #[arg(long, value_enum)]
        algorithm: AlgorithmArg,
        #[command(flatten)]
        input: WordInput,
        #[arg(long, allow_negative_numbers = true)]
        n: Option<i64>,
        #[arg(long = "pattern")]
        patterns: Vec<String>,
    },
}

fn parse_check(s: &str) -> std::result::Result<CheckName, String> {
    s.trim().parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            // library errors already embed their sources in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    cfg.set_seed(seed);
    if let Some(threads) = cfg.threads {
        if threads == 0 {
            bail!("[config] threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("[config] thread pool")?;
    }

    match cli.command {
        Command::Parse { input, kind } => {
            cfg.validate()?;
            cmd_parse(&input, kind)
        }
        Command::Build {
            algorithm,
            input,
            n,
            lambda,
            emit,
            patterns,
            out,
        } => {
            if let Some(l) = lambda {
                cfg.lambda = Some(LambdaSetting::parse(&l)?);
            }
            cfg.validate()?;
            cmd_build(&cfg, algorithm, &input, n, &patterns, emit, out.as_deref())
        }
        Command::Verify {
            bundle,
            lambda,
            skip,
            out,
        } => {
            cfg.validate()?;
            cmd_verify(
                &cfg,
                &bundle,
                lambda,
                skip.into_iter().collect(),
                out.as_deref(),
            )
        }
        Command::Vectorfield {
            bundle,
            samples,
            form,
            time,
            out,
        } => {
            if let Some(s) = samples {
                cfg.field.samples = s;
            }
            if let Some(f) = form {
                cfg.field.form = f.into();
            }
            cfg.validate()?;
            let result = load_bundle(&bundle)?;
            let report = plot::vectorfield(&result, &cfg, time, out.as_deref())?;
            eprintln!("{}", to_json(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Plotdata {
            bundle,
            slices,
            per_strand,
            out_dir,
        } => {
            cfg.validate()?;
            let dir = out_dir
                .or_else(|| cfg.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("plotdata"));
            let result = load_bundle(&bundle)?;
            let written = plot::plotdata(&result, &cfg, slices, per_strand, &dir)?;
            let listing: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            write_output(None, &listing.join("\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds {
            algorithm,
            input,
            n,
            patterns,
        } => {
            cfg.validate()?;
            let report = bounds(algorithm, &input, n, &patterns)?;
            write_output(None, &to_json(&report))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output")
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("[io] creating {}", dir.display()))?;
            }
            std::fs::write(path, format!("{text}\n"))
                .with_context(|| format!("[io] writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").context("[io] stdout")
        }
    }
}

fn load_bundle(path: &Path) -> Result<ConstructionResult> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("[bundle] reading {}", path.display()))?;
    ConstructionResult::from_json(&text)
        .with_context(|| format!("[bundle] {} is not a construction bundle", path.display()))
}

// ---- word input ----

enum Word {
    Classical(ClassicalBraidWord),
    Loop(LoopBraidWord),
}

fn word_text(input: &WordInput) -> Result<(String, Option<usize>)> {
    match (&input.word, &input.file) {
        (Some(w), _) => Ok((w.clone(), input.strands)),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("[input] reading {}", path.display()))?;
            // plain text or braid JSON; `read_word` tells them apart
            Ok((text.trim().to_string(), input.strands))
        }
        (None, None) => bail!("[input] give a braid with --word or --file"),
    }
}

fn read_word(input: &WordInput, kind: WordKind) -> Result<Word> {
    let (text, strands) = word_text(input)?;
    let tag = |e: BraidError| anyhow!("[parse] {e}");
    if text.starts_with('{') {
        return match kind {
            WordKind::Classical => Ok(Word::Classical(
                ClassicalBraidWord::from_json(&text).map_err(tag)?,
            )),
            WordKind::Loop => Ok(Word::Loop(LoopBraidWord::from_json(&text).map_err(tag)?)),
            WordKind::Auto => match ClassicalBraidWord::from_json(&text) {
                Ok(w) => Ok(Word::Classical(w)),
                Err(BraidError::RhoInClassical { .. }) => {
                    Ok(Word::Loop(LoopBraidWord::from_json(&text).map_err(tag)?))
                }
                Err(e) => Err(tag(e)),
            },
        };
    }
    let strands =
        strands.ok_or_else(|| anyhow!("[input] --strands is required for a text word"))?;
    match kind {
        WordKind::Classical => Ok(Word::Classical(
            parse_classical_word(&text, strands).map_err(tag)?,
        )),
        WordKind::Loop => Ok(Word::Loop(parse_loop_word(&text, strands).map_err(tag)?)),
        WordKind::Auto => match parse_classical_word(&text, strands) {
            Ok(w) => Ok(Word::Classical(w)),
            Err(BraidError::RhoInClassical { .. }) => {
                Ok(Word::Loop(parse_loop_word(&text, strands).map_err(tag)?))
            }
            Err(e) => Err(tag(e)),
        },
    }
}

fn classical_word(input: &WordInput) -> Result<ClassicalBraidWord> {
    match read_word(input, WordKind::Classical)? {
        Word::Classical(w) => Ok(w),
        Word::Loop(_) => unreachable!(),
    }
}

fn loop_word(input: &WordInput) -> Result<LoopBraidWord> {
    match read_word(input, WordKind::Loop)? {
        Word::Loop(w) => Ok(w),
        Word::Classical(_) => unreachable!(),
    }
}

fn non_empty(len: usize) -> Result<()> {
    if len == 0 {
        bail!("[parse] empty word: at least one generator is needed");
    }
    Ok(())
}

fn parse_pattern(text: &str) -> Result<SatellitePattern> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("trivial") {
        return Ok(SatellitePattern::Trivial);
    }
    let (word, strands) = text
        .rsplit_once('@')
        .ok_or_else(|| anyhow!("[input] pattern '{text}' is neither 'trivial' nor WORD@STRANDS"))?;
    let strands: usize = strands
        .trim()
        .parse()
        .with_context(|| format!("[input] strand count in pattern '{text}'"))?;
    parse_classical_word(word, strands).map_err(|e| anyhow!("[parse] pattern '{text}': {e}"))?;
    Ok(SatellitePattern::Braid {
        word: word.trim().to_string(),
        strands,
    })
}

/// One pattern per component; a single pattern is reused for all.
fn patterns_for(texts: &[String], components: usize) -> Result<Vec<SatellitePattern>> {
    let parsed = texts
        .iter()
        .map(|t| parse_pattern(t))
        .collect::<Result<Vec<_>>>()?;
    match parsed.len() {
        0 => Ok(vec![SatellitePattern::Trivial; components]),
        1 => Ok(vec![parsed[0].clone(); components]),
        n if n == components => Ok(parsed),
        n => bail!("[input] {n} patterns given for {components} components"),
    }
}

// ---- commands ----

#[derive(Serialize)]
struct ParseReport {
    kind: &'static str,
    strands: usize,
    word: String,
    tokens: serde_json::Value,
    components: Vec<Vec<usize>>,
    closure_permutation: Vec<usize>,
    pass_through_incidence: Vec<usize>,
    signed_singular: Option<braidforge::braid_words::SignedSingularWord>,
}

fn cmd_parse(input: &WordInput, kind: WordKind) -> Result<ExitCode> {
    let report = match read_word(input, kind)? {
        Word::Classical(w) => ParseReport {
            kind: "classical",
            strands: w.strand_count(),
            word: w.to_text(),
            tokens: serde_json::from_str(&w.to_json())?,
            components: strand_components(&w).components().to_vec(),
            closure_permutation: closure_permutation(&w),
            pass_through_incidence: pass_through_incidence(&w),
            signed_singular: None,
        },
        Word::Loop(w) => ParseReport {
            kind: "loop",
            strands: w.strand_count(),
            word: w.normalized_text(),
            tokens: serde_json::from_str(&w.to_json())?,
            components: strand_components(&w).components().to_vec(),
            closure_permutation: closure_permutation(&w),
            pass_through_incidence: pass_through_incidence(&w),
            signed_singular: Some(loop_to_signed_singular(&w)),
        },
    };
    write_output(None, &to_json(&report))?;
    Ok(ExitCode::SUCCESS)
}

fn build(
    cfg: &RunConfig,
    algorithm: AlgorithmArg,
    input: &WordInput,
    n: Option<i64>,
    patterns: &[String],
) -> Result<ConstructionResult> {
    let lambda = cfg
        .lambda
        .map(LambdaSetting::choice)
        .unwrap_or(LambdaChoice::Auto);
    let build_cfg = cfg.build_config();
    let result = match algorithm {
        AlgorithmArg::Classical => {
            let w = classical_word(input)?;
            non_empty(w.len())?;
            // any positive scale realizes a classical closure; auto means 1
            let l = match lambda {
                LambdaChoice::Value(v) => v,
                LambdaChoice::Auto => 1.0,
            };
            algorithm0(&w, l, &cfg.pipeline)?
        }
        AlgorithmArg::Spin => {
            let w = classical_word(input)?;
            non_empty(w.len())?;
            let n = n.ok_or_else(|| anyhow!("[input] --n is required for a spinning build"))?;
            let out = algorithm2(&w, n, &cfg.pipeline)?;
            match lambda {
                LambdaChoice::Value(v) => out.with_lambda(v)?,
                LambdaChoice::Auto => out,
            }
        }
        AlgorithmArg::Loop => {
            let w = loop_word(input)?;
            non_empty(w.len())?;
            algorithm1(&w, lambda, &build_cfg)?
        }
        AlgorithmArg::Holomorphic => {
            let w = loop_word(input)?;
            non_empty(w.len())?;
            algorithm1_holomorphic(&w, lambda, &build_cfg)?
        }
        AlgorithmArg::Satellite => {
            let w = loop_word(input)?;
            non_empty(w.len())?;
            let comps = strand_components(&w).len();
            let patterns = patterns_for(patterns, comps)?;
            satellite_builder(&w, &patterns, lambda, &build_cfg)?
        }
    };
    Ok(result)
}

fn cmd_build(
    cfg: &RunConfig,
    algorithm: AlgorithmArg,
    input: &WordInput,
    n: Option<i64>,
    patterns: &[String],
    emit: Emit,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let result = build(cfg, algorithm, input, n, patterns)?;
    let text = match emit {
        Emit::Bundle => to_json(&result),
        Emit::G => to_json(&result.g),
        Emit::F => to_json(&result.f),
        Emit::Ftilde => {
            let h = result
                .f_holomorphic
                .as_ref()
                .ok_or_else(|| anyhow!("[emit] ftilde exists only for --algorithm holomorphic"))?;
            to_json(h)
        }
        Emit::Bounds => to_json(&result.bound),
        Emit::Degrees => to_json(&result.degrees),
    };
    write_output(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    cfg: &RunConfig,
    bundle: &Path,
    lambda: Option<f64>,
    skip: BTreeSet<CheckName>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let mut result = load_bundle(bundle)?;
    if let Some(l) = lambda {
        result = result.with_lambda(l)?;
    }
    let report = verify(&result, &cfg.verifier, &skip);
    write_output(out, &to_json(&report))?;
    for c in &report.checks {
        eprintln!(
            "{:<12} {:?}  {}",
            format!("{:?}", c.check).to_lowercase(),
            c.status,
            c.detail
        );
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn bounds(
    algorithm: AlgorithmArg,
    input: &WordInput,
    n: Option<i64>,
    patterns: &[String],
) -> Result<braidforge::constructors::BoundReport> {
    Ok(match algorithm {
        AlgorithmArg::Classical => degree_bound(BoundInput::Classical(&classical_word(input)?)),
        AlgorithmArg::Spin => {
            let n = n.ok_or_else(|| anyhow!("[input] --n is required for a spinning bound"))?;
            degree_bound(BoundInput::Spinning(&classical_word(input)?, n))
        }
        AlgorithmArg::Loop => degree_bound(BoundInput::Loop(&loop_word(input)?)),
        AlgorithmArg::Holomorphic => degree_bound(BoundInput::Holomorphic(&loop_word(input)?)),
        AlgorithmArg::Satellite => {
            let w = loop_word(input)?;
            let pats = patterns_for(patterns, strand_components(&w).len())?;
            let inputs = pats
                .iter()
                .map(pattern_bound_input)
                .collect::<Result<Vec<_>, _>>()?;
            degree_bound(BoundInput::Satellite(&w, &inputs))
        }
    })
}
