use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use pivotud::aligner::{format_links, parse_bitext, parse_links, train_aligner, viterbi_align, AlignerConfig};
use pivotud::evaluation::{
    bootstrap_median_compare, cross_validate, evaluate, fisher_exact, summary_tsv, ContingencyTable2x2, METRIC_NAMES,
};
use pivotud::pivot::{LexiconCache, Quoting, RemoteService, StaticLexicon, TranslatorClient};
use pivotud::projection::{project_direct, project_via_alignment, project_via_pivot, ProcedureKind};
use pivotud::trainer::train_pipeline;
use pivotud::{parse_conllu, serialize_conllu, tokenize, Document, EvalSetting, PipelineModel, TokenizerConfig, TrainConfig, Upos};
use pivotud_cli::server::{Service, ServiceConfig};
use pivotud_cli::{annotate_text, render, render_stats, OutputFormat, StatsOptions, StatsReport};

/// Annotation toolkit for low-resource languages: tokenizer, pivot
/// translation, annotation projection, UD pipeline training and evaluation.
#[derive(Parser)]
#[command(name = "pivotud", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split raw text from stdin into sentences and tokens.
    Tokenize {
        /// File with one abbreviation per line.
        #[arg(long)]
        abbreviations: Option<PathBuf>,
        #[arg(long, default_value = "conllu")]
        format: OutputFormat,
    },
    /// Translate whitespace-tokenized lines word by word.
    Translate(TranslatorArgs),
    /// Train an IBM Model 1 aligner on a bitext and print Viterbi links.
    Align {
        /// Lines of `source ||| target`.
        #[arg(long)]
        bitext: PathBuf,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long)]
        no_diagonal: bool,
    },
    /// Annotate CoNLL-U from stdin with one of the projection procedures.
    Project {
        #[arg(long)]
        procedure: ProcedureKind,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Annotated pivot-language CoNLL-U (align procedure).
        #[arg(long)]
        source: Option<PathBuf>,
        /// One line of `i-j` links per sentence (align procedure).
        #[arg(long)]
        links: Option<PathBuf>,
        #[command(flatten)]
        translator: TranslatorArgs,
    },
    /// Train a pipeline model.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        /// TOML file with training settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotate stdin: raw text, or CoNLL-U for the gold-token settings.
    Annotate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "raw")]
        setting: EvalSetting,
        #[arg(long, default_value = "conllu")]
        format: OutputFormat,
    },
    /// Score a system CoNLL-U file against gold.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value = "goldtok")]
        setting: EvalSetting,
    },
    /// k-fold cross-validation of the training pipeline.
    Cv {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Two-sided Fisher exact test on a 2x2 table.
    Fisher { a: u64, b: u64, c: u64, d: u64 },
    /// Bootstrap comparison of the medians of two samples.
    Bootstrap {
        /// One number per line.
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 10000)]
        iterations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Corpus statistics over CoNLL-U from stdin.
    Stats {
        #[arg(long)]
        report: StatsReport,
        #[arg(long, default_value = "ADP")]
        upos_filter: Upos,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, default_value_t = 1)]
        min_weight: u64,
    },
    /// Run the HTTP annotation service.
    Serve {
        /// Key-value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        max_request_bytes: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct TranslatorArgs {
    /// `source<TAB>target` lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// URL of a translation service.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "fy-nl")]
    direction: String,
    #[arg(long, default_value_t = 10)]
    timeout_secs: u64,
    /// Wrap each word in double quotes before sending it.
    #[arg(long)]
    quote: bool,
    /// Persistent lexicon cache.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl TranslatorArgs {
    /// Identity when neither a lexicon nor an endpoint is given.
    fn client(&self) -> pivotud::Result<TranslatorClient> {
        let mut client = match (&self.lexicon, &self.endpoint) {
            (Some(_), Some(_)) => {
                return Err(pivotud::Error::InvalidInput("give either --lexicon or --endpoint, not both".into()))
            }
            (Some(path), None) => TranslatorClient::new(StaticLexicon::load(path)?),
            (None, Some(url)) => TranslatorClient::new(RemoteService::new(
                url.clone(),
                self.direction.clone(),
                Duration::from_secs(self.timeout_secs),
            )?),
            (None, None) => TranslatorClient::identity(),
        };
        if self.quote {
            client = client.with_quoting(Quoting::Double);
        }
        if let Some(path) = &self.cache {
            client = client.with_cache(LexiconCache::open(path.clone())?);
        }
        Ok(client)
    }
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<pivotud::Error> for Failure {
    fn from(e: pivotud::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read_stdin() -> Result<String, Failure> {
    let mut buf = Vec::new();
    io::stdin().read_to_end(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Failure::Data("input is not valid UTF-8".into()))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<PipelineModel, Failure> {
    PipelineModel::load(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn emit(text: &str) -> Outcome {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn read_numbers(path: &Path) -> Result<Vec<f64>, Failure> {
    read_file(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Data(format!("{}: '{l}' is not a number", path.display())))
        })
        .collect()
}

fn train_config(path: Option<&Path>) -> Result<TrainConfig, Failure> {
    match path {
        Some(p) => Ok(TrainConfig::load(p)?),
        None => Ok(TrainConfig::default()),
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Tokenize { abbreviations, format } => {
            let mut cfg = TokenizerConfig::default();
            if let Some(p) = abbreviations {
                cfg = cfg.load_abbreviations(p)?;
            }
            let doc = tokenize(&read_stdin()?, &cfg);
            emit(&render(&doc, format)?)
        }
        Command::Translate(args) => {
            let client = args.client()?;
            let input = read_stdin()?;
            let mut out = String::new();
            for line in input.lines() {
                let words: Vec<&str> = line.split_whitespace().collect();
                if words.is_empty() {
                    out.push('\n');
                    continue;
                }
                out.push_str(&client.translate_sentence(&words)?.pivot_tokens.join(" "));
                out.push('\n');
            }
            client.cache().save()?;
            emit(&out)
        }
        Command::Align { bitext, iterations, no_diagonal } => {
            let pairs = parse_bitext(&read_file(&bitext)?)?;
            let cfg = AlignerConfig {
                iterations,
                favor_diagonal: !no_diagonal,
                ..AlignerConfig::default()
            };
            let table = train_aligner(&pairs, &cfg)?;
            let mut out = String::new();
            for p in &pairs {
                out.push_str(&format_links(&viterbi_align(p, &table, &cfg)));
                out.push('\n');
            }
            emit(&out)
        }
        Command::Project { procedure, model, source, links, translator } => {
            let doc = parse_conllu(&read_stdin()?)?;
            let projected = match procedure {
                ProcedureKind::Direct | ProcedureKind::PivotTranslation => {
                    let path = model.ok_or_else(|| Failure::Usage("--model is required for this procedure".into()))?;
                    let model = load_model(&path)?;
                    if procedure == ProcedureKind::Direct {
                        project_direct(&doc, &model)?
                    } else {
                        let client = translator.client()?;
                        let p = project_via_pivot(&doc, &client, &model)?;
                        client.cache().save()?;
                        p
                    }
                }
                ProcedureKind::ParallelAlignment => {
                    let (Some(src), Some(links)) = (source, links) else {
                        return Err(Failure::Usage("--source and --links are required for the align procedure".into()));
                    };
                    let source = parse_conllu(&read_file(&src)?)?;
                    let links = read_file(&links)?
                        .lines()
                        .map(parse_links)
                        .collect::<pivotud::Result<Vec<_>>>()?;
                    project_via_alignment(&source, &doc, &links)?
                }
            };
            emit(&serialize_conllu(&projected.with_provenance_misc())?)
        }
        Command::Train { train, dev, config, out } => {
            let cfg = train_config(config.as_deref())?;
            let train_doc = parse_conllu(&read_file(&train)?)?;
            let dev_doc = match dev {
                Some(p) => parse_conllu(&read_file(&p)?)?,
                None => Document::new(),
            };
            let model = train_pipeline(&train_doc, &dev_doc, &cfg)?;
            model.save(&out)?;
            eprintln!(
                "trained on {} sentences; model written to {}",
                train_doc.sentences.len(),
                out.display()
            );
            Ok(())
        }
        Command::Annotate { model, setting, format } => {
            let model = load_model(&model)?;
            emit(&annotate_text(&model, &read_stdin()?, setting, format)?)
        }
        Command::Evaluate { gold, system, setting } => {
            let gold = parse_conllu(&read_file(&gold)?)?;
            let system = parse_conllu(&read_file(&system)?)?;
            let report = evaluate(&gold, &system, setting)?;
            let mut out = String::from("metric\tvalue\n");
            for (name, v) in METRIC_NAMES.iter().zip(report.metrics()) {
                if let Some(v) = v {
                    out.push_str(&format!("{name}\t{:.1}\n", pivotud::evaluation::round1(v)));
                }
            }
            emit(&out)
        }
        Command::Cv { corpus, k, seed, workers, config } => {
            let cfg = train_config(config.as_deref())?;
            let doc = parse_conllu(&read_file(&corpus)?)?;
            let outcome = cross_validate(&doc, k, seed, &EvalSetting::ALL, workers, |train, dev, fold_seed| {
                let cfg = TrainConfig { seed: fold_seed, ..cfg.clone() };
                train_pipeline(train, dev, &cfg)
            })?;
            emit(&summary_tsv(&outcome.summaries))
        }
        Command::Fisher { a, b, c, d } => {
            let p = fisher_exact(ContingencyTable2x2::new(a, b, c, d))?;
            emit(&format!("p={p:.7}\n"))
        }
        Command::Bootstrap { a, b, iterations, seed } => {
            let r = bootstrap_median_compare(&read_numbers(&a)?, &read_numbers(&b)?, iterations, seed)?;
            emit(&format!(
                "median_difference\t{}\nci_low\t{}\nci_high\t{}\np\t{}\niterations\t{}\n",
                r.median_difference, r.ci_low, r.ci_high, r.p_value, r.iterations
            ))
        }
        Command::Stats { report, upos_filter, top, min_weight } => {
            let doc = parse_conllu(&read_stdin()?)?;
            let opts = StatsOptions { upos_filter, top_n: top, min_weight };
            emit(&render_stats(&doc, report, &opts)?)
        }
        Command::Serve { config, model, bind, max_request_bytes, workers } => {
            let mut cfg = match config {
                Some(p) => ServiceConfig::load(&p).map_err(Failure::Data)?,
                None => ServiceConfig::default(),
            };
            if let Some(m) = model {
                cfg.model_path = m;
            }
            if let Some(b) = bind {
                cfg.bind = b;
            }
            if let Some(m) = max_request_bytes {
                cfg.max_request_bytes = m;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.apply_env();
            let service = Arc::new(Service::load(&cfg).map_err(Failure::Data)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
                eprintln!("listening on {}", listener.local_addr()?);
                pivotud_cli::server::serve(listener, service).await
            })?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
