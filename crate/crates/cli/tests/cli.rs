use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use pivotud::corpus_stats::{cooccurrence, cooccurrence_tsv, upos_frequencies, upos_frequencies_tsv};
use pivotud::synth::grammar_corpus;
use pivotud::trainer::train_pipeline;
use pivotud::{parse_conllu, serialize_conllu, AnnotateInput, EvalSetting, PipelineModel, TrainConfig, Upos};
use pivotud_cli::server::{model_hash, Service, ServiceConfig};

fn model() -> &'static PipelineModel {
    static MODEL: OnceLock<PipelineModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = TrainConfig {
            tagger_epochs: 3,
            parser_epochs: 3,
            ..TrainConfig::default()
        };
        train_pipeline(&grammar_corpus(200, 5), &grammar_corpus(20, 6), &cfg).unwrap()
    })
}

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pivotud"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn save_model(dir: &Path) -> String {
    let p = dir.join("m.pivotud");
    model().save(&p).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn fisher_prints_p() {
    let o = run(&["fisher", "5", "0", "0", "5"], "");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "p=0.0079365\n");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"], "").status.code(), Some(1));
    assert_eq!(run(&["fisher", "1", "2"], "").status.code(), Some(1));
    assert_eq!(run(&["annotate", "--bogus"], "").status.code(), Some(1));
    let o = run(&["fisher", "0", "0", "0", "0"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
    let o = run(&["stats", "--report", "upos"], "1\tbad line\n\n");
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["--help"], "").status.code(), Some(0));
}

#[test]
fn annotate_settings_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let m = save_model(dir.path());
    let o = run(&["annotate", "--model", &m, "--setting", "raw", "--format", "conllu"], "Dat is in hûs.");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = parse_conllu(&stdout(&o)).unwrap();
    assert_eq!(doc.sentences.len(), 1);
    assert_eq!(doc.sentences[0].tokens.len(), 5);

    let gold = serialize_conllu(&grammar_corpus(5, 8)).unwrap();
    let o = run(&["annotate", "--model", &m, "--setting", "goldtok", "--format", "conllu"], &gold);
    assert_eq!(o.status.code(), Some(0));
    let sys = parse_conllu(&stdout(&o)).unwrap();
    assert_eq!(sys.sentences.len(), 5);
    let o = run(&["annotate", "--model", &m, "--setting", "goldtok", "--format", "tsv"], &gold);
    assert!(stdout(&o).starts_with("doc_id\tsent_id\ttoken_id"));
    let o = run(&["annotate", "--model", &m, "--format", "json"], "Hy sliept.");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["sentences"][0]["tokens"].as_array().unwrap().len(), 3);
}

#[test]
fn train_evaluate_and_cv() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.conllu");
    let test = dir.path().join("test.conllu");
    std::fs::write(&train, serialize_conllu(&grammar_corpus(60, 1)).unwrap()).unwrap();
    std::fs::write(&test, serialize_conllu(&grammar_corpus(10, 2)).unwrap()).unwrap();
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, "tagger_epochs = 2\nparser_epochs = 2\n").unwrap();
    let out = dir.path().join("model.pivotud");
    let o = run(
        &["train", "--train", train.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        "",
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("pivotud-model 1\n"));

    let o = run(
        &["annotate", "--model", out.to_str().unwrap(), "--setting", "goldtok"],
        &std::fs::read_to_string(&test).unwrap(),
    );
    let sys = dir.path().join("sys.conllu");
    std::fs::write(&sys, o.stdout).unwrap();
    let o = run(&["evaluate", "--gold", test.to_str().unwrap(), "--system", sys.to_str().unwrap()], "");
    let text = stdout(&o);
    assert!(text.starts_with("metric\tvalue\nUPOS\t"), "{text}");
    assert!(text.contains("\nLAS\t"));

    let o = run(
        &["cv", "--corpus", train.to_str().unwrap(), "--k", "3", "--workers", "2", "--config", cfg.to_str().unwrap()],
        "",
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "metric\traw_mean\traw_sd\tgoldtok_mean\tgoldtok_sd\tgoldtokmorph_mean\tgoldtokmorph_sd");
    assert_eq!(lines.len(), 10);
    assert!(lines[3].starts_with("UPOS\t"));
}

#[test]
fn tokenize_translate_align_project() {
    let o = run(&["tokenize"], "Hy sliept. Wy sjonge!");
    assert_eq!(parse_conllu(&stdout(&o)).unwrap().sentences.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("lex.tsv");
    std::fs::write(&lex, "hy\thij\nsliept\tslaapt\n").unwrap();
    let o = run(&["translate", "--lexicon", lex.to_str().unwrap()], "hy sliept .\n");
    assert_eq!(stdout(&o), "hij slaapt .\n");
    assert_eq!(stdout(&run(&["translate"], "a b\n")), "a b\n");

    let bitext = dir.path().join("bitext.txt");
    let mut lines = vec!["a b ||| x y"; 50];
    lines.extend(vec!["a ||| x"; 50]);
    std::fs::write(&bitext, lines.join("\n")).unwrap();
    let o = run(&["align", "--bitext", bitext.to_str().unwrap(), "--iterations", "20"], "");
    assert_eq!(stdout(&o).lines().next(), Some("0-0 1-1"));

    let m = save_model(dir.path());
    let gold = serialize_conllu(&grammar_corpus(4, 3)).unwrap();
    let direct = run(&["project", "--procedure", "direct", "--model", &m], &gold);
    assert_eq!(direct.status.code(), Some(0), "{}", String::from_utf8_lossy(&direct.stderr));
    assert!(stdout(&direct).contains("Proj=direct"));
    let pivot = run(&["project", "--procedure", "pivot", "--model", &m], &gold);
    assert!(stdout(&pivot).contains("Pivot="));
    let o = run(&["project", "--procedure", "align"], &gold);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["project", "--procedure", "sideways", "--model", &m], &gold);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bootstrap_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    std::fs::write(&a, "1\n2\n3\n4\n5\n").unwrap();
    std::fs::write(&b, "11\n12\n13\n14\n15\n").unwrap();
    let o = run(&["bootstrap", a.to_str().unwrap(), b.to_str().unwrap(), "--iterations", "2000"], "");
    let text = stdout(&o);
    assert!(text.starts_with("median_difference\t-10\n"), "{text}");

    let corpus = serialize_conllu(&grammar_corpus(50, 4)).unwrap();
    for report in ["genres", "upos", "top", "cooc"] {
        let o = run(&["stats", "--report", report], &corpus);
        assert_eq!(o.status.code(), Some(0), "{report}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stdout.is_empty());
    }
    let o = run(&["stats", "--report", "genres"], &corpus);
    assert_eq!(stdout(&o).lines().count(), 7);
}

struct Server {
    base: String,
    hash: String,
    _rt: tokio::runtime::Runtime,
}

fn server() -> Server {
    let cfg = ServiceConfig {
        max_request_bytes: 1 << 16,
        workers: 2,
        ..ServiceConfig::default()
    };
    let text = model().to_text().unwrap();
    let hash = model_hash(text.as_bytes());
    let svc = Arc::new(Service::new(model().clone(), hash.clone(), &cfg));
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    rt.spawn(pivotud_cli::server::serve(listener, svc));
    Server { base, hash, _rt: rt }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .into()
}

fn post(base: &str, path: &str, body: &str) -> (u16, String) {
    let mut r = agent()
        .post(format!("{base}{path}"))
        .header("Content-Type", "application/json")
        .send(body)
        .unwrap();
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

#[test]
fn http_endpoints() {
    let s = server();
    let mut r = agent().get(format!("{}/health", s.base)).call().unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let v: serde_json::Value = serde_json::from_str(&r.body_mut().read_to_string().unwrap()).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model"], s.hash.as_str());

    let (status, body) = post(&s.base, "/annotate", r#"{"text":"Dat is in hûs.","format":"conllu"}"#);
    assert_eq!(status, 200);
    let doc = parse_conllu(&body).unwrap();
    assert_eq!((doc.sentences.len(), doc.sentences[0].tokens.len()), (1, 5));

    let (status, body) = post(&s.base, "/annotate", r#"{"text":"Hy sliept.","format":"json"}"#);
    assert_eq!(status, 200);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["sentences"][0]["tokens"][0]["form"], "Hy");

    assert_eq!(post(&s.base, "/annotate", r#"{"text":"Hy","format":"xlsx"}"#).0, 400);
    assert_eq!(post(&s.base, "/annotate", r#"{"text":"   "}"#).0, 400);
    assert_eq!(post(&s.base, "/annotate", "not json").0, 400);
    assert_eq!(post(&s.base, "/annotate", r#"{"text":"Hy","setting":"sideways"}"#).0, 400);
    let (status, _) = post(&s.base, "/annotate", r#"{"text":"no conllu here","setting":"goldtok"}"#);
    assert_eq!(status, 400);
}

#[test]
fn http_stats_matches_corpus_stats() {
    let s = server();
    let corpus = grammar_corpus(15, 12);
    let text = serialize_conllu(&corpus).unwrap();
    let body = serde_json::json!({ "text": text, "report": "upos" }).to_string();
    let (status, got) = post(&s.base, "/stats", &body);
    assert_eq!(status, 200);
    assert_eq!(got, upos_frequencies_tsv(&upos_frequencies(&corpus).unwrap()));

    let body = serde_json::json!({ "text": text, "report": "cooc", "upos_filter": "ADP" }).to_string();
    let (status, got) = post(&s.base, "/stats", &body);
    assert_eq!(status, 200);
    assert_eq!(got, cooccurrence_tsv(&cooccurrence(&corpus, Upos::Adp, 1)));

    let raw = "Hy sliept yn it hûs.";
    let body = serde_json::json!({ "text": raw, "report": "upos" }).to_string();
    let (status, got) = post(&s.base, "/stats", &body);
    assert_eq!(status, 200);
    let annotated = model().annotate(AnnotateInput::Raw(raw), EvalSetting::RawText).unwrap();
    assert_eq!(got, upos_frequencies_tsv(&upos_frequencies(&annotated).unwrap()));

    assert_eq!(post(&s.base, "/stats", r#"{"text":"Hy"}"#).0, 400);
    assert_eq!(post(&s.base, "/stats", r#"{"text":"Hy","report":"wordcloud"}"#).0, 400);
    assert_eq!(post(&s.base, "/stats", r#"{"text":"Hy","report":"cooc","upos_filter":"XYZ"}"#).0, 400);
}

#[test]
fn service_refuses_missing_model() {
    let cfg = ServiceConfig {
        model_path: "/nonexistent/model.pivotud".into(),
        ..ServiceConfig::default()
    };
    assert!(Service::load(&cfg).is_err());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.pivotud");
    model().save(&p).unwrap();
    let cfg = ServiceConfig {
        model_path: p.clone(),
        ..ServiceConfig::default()
    };
    let svc = Service::load(&cfg).unwrap();
    assert_eq!(svc.model_hash(), model_hash(&std::fs::read(&p).unwrap()));
}
