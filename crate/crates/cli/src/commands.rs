use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use litcoref::detector::{detect_mentions, load_tagger, save_tagger, train_tagger, write_training_log};
use litcoref::gender::{infer_gender, GenderReport};
use litcoref::harness::{
    antecedent_distance_distribution, capitalized_corpus, corpus_stats, gender_config, generate_synthetic_corpus,
    length_sweep, short_config, window_split_config,
};
use litcoref::io::{
    encode_embeddings, load_firstname_lexicon, load_gender_clue_lexicon, write_document, FirstNameLexicon,
    GenderClueLexicon,
};
use litcoref::metrics::{CorefCounts, MetricReport, Prf};
use litcoref::model::{ChainRef, Document, Mention};
use litcoref::pairs::{train_pair_scorer, PairScorerModel};
use litcoref::pipeline::{
    resolve_corpus, score_chains, span_chains, NoisyOracleScorer, OracleScorer, PairScore, ResolveConfig,
};
use litcoref::resolver::{antecedent_error_report, ErrorTaxonomy};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::corpus::{embedding_dim, file_stem, load_corpus, load_document};
use crate::manifest::ManifestBuilder;
use crate::{Cli, Command, Failure, Family, Format, ScorerArgs};

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>, m: &mut ManifestBuilder) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    m.outputs.push(path.to_path_buf());
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))
}

fn apply_seed(cfg: &mut RunConfig, seed: u64) {
    cfg.tagger.seed = seed;
    cfg.tagger_train.seed = seed;
    cfg.pair_train.seed = seed;
    cfg.synth.seed = seed;
    cfg.capitalized.seed = seed;
}

fn resolve_config(cfg: &RunConfig) -> ResolveConfig {
    ResolveConfig {
        pipeline: cfg.pipeline.clone(),
        conjunctions: cfg.conjunctions.clone(),
    }
}

fn make_scorer(args: &ScorerArgs, seed: u64, m: &mut ManifestBuilder) -> Result<Box<dyn PairScore>, Failure> {
    if let Some(p) = &args.scorer {
        m.inputs.push(p.clone());
        return Ok(Box::new(PairScorerModel::load(p)?));
    }
    if args.oracle {
        return Ok(Box::new(OracleScorer));
    }
    if let Some(error_rate) = args.noisy_oracle {
        if !(0.0..=1.0).contains(&error_rate) || !(0.0..0.5).contains(&args.margin) {
            return Err(Failure::Usage("--noisy-oracle needs a rate in [0, 1] and --margin in [0, 0.5)".into()));
        }
        return Ok(Box::new(NoisyOracleScorer {
            error_rate,
            margin: args.margin,
            seed,
        }));
    }
    Err(Failure::Usage("one of --scorer, --oracle or --noisy-oracle is required".into()))
}

fn print_report(out: &mut impl Write, r: &MetricReport) -> std::io::Result<()> {
    writeln!(out, "metric\tprecision\trecall\tf1")?;
    for (name, p) in [("MUC", r.muc), ("B3", r.b_cubed), ("CEAFe", r.ceaf_e)] {
        writeln!(out, "{name}\t{:.6}\t{:.6}\t{:.6}", p.precision, p.recall, p.f1)?;
    }
    writeln!(out, "CoNLL\t\t\t{:.6}", r.conll_f1)
}

fn stdout_report(r: &MetricReport) -> Result<(), Failure> {
    print_report(&mut std::io::stdout().lock(), r).map_err(|e| Failure::Runtime(e.to_string()))
}

/// Copy of `doc` whose mentions carry the predicted chains: chains of two
/// or more mentions become `c0`, `c1`, ... and the rest are singletons.
fn with_predicted_chains(doc: &Document, chains: &[Vec<usize>]) -> Document {
    let mut mentions: Vec<Mention> = doc.mentions.clone();
    for m in &mut mentions {
        m.chain = ChainRef::Singleton;
    }
    for (k, c) in chains.iter().filter(|c| c.len() > 1).enumerate() {
        for &i in c {
            mentions[i].chain = ChainRef::entity(format!("c{k}"));
        }
    }
    let mut out = Document::assemble(doc.doc_id.clone(), doc.tokens.clone(), mentions, &BTreeMap::new());
    out.embeddings = doc.embeddings.clone();
    out
}

fn default_manifest(command: &Command) -> PathBuf {
    let beside = |p: &Path| {
        let mut s = p.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    };
    match command {
        Command::TrainDetector { out, .. } | Command::TrainPairs { out, .. } => beside(out),
        Command::Detect { out_dir, .. }
        | Command::Resolve { out_dir, .. }
        | Command::LengthSweep { out_dir, .. }
        | Command::Gender { out_dir, .. }
        | Command::Synth { out_dir, .. } => out_dir.join("manifest.json"),
        _ => PathBuf::from("litcoref-manifest.json"),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::TrainDetector { .. } => "train-detector",
        Command::Detect { .. } => "detect",
        Command::TrainPairs { .. } => "train-pairs",
        Command::Resolve { .. } => "resolve",
        Command::Score { .. } => "score",
        Command::Stats { .. } => "stats",
        Command::AntecedentDist { .. } => "antecedent-dist",
        Command::LengthSweep { .. } => "length-sweep",
        Command::Gender { .. } => "gender",
        Command::Synth { .. } => "synth",
    }
}

pub fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let (mut cfg, cfg_path) = RunConfig::load(cli.config.as_deref()).map_err(Failure::Input)?;
    if let Some(s) = cli.seed {
        apply_seed(&mut cfg, s);
    }
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let mut m = ManifestBuilder::new(command_name(&cli.command));
    m.seed = cli.seed;
    if let Some(p) = cfg_path {
        m.inputs.push(p);
    }
    let manifest_path = cli.manifest.clone().unwrap_or_else(|| default_manifest(&cli.command));
    let seed = cli.seed.unwrap_or(cfg.pair_train.seed);
    let code = dispatch(cli.command, &mut cfg, seed, &mut m)?;
    m.config = serde_json::to_value(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    let manifest = m
        .finish(rayon::current_num_threads())
        .map_err(|e| Failure::Runtime(format!("manifest digests: {e}")))?;
    let text = json(&manifest)?;
    if let Some(dir) = manifest_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;
    Ok(code)
}

fn dispatch(command: Command, cfg: &mut RunConfig, seed: u64, m: &mut ManifestBuilder) -> Result<ExitCode, Failure> {
    match command {
        Command::Validate { inputs } => validate(&inputs, m),
        Command::TrainDetector { inputs, level, out, log } => {
            let (corpus, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            cfg.tagger.embedding_dim = embedding_dim(&corpus)?;
            cfg.tagger.level = level;
            let trained = train_tagger(&corpus, level, cfg.tagger.clone(), &cfg.tagger_train)?;
            save_tagger(&out, &trained.model)?;
            m.outputs.push(out);
            if let Some(p) = log {
                let mut buf = Vec::new();
                write_training_log(&mut buf, &trained.log)?;
                write_file(&p, buf, m)?;
            }
            println!(
                "level {level}: best epoch {} of {}, validation F1 {:.4}",
                trained.best_epoch,
                trained.log.len(),
                trained.best_validation_f1
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Detect {
            inputs,
            level0,
            level1,
            out_dir,
        } => {
            let (corpus, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            let t0 = load_tagger(&level0)?;
            m.inputs.push(level0);
            let t1 = level1.as_ref().map(|p| load_tagger(p)).transpose()?;
            m.inputs.extend(level1);
            let detections = corpus
                .par_iter()
                .map(|d| detect_mentions(&t0, t1.as_ref(), d))
                .collect::<litcoref::Result<Vec<_>>>()?;
            let (mut tp, mut np, mut ng) = (0usize, 0usize, 0usize);
            for (gold, det) in corpus.iter().zip(&detections) {
                let pred: Vec<(usize, usize)> = det.document.mentions.iter().map(Mention::span).collect();
                let g: Vec<(usize, usize)> = gold.mentions.iter().map(Mention::span).collect();
                tp += pred.iter().filter(|s| g.contains(s)).count();
                np += pred.len();
                ng += g.len();
                let path = out_dir.join(format!("{}.json", file_stem(&det.document.doc_id)));
                write_file(&path, write_document(&det.document)?, m)?;
            }
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let counts = Prf::new(ratio(tp, np), ratio(tp, ng));
            println!(
                "documents\t{}\npredicted\t{np}\ngold\t{ng}\nprecision\t{:.4}\nrecall\t{:.4}\nf1\t{:.4}",
                corpus.len(),
                counts.precision,
                counts.recall,
                counts.f1
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::TrainPairs { inputs, out, log } => {
            let (corpus, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            cfg.pipeline.embedding_dim = embedding_dim(&corpus)?;
            let trained = train_pair_scorer(&corpus, &cfg.pipeline, &cfg.pair_train)?;
            trained.model.save(&out)?;
            m.outputs.push(out);
            if let Some(p) = log {
                let mut s = String::new();
                for e in &trained.log {
                    s.push_str(&serde_json::to_string(e).map_err(|e| Failure::Runtime(e.to_string()))?);
                    s.push('\n');
                }
                write_file(&p, s, m)?;
            }
            println!("best epoch {} of {}", trained.best_epoch, trained.log.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Resolve {
            inputs,
            strategy,
            gold_mentions,
            detector,
            detector_level1,
            scorer,
            out_dir,
            taxonomy,
        } => {
            let (gold, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            cfg.pipeline.clustering_strategy = strategy.into();
            let scorer = make_scorer(&scorer, seed, m)?;
            let working: Vec<Document> = if gold_mentions {
                gold.clone()
            } else {
                let p = detector.expect("clap requires --detector without --gold-mentions");
                let t0 = load_tagger(&p)?;
                m.inputs.push(p);
                let t1 = detector_level1.as_ref().map(|p| load_tagger(p)).transpose()?;
                m.inputs.extend(detector_level1);
                gold.par_iter()
                    .map(|d| detect_mentions(&t0, t1.as_ref(), d).map(|x| x.document))
                    .collect::<litcoref::Result<_>>()?
            };
            let rc = resolve_config(cfg);
            let resolutions = resolve_corpus(&working, scorer.as_ref(), &rc)?;
            let mut counts = CorefCounts::default();
            let mut tax = ErrorTaxonomy::default();
            for ((g, w), r) in gold.iter().zip(&working).zip(&resolutions) {
                counts.add(&score_chains(g, w, &r.chains));
                if gold_mentions {
                    tax.add(&antecedent_error_report(&r.decisions, g, &rc.pipeline));
                }
                let stem = file_stem(&w.doc_id);
                write_file(
                    &out_dir.join(format!("{stem}.json")),
                    write_document(&with_predicted_chains(w, &r.chains))?,
                    m,
                )?;
                write_file(&out_dir.join(format!("{stem}.chains.json")), json(&r.output(&w.doc_id))?, m)?;
            }
            println!("strategy\t{}", rc.pipeline.clustering_strategy);
            stdout_report(&counts.report())?;
            if taxonomy && gold_mentions {
                println!("{}", json(&tax)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { gold, pred, format } => {
            let (g, read_g) = load_corpus(&gold)?;
            let (p, read_p) = load_corpus(&pred)?;
            m.inputs.extend(read_g);
            m.inputs.extend(read_p);
            let by_id: HashMap<&str, &Document> = p.iter().map(|d| (d.doc_id.as_str(), d)).collect();
            let mut counts = CorefCounts::default();
            for d in &g {
                let Some(pd) = by_id.get(d.doc_id.as_str()) else {
                    return Err(Failure::Input(format!("no prediction for document {}", d.doc_id)));
                };
                let gs = span_chains(d, &d.partition());
                let ps = span_chains(pd, &pd.partition());
                counts.add(&CorefCounts::of(&gs, &ps));
            }
            let r = counts.report();
            match format {
                Format::Tsv => stdout_report(&r)?,
                Format::Json => println!("{}", json(&r)?),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { inputs, format } => {
            let (corpus, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            let s = corpus_stats(&corpus);
            match format {
                Format::Tsv => print!("{}", s.to_tsv()),
                Format::Json => println!("{}", json(&s)?),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::AntecedentDist { inputs, format } => {
            let (corpus, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            let d = antecedent_distance_distribution(&corpus);
            match format {
                Format::Tsv => print!("{}", d.to_tsv()),
                Format::Json => println!("{}", json(&d)?),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::LengthSweep {
            inputs,
            lengths,
            strategy,
            scorer,
            out_dir,
        } => {
            if lengths.contains(&0) {
                return Err(Failure::Usage("sample lengths must be positive".into()));
            }
            let (corpus, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            cfg.pipeline.clustering_strategy = strategy.into();
            let scorer = make_scorer(&scorer, seed, m)?;
            let sweep = length_sweep(&corpus, &lengths, scorer.as_ref(), &resolve_config(cfg))?;
            let tsv = sweep.to_tsv();
            write_file(&out_dir.join("sweep.tsv"), &tsv, m)?;
            write_file(&out_dir.join("sweep.jsonl"), sweep.to_jsonl()?, m)?;
            write_file(&out_dir.join("sweep.dat"), sweep.to_gnuplot(), m)?;
            print!("{tsv}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Gender {
            inputs,
            pred_dir,
            firstnames,
            clues,
            threshold,
            out_dir,
        } => {
            let (gold, read) = load_corpus(&inputs)?;
            m.inputs.extend(read);
            let names = match &firstnames {
                Some(p) => {
                    m.inputs.push(p.clone());
                    load_firstname_lexicon(p)?
                }
                None => FirstNameLexicon::default(),
            };
            let clue_lex = match &clues {
                Some(p) => {
                    m.inputs.push(p.clone());
                    load_gender_clue_lexicon(p)?
                }
                None => GenderClueLexicon::french_default(),
            };
            if let Some(t) = threshold {
                cfg.gender.name_ratio_threshold = t;
            }
            let t = cfg.gender.name_ratio_threshold;
            if !(0.5..=1.0).contains(&t) {
                return Err(Failure::Usage(format!("name ratio threshold {t} outside [0.5, 1]")));
            }
            let mut report = GenderReport::default();
            let mut lines = String::new();
            for d in &gold {
                let chains = match &pred_dir {
                    Some(dir) => {
                        let path = dir.join(format!("{}.json", file_stem(&d.doc_id)));
                        let (p, r) = load_document(&path)?;
                        m.inputs.extend(r);
                        project_chains(d, &p)
                    }
                    None => d.partition(),
                };
                let staged = infer_gender(d, &chains, &clue_lex, &names, t);
                report.add_document(&staged, d);
                lines.push_str(
                    &serde_json::to_string(&serde_json::json!({"doc_id": d.doc_id, "stages": staged}))
                        .map_err(|e| Failure::Runtime(e.to_string()))?,
                );
                lines.push('\n');
            }
            let tsv = report.to_tsv();
            write_file(&out_dir.join("gender.tsv"), &tsv, m)?;
            write_file(&out_dir.join("assignments.jsonl"), lines, m)?;
            print!("{tsv}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { family, out_dir } => {
            let s = cfg.synth.seed;
            let (docs, names) = match family {
                Family::Capitalized => (capitalized_corpus(&cfg.capitalized)?, None),
                other => {
                    let sc = match other {
                        Family::WindowSplit => window_split_config(s),
                        Family::Short => short_config(s),
                        Family::Gender => gender_config(s),
                        _ => cfg.synth.clone(),
                    };
                    cfg.synth = sc;
                    let c = generate_synthetic_corpus(&cfg.synth)?;
                    (c.documents, Some(c.first_names))
                }
            };
            for d in &docs {
                let stem = file_stem(&d.doc_id);
                write_file(&out_dir.join(format!("{stem}.json")), write_document(d)?, m)?;
                write_file(&out_dir.join(format!("{stem}.emb")), encode_embeddings(d.embeddings()?), m)?;
            }
            if let Some(n) = names {
                write_file(&out_dir.join("firstnames.tsv"), n.to_tsv(), m)?;
            }
            println!("wrote {} documents to {}", docs.len(), out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Predicted chains of `pred` expressed over the mention ids of `gold`,
/// matched by span. Gold mentions absent from the prediction stay alone.
fn project_chains(gold: &Document, pred: &Document) -> Vec<Vec<usize>> {
    let by_span: HashMap<(usize, usize), usize> = gold.mentions.iter().map(|m| (m.span(), m.id)).collect();
    let mut used = vec![false; gold.mentions.len()];
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for c in pred.partition() {
        let mapped: Vec<usize> = c
            .iter()
            .filter_map(|&i| by_span.get(&pred.mentions[i].span()).copied())
            .filter(|&g| !std::mem::replace(&mut used[g], true))
            .collect();
        if !mapped.is_empty() {
            chains.push(mapped);
        }
    }
    chains.extend((0..used.len()).filter(|&i| !used[i]).map(|i| vec![i]));
    chains
}

fn validate(inputs: &[PathBuf], m: &mut ManifestBuilder) -> Result<ExitCode, Failure> {
    let mut bad = 0;
    for p in crate::corpus::expand(inputs)? {
        m.inputs.push(p.clone());
        match load_document(&p) {
            Ok((d, _)) => {
                let report = litcoref::model::validate_document(&d);
                if report.is_empty() {
                    println!("{}\tok\t{} tokens\t{} mentions", p.display(), d.n_tokens(), d.mentions.len());
                } else {
                    bad += 1;
                    println!("{}\tinvalid\n{report}", p.display());
                }
            }
            Err(Failure::Input(msg)) => {
                bad += 1;
                println!("{}\tinvalid\t{msg}", p.display());
            }
            Err(e) => return Err(e),
        }
    }
    if bad > 0 {
        eprintln!("litcoref: {bad} invalid document(s)");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
