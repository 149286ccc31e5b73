//! Acceptance checks. Runs without the libtest harness so that every check
//! prints one PASS/FAIL/SKIP line; the process fails if any check fails.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use guwen::bench::{
    self, bench_model, check_official_counts, load_bench, load_bench_dir, mock_model, radar,
    BenchConfig, Extractor, Gold, ModelConfig, Scorer,
};
use guwen::datagen::{
    filter_candidates, run_pipeline, training_config, DatagenConfig, FilterRules, IOPair,
    InstructionCandidate, PipelineStage, RejectReason, Status, TrainingStage,
};
use guwen::formats::{
    parse_entity_output, parse_slash_tags, EntityKeyAliases, EntityParseError, EntitySet, Task,
};
use guwen::metrics::{
    bleu, corpus_bleu, embed_score, prf_entities, prf_pos, prf_punct, EmbeddingProvider,
    MockEmbeddingProvider,
};
use guwen::textnorm::PunctInventory;

type Check = Result<Outcome, String>;

struct Criterion {
    n: u8,
    name: &'static str,
    check: fn() -> Check,
    limit: Duration,
}

enum Outcome {
    Pass(String),
    Skip(String),
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() < tol, || format!("{what}: got {a}, want {b} (tol {tol})"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

// Table rows of the worked POS example.
const POS_GOLD: &str = "四年/t 春/n ，/w 衞州吁/nr 弑/v 桓公/nr 而/c 立/v 。/w";
const POS_RESEGMENTED: &str = "四/m 年/t 春/t ，/w 衞/ns 州吁/nr 弑/v 桓公/nr 而/c 立/v 。/w";
const POS_EXACT: &str = "四年/t 春/n ，/w 衞州吁/nr 弑/v 桓公/nr 而/c 立/v 。/w";

fn pos_oracle() -> Check {
    let gold = parse_slash_tags(POS_GOLD, true).map_err(|e| e.to_string())?;
    let pred = parse_slash_tags(POS_RESEGMENTED, true).map_err(|e| e.to_string())?;
    let b = prf_pos(&gold, &pred);
    ensure(
        (b.counts.tp, b.counts.predicted, b.counts.gold) == (6, 11, 9),
        || format!("counts {:?}", b.counts),
    )?;
    let p = b.prf();
    close(p.precision, 6.0 / 11.0, 1e-9, "precision")?;
    close(p.recall, 6.0 / 9.0, 1e-9, "recall")?;
    close(p.f1, 0.6, 1e-9, "f1")?;
    let wenyan = parse_slash_tags(POS_EXACT, true).map_err(|e| e.to_string())?;
    let w = prf_pos(&gold, &wenyan).prf();
    close(w.f1, 1.0, 1e-9, "exact row f1")?;
    Ok(Outcome::Pass(format!("P={:.6} R={:.6} F1={:.6}", p.precision, p.recall, p.f1)))
}

const NER_ACCEPT: &str =
    "'characters': [], 'place': ['许州'], 'time': ['天成初'], 'official positions': ['同平章事']";
const NER_REJECT: &str = "天成初：时间，许州：地点，同平章事：官职。";

fn ner_fixtures() -> Check {
    let gold = parse_entity_output(NER_ACCEPT).map_err(|e| e.to_string())?;
    ensure(gold == EntitySet::new(&[], &["许州"], &["天成初"], &["同平章事"]), || {
        format!("parsed {gold:?}")
    })?;
    let own = prf_entities(&gold, &gold).item_prf().f1;
    close(own, 1.0, 1e-12, "self score")?;

    let parsed = parse_entity_output(NER_REJECT);
    ensure(parsed == Err(EntityParseError::NoStructureFound), || format!("reject parsed as {parsed:?}"))?;
    // Score through the benchmark path: extraction fails, prediction is empty.
    let extractor = Extractor::default();
    let ex = extractor.extract(Task::Ner, NER_REJECT);
    ensure(ex.failed, || "extraction did not fail".into())?;
    let scorer = Scorer {
        extractor: &extractor,
        embedder: None,
        options: Default::default(),
    };
    let s = scorer.score(Task::Ner, &Gold::Entities(gold), &ex.prediction);
    ensure(s.score == Some(0.0), || format!("reject scored {:?}", s.score))?;
    Ok(Outcome::Pass("accept F1=1, reject NoStructureFound F1=0".into()))
}

/// Reference corpus BLEU over character tokens, written independently of
/// the library: clipped counts via sorted n-gram lists, precisions combined
/// as a product.
fn oracle_corpus_bleu(pairs: &[(Vec<char>, Vec<char>)], n: usize) -> f64 {
    let (mut c_len, mut r_len) = (0usize, 0usize);
    let mut prod = 1.0f64;
    for k in 1..=n {
        let (mut hit, mut tot) = (0usize, 0usize);
        for (c, r) in pairs {
            let grams = |s: &[char]| -> Vec<String> {
                let mut v: Vec<String> = if s.len() >= k {
                    (0..=s.len() - k).map(|i| s[i..i + k].iter().collect()).collect()
                } else {
                    Vec::new()
                };
                v.sort();
                v
            };
            let cg = grams(c);
            let mut rg = grams(r);
            tot += cg.len();
            for g in cg {
                if let Some(pos) = rg.iter().position(|x| *x == g) {
                    rg.remove(pos);
                    hit += 1;
                }
            }
        }
        if hit == 0 {
            return 0.0;
        }
        prod *= hit as f64 / tot as f64;
    }
    for (c, r) in pairs {
        c_len += c.len();
        r_len += r.len();
    }
    let bp = if c_len >= r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    bp * prod.powf(1.0 / n as f64)
}

fn bleu_oracle() -> Check {
    const ALPHABET: &[char] = &['春', '眠', '不', '觉', '晓', '处', '闻', '啼', '鸟', '夜', '来', '风', '雨', '声'];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for _ in 0..50 {
        let r: Vec<char> = (0..rng.random_range(4..30)).map(|_| *ALPHABET.choose(&mut rng).unwrap()).collect();
        // candidates are edited copies of the reference so that higher-order
        // n-grams match
        let mut c: Vec<char> = r.iter().copied().filter(|_| rng.random_bool(0.85)).collect();
        for _ in 0..rng.random_range(0..4) {
            let at = rng.random_range(0..=c.len());
            c.insert(at, *ALPHABET.choose(&mut rng).unwrap());
        }
        if c.is_empty() {
            c.push(r[0]);
        }
        let cs: String = c.iter().collect();
        let rs: String = r.iter().collect();
        scores.push(bleu(&cs, &rs).map_err(|e| e.to_string())?);
        pairs.push((c, r));
    }
    let corpus = corpus_bleu(&scores).map_err(|e| e.to_string())?;
    let mut shown = Vec::new();
    for n in 1..=4 {
        let want = oracle_corpus_bleu(&pairs, n);
        close(corpus.bleu_n(n), want, 1e-6, &format!("corpus BLEU-{n}"))?;
        shown.push(format!("{:.4}", want));
    }
    let hand = bleu("春眠不晓", "春眠不觉晓").map_err(|e| e.to_string())?;
    close(hand.bleu_n(1), 0.7788, 1e-4, "hand case BLEU-1")?;
    Ok(Outcome::Pass(format!("corpus BLEU-1..4 = {}; hand case {:.4}", shown.join("/"), hand.bleu_n(1))))
}

const SENTENCE: &str = "四年春，衞州吁弑桓公而立。";

fn punctuation() -> Check {
    let inv = PunctInventory::builtin();
    let marks: Vec<&str> = inv
        .classes()
        .iter()
        .flat_map(|c| c.members.iter().map(String::as_str))
        .collect();
    let base: Vec<char> = "天地玄黄宇宙洪荒日月盈昃辰宿列张寒来暑往秋收冬藏".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..1000 {
        let mut s = String::new();
        let len = rng.random_range(1..40);
        for _ in 0..len {
            if rng.random_ratio(1, 4) {
                s.push_str(marks.choose(&mut rng).unwrap());
            }
            s.push(*base.choose(&mut rng).unwrap());
        }
        s.push_str(marks.choose(&mut rng).unwrap());
        let ann = inv.strip(&s);
        ensure(ann.reinsert() == s, || format!("string {i} {s:?} did not round-trip"))?;
        let f1 = prf_punct(&s, &s, inv).breakdown.prf().f1;
        ensure(f1 == 1.0, || format!("string {i} {s:?} gold-vs-gold F1 {f1}"))?;
    }
    let omitted = prf_punct(SENTENCE, "四年春衞州吁弑桓公而立。", inv).breakdown.prf().f1;
    close(omitted, 2.0 / 3.0, 1e-12, "comma omitted")?;
    let moved = prf_punct(SENTENCE, "四年，春衞州吁弑桓公而立。", inv).breakdown.prf().f1;
    close(moved, 0.5, 1e-12, "comma moved")?;
    Ok(Outcome::Pass(format!("1000 round trips; omitted {omitted:.6}, moved {moved:.6}")))
}

/// Brute force: full similarity matrix, then row and column maxima.
fn oracle_embed(c: &[Vec<f64>], r: &[Vec<f64>]) -> (f64, f64, f64) {
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum();
        let nb: f64 = b.iter().map(|x| x * x).sum();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb).sqrt()
        }
    };
    let sim: Vec<Vec<f64>> = c.iter().map(|u| r.iter().map(|v| cos(u, v)).collect()).collect();
    let mut p = 0.0;
    for row in &sim {
        p += row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    p /= c.len() as f64;
    let mut rec = 0.0;
    for j in 0..r.len() {
        rec += sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max);
    }
    rec /= r.len() as f64;
    let f = if p + rec > 0.0 { 2.0 * p * rec / (p + rec) } else { 0.0 };
    (p, rec, f)
}

fn embedding() -> Check {
    let tokens: Vec<String> = "山水云月风花雪夜江河湖海".chars().map(String::from).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..100 {
        let dims = rng.random_range(2..12);
        let table: HashMap<String, Vec<f64>> = tokens
            .iter()
            .map(|tok| (tok.clone(), (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let provider = MockEmbeddingProvider::from_table(table.clone()).map_err(|e| e.to_string())?;
        let pick = |rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..rng.random_range(1..10)).map(|_| tokens.choose(rng).unwrap().clone()).collect()
        };
        let (c, r) = (pick(&mut rng), pick(&mut rng));
        let got = embed_score(&c.concat(), &r.concat(), &provider).map_err(|e| e.to_string())?;
        let cv: Vec<Vec<f64>> = c.iter().map(|x| table[x].clone()).collect();
        let rv: Vec<Vec<f64>> = r.iter().map(|x| table[x].clone()).collect();
        let want = oracle_embed(&cv, &rv);
        ensure((got.precision, got.recall, got.f1) == want, || {
            format!("table {t}: got {got:?}, oracle {want:?}")
        })?;
        let same = embed_score(&c.concat(), &c.concat(), &provider).map_err(|e| e.to_string())?;
        ensure(same.f1 == 1.0, || format!("table {t}: identical strings F1 {}", same.f1))?;
    }
    let hashed = MockEmbeddingProvider::new(MockEmbeddingProvider::DEFAULT_DIMS);
    let s = embed_score("孤帆远影碧空尽", "孤帆远影碧空尽", &hashed).map_err(|e| e.to_string())?;
    ensure(s.f1 == 1.0, || format!("hashed identical F1 {}", s.f1))?;
    ensure(hashed.name() == "mock", || "provider name".into())?;
    Ok(Outcome::Pass("100 tables exact; identical strings F1=1".into()))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

const FILTER_ACCEPT: &str = "Perform named entity recognition on the given Classical Chinese text. Extract characters, place, time, and official positions, and return them in the following format: 'characters': [...], 'place': [...], 'time': [...], 'official positions': [...]. Classical Chinese text: 天成初，移镇许州，加同平章事。";
const FILTER_REJECT: &str =
    "Perform named entity recognition on the given Classical Chinese text: 天成初，移镇许州，加同平章事。";

fn datagen_determinism() -> Check {
    let config = DatagenConfig::load(&data("datagen.toml")).map_err(|e| e.to_string())?;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_pipeline(&config, a.path(), PipelineStage::Integrate).map_err(|e| e.to_string())?;
    run_pipeline(&config, b.path(), PipelineStage::Integrate).map_err(|e| e.to_string())?;
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    ensure(fa.iter().any(|(n, _)| n == "dataset.jsonl"), || "no dataset.jsonl".into())?;
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        ensure(na == nb && ba == bb, || format!("{na} differs between runs"))?;
    }
    ensure(fa.len() == fb.len(), || "file sets differ".into())?;

    let sample = IOPair {
        id: "ner:1".into(),
        input: "天成初，移镇许州，加同平章事。".into(),
        output: NER_ACCEPT.into(),
        task: Task::Ner,
        source: "ner".into(),
    };
    let (acc, rej) = filter_candidates(
        vec![
            InstructionCandidate::manual("accept", Task::Ner, FILTER_ACCEPT),
            InstructionCandidate::manual("reject", Task::Ner, FILTER_REJECT),
        ],
        &[sample],
        &FilterRules::default(),
        &EntityKeyAliases::default(),
    );
    ensure(acc.len() == 1 && acc[0].id == "accept", || format!("accepted {acc:?}"))?;
    ensure(
        rej.len() == 1 && rej[0].status == Status::Rejected(RejectReason::NoStructuredSchema),
        || format!("rejected {rej:?}"),
    )?;
    Ok(Outcome::Pass(format!(
        "{} files identical, {} records; filter accept/reject as expected",
        fa.len(),
        report.counts["integrate.records"]
    )))
}

fn training_configs() -> Check {
    let want_pt = [
        ("per_device_train_batch_size", "16"),
        ("gradient_accumulation_steps", "1"),
        ("learning_rate", "1.0e-4"),
        ("num_train_epochs", "1"),
        ("lr_scheduler_type", "cosine"),
        ("warmup_ratio", "0.1"),
    ];
    let want_sft = [
        ("per_device_train_batch_size", "8"),
        ("gradient_accumulation_steps", "2"),
        ("learning_rate", "1.0e-4"),
        ("num_train_epochs", "1"),
        ("lr_scheduler_type", "cosine"),
        ("warmup_ratio", "0.1"),
    ];
    ensure(training_config(TrainingStage::Pretrain) == want_pt, || "pretrain values differ".into())?;
    ensure(training_config(TrainingStage::Sft) == want_sft, || "sft values differ".into())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("sft.txt");
    guwen::datagen::export_training_config(TrainingStage::Sft, &path).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let lines: Vec<String> = want_sft.iter().map(|(k, v)| format!("{k}={v}")).collect();
    ensure(text.lines().eq(lines.iter().map(String::as_str)), || format!("exported {text:?}"))?;
    Ok(Outcome::Pass("pretrain and sft: 6 keys each".into()))
}

fn bench_determinism() -> Check {
    let items = load_bench(&data("bench.jsonl"))
        .map_err(|e| e.to_string())?
        .into_valid()
        .map_err(|e| e.to_string())?;
    let cache = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = BenchConfig {
        seed: 3,
        cache_dir: Some(cache.path().to_path_buf()),
        ..BenchConfig::default()
    };
    for spec in ["strong=mock:0.05", "middle=mock:0.3", "weak=mock:0.7"] {
        config.models.push(ModelConfig::parse_mock(spec)?);
    }
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = bench::run_bench(&config, &items, a.path()).map_err(|e| e.to_string())?;
    let second = bench::run_bench(&config, &items, b.path()).map_err(|e| e.to_string())?;
    ensure(first.iter().all(|o| o.summary.requests > 0), || "cold run made no requests".into())?;
    for o in &second {
        ensure(o.summary.requests == 0 && o.summary.cache_hits == items.len(), || {
            format!("{}: warm run {:?}", o.run.model, o.summary)
        })?;
    }
    let (ra, rb) = (dir_bytes(&a.path().join("runs")), dir_bytes(&b.path().join("runs")));
    ensure(ra.len() == 3 && ra == rb, || "EvalRun files differ between runs".into())?;

    // Count calls on the client itself with the warm cache.
    let resources = config.resources().map_err(|e| e.to_string())?;
    let opts = config.run_options(resources.templates.clone()).map_err(|e| e.to_string())?;
    let client = mock_model("strong", &items, &resources.templates, 0.05, config.seed);
    let again = bench_model("strong", &items, &client, &resources, &opts, &config);
    ensure(client.calls() == 0, || format!("{} client calls with warm cache", client.calls()))?;
    ensure(again.run == first[0].run, || "warm EvalRun differs".into())?;

    let runs: Vec<_> = first.into_iter().map(|o| o.run).collect();
    let payload = radar(&runs);
    ensure(payload.normalized, || "radar not normalized".into())?;
    let mut columns = 0;
    for (j, task) in payload.tasks.iter().enumerate() {
        let raw: Vec<f64> = runs.iter().map(|r| r.tasks[task].headline.unwrap()).collect();
        let norm: Vec<f64> = payload.series.iter().map(|s| s.values[j].unwrap()).collect();
        let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        if lo == hi {
            continue;
        }
        columns += 1;
        for (x, y) in raw.iter().zip(&norm) {
            if *x == lo {
                ensure(*y == 0.0, || format!("{task}: min maps to {y}"))?;
            }
            if *x == hi {
                ensure(*y == 1.0, || format!("{task}: max maps to {y}"))?;
            }
        }
        for i in 0..raw.len() {
            for k in 0..raw.len() {
                ensure(raw[i].partial_cmp(&raw[k]) == norm[i].partial_cmp(&norm[k]), || {
                    format!("{task}: ranking changed")
                })?;
            }
        }
    }
    ensure(columns > 0, || "every task tied".into())?;
    Ok(Outcome::Pass(format!(
        "3 models, {} items, warm rerun identical with 0 calls; {columns} radar axes checked",
        items.len()
    )))
}

fn official_counts() -> Check {
    let Some(path) = std::env::var_os("GUWEN_OFFICIAL_BENCH").map(PathBuf::from) else {
        return Ok(Outcome::Skip("GUWEN_OFFICIAL_BENCH not set; official files absent".into()));
    };
    let loaded = if path.is_dir() {
        load_bench_dir(&path).map_err(|e| e.to_string())?
    } else {
        vec![(path.display().to_string(), load_bench(&path).map_err(|e| e.to_string())?)]
    };
    let mut items = Vec::new();
    for (name, b) in loaded {
        ensure(b.malformed.is_empty(), || format!("{name}: {} malformed items", b.malformed.len()))?;
        items.extend(b.items);
    }
    let (rows, ok) = check_official_counts(&items);
    let shown: Vec<String> = rows.iter().map(|r| format!("{}={}/{}", r.task, r.found, r.expected)).collect();
    ensure(ok, || format!("counts differ: {} total {}", shown.join(" "), items.len()))?;
    Ok(Outcome::Pass(format!("{} total {}", shown.join(" "), items.len())))
}

fn main() {
    let checks = [
        Criterion { n: 1, name: "POS scoring of the worked example", check: pos_oracle, limit: Duration::from_secs(1) },
        Criterion { n: 2, name: "NER accept/reject fixtures", check: ner_fixtures, limit: Duration::from_secs(1) },
        Criterion { n: 3, name: "BLEU against reference implementation", check: bleu_oracle, limit: Duration::from_secs(5) },
        Criterion { n: 4, name: "punctuation round trip and alignment", check: punctuation, limit: Duration::from_secs(5) },
        Criterion { n: 5, name: "embedding score against brute force", check: embedding, limit: Duration::from_secs(5) },
        Criterion { n: 6, name: "datagen determinism and filter", check: datagen_determinism, limit: Duration::from_secs(10) },
        Criterion { n: 7, name: "training config export", check: training_configs, limit: Duration::from_secs(1) },
        Criterion { n: 8, name: "bench determinism and radar", check: bench_determinism, limit: Duration::from_secs(10) },
        Criterion { n: 9, name: "official benchmark item counts", check: official_counts, limit: Duration::from_secs(30) },
    ];
    let mut failed = 0;
    for Criterion { n, name, check, limit } in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let took = start.elapsed();
        let result = match result {
            Ok(_) if took > limit => Err(format!("took {took:?}, limit {limit:?}")),
            r => r,
        };
        match result {
            Ok(Outcome::Pass(detail)) => println!("criterion {n} PASS [{took:.2?}] {name}: {detail}"),
            Ok(Outcome::Skip(why)) => {
                println!("criterion {n} SKIP [{took:.2?}] {name}: {why}");
                eprintln!("warning: criterion {n} skipped: {why}");
            }
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL [{took:.2?}] {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed or skipped");
}
