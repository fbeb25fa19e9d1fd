//! Corpus builders and independent oracles shared by the CLI tests and the acceptance run.
#![allow(dead_code)]

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtcurate::corpus::{write_corpus, Document, LanguageTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_mtcurate"))
}

pub fn mtcurate(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin()).args(args).current_dir(cwd).output().expect("spawn mtcurate")
}

pub fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core")
}

pub fn repo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn save_docs(docs: &[Document], path: &Path) {
    write_corpus(docs, path).expect("write corpus");
}

pub fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    const C: &[u8] = b"bdfghklmnprstvz";
    const V: &[u8] = b"aeiou";
    let syllables = rng.random_range(2..4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(C[rng.random_range(0..C.len())] as char);
        w.push(V[rng.random_range(0..V.len())] as char);
    }
    w
}

pub fn vocabulary(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| pseudo_word(rng)).collect()
}

pub fn random_words(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect()
}

/// Exact Jaccard of word `n`-shingle sets.
pub fn shingle_jaccard(a: &str, b: &str, n: usize) -> f64 {
    let sh = |t: &str| -> HashSet<Vec<String>> {
        let w: Vec<String> = t.split_whitespace().map(str::to_lowercase).collect();
        if w.len() < n {
            return [w].into_iter().collect();
        }
        w.windows(n).map(|x| x.to_vec()).collect()
    };
    let (x, y) = (sh(a), sh(b));
    let inter = x.intersection(&y).count() as f64;
    let union = x.union(&y).count() as f64;
    if union == 0.0 {
        1.0
    } else {
        inter / union
    }
}

pub struct PlantedCorpus {
    pub docs: Vec<Document>,
    /// (original id, near-duplicate id)
    pub planted: Vec<(String, String)>,
}

/// 80 unrelated documents plus 20 one-word edits of the first 20.
pub fn planted_duplicates(seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(&mut rng, 3000);
    let mut docs = Vec::new();
    for i in 0..80 {
        let words = random_words(&mut rng, &vocab, 150);
        docs.push(Document::new(format!("doc{i:03}"), LanguageTag::EN, words.join(" ")));
    }
    let mut planted = Vec::new();
    for i in 0..20 {
        let mut words: Vec<String> = docs[i].text.split(' ').map(String::from).collect();
        let pos = rng.random_range(0..words.len());
        words[pos] = format!("{}x", pseudo_word(&mut rng));
        let id = format!("near{i:03}");
        planted.push((docs[i].id.clone(), id.clone()));
        docs.push(Document::new(id, LanguageTag::EN, words.join(" ")));
    }
    PlantedCorpus { docs, planted }
}

pub fn natural_sentence(rng: &mut ChaCha8Rng) -> String {
    let det = ["the", "a"];
    let noun = ["cat", "dog", "child", "teacher", "river", "house", "garden", "market", "book", "window"];
    let adj = ["small", "old", "green", "quiet"];
    let verb = ["sat", "ran", "saw", "liked"];
    let prep = ["on", "near", "under", "with"];
    let pick = |rng: &mut ChaCha8Rng, xs: &[&'static str]| xs[rng.random_range(0..xs.len())];
    let words = [
        pick(rng, &det),
        pick(rng, &adj),
        pick(rng, &noun),
        pick(rng, &verb),
        pick(rng, &prep),
        pick(rng, &det),
        pick(rng, &noun),
    ];
    words.join(" ")
}

pub fn gibberish(rng: &mut ChaCha8Rng) -> String {
    let letters = b"abcdefghijklmnopqrstuvwxyz";
    (0..7)
        .map(|_| {
            let l = rng.random_range(3..9);
            (0..l).map(|_| letters[rng.random_range(0..letters.len())] as char).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Training text for the LM plus 90 natural and 10 gibberish documents (ids `g*`).
pub fn perplexity_corpus(seed: u64) -> (Vec<Document>, Vec<Document>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = (0..400).map(|i| Document::new(format!("t{i}"), LanguageTag::EN, natural_sentence(&mut rng))).collect();
    let mut docs: Vec<Document> =
        (0..90).map(|i| Document::new(format!("n{i:02}"), LanguageTag::EN, natural_sentence(&mut rng))).collect();
    for i in 0..10 {
        docs.push(Document::new(format!("g{i:02}"), LanguageTag::EN, gibberish(&mut rng)));
    }
    (train, docs)
}

/// Reads one fenced block at the start of `s`; returns (content, rest).
fn read_fence(s: &str) -> Option<(String, &str)> {
    let ticks = s.chars().take_while(|&c| c == '`').count();
    if ticks < 3 {
        return None;
    }
    let body = &s[ticks..];
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'`' {
            let start = i;
            while i < bytes.len() && bytes[i] == b'`' {
                i += 1;
            }
            if i - start >= ticks {
                let mut inner = &body[..start];
                if inner.len() >= 2 && inner.starts_with(' ') && inner.ends_with(' ') {
                    inner = &inner[1..inner.len() - 1];
                }
                return Some((inner.to_string(), &body[start + ticks..]));
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Parses a fusion prompt back into (source, candidates).
pub fn extract_fusion(prompt: &str, n: usize) -> Option<(String, Vec<String>)> {
    let (_, after) = prompt.split_once(" segment:\n")?;
    let (source, mut rest) = read_fence(after)?;
    rest = rest.strip_prefix("\n\nThe multiple ")?;
    let (_, tail) = rest.split_once(" translations:")?;
    rest = tail;
    let mut out = Vec::new();
    for i in 1..=n {
        rest = rest.strip_prefix(&format!("\n{i}. "))?;
        let (c, r) = read_fence(rest)?;
        out.push(c);
        rest = r;
    }
    rest.is_empty().then_some((source, out))
}

/// chrF by brute force: n-grams as Strings, matches by linear search.
pub fn chrf_brute(hyp: &str, reference: &str) -> f64 {
    let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let grams = |s: &[char], n: usize| -> Vec<String> {
        if s.len() < n {
            return Vec::new();
        }
        (0..=s.len() - n).map(|i| s[i..i + n].iter().collect()).collect()
    };
    let (mut sum, mut used) = (0.0, 0);
    for n in 1..=6 {
        let (hg, rg) = (grams(&h, n), grams(&r, n));
        if hg.is_empty() || rg.is_empty() {
            continue;
        }
        let mut pool = rg.clone();
        let mut hits = 0usize;
        for g in &hg {
            if let Some(pos) = pool.iter().position(|x| x == g) {
                pool.swap_remove(pos);
                hits += 1;
            }
        }
        let p = hits as f64 / hg.len() as f64;
        let rc = hits as f64 / rg.len() as f64;
        if p + rc > 0.0 {
            sum += 5.0 * p * rc / (4.0 * p + rc);
        }
        used += 1;
    }
    if used == 0 {
        0.0
    } else {
        100.0 * sum / used as f64
    }
}

pub const CLEAN_SENTENCES: [&str; 100] = [
    "The committee will publish its findings next spring.",
    "She walked to the station before the rain started.",
    "Our team reviewed the contract and found two errors.",
    "Fresh bread is delivered to the bakery every morning.",
    "The museum opens late on the first Friday of each month.",
    "He forgot his umbrella at the office yesterday.",
    "Several villages lost power during the storm.",
    "The recipe calls for three eggs and a cup of flour.",
    "Please send the signed form back by Thursday.",
    "Children under twelve must be accompanied by an adult.",
    "The river froze early this winter.",
    "A new bridge will connect the two districts.",
    "The orchestra rehearsed the symphony for six weeks.",
    "Most passengers slept through the night flight.",
    "The library extended its opening hours during exams.",
    "Farmers expect a good harvest after the wet spring.",
    "The software update fixed a memory leak.",
    "Her grandmother taught her how to knit scarves.",
    "The hotel offers free breakfast to all guests.",
    "Traffic was heavy on the coastal road this morning.",
    "The manager approved the budget for the new project.",
    "Scientists measured the temperature of the lake daily.",
    "The festival attracts visitors from many countries.",
    "He repaired the old bicycle with spare parts.",
    "The students presented their research to the board.",
    "A quiet street runs behind the central market.",
    "The doctor recommended rest and plenty of water.",
    "Our neighbors adopted a puppy last week.",
    "The painting was sold at auction for a record price.",
    "Heavy snow closed the mountain pass overnight.",
    "The company plans to hire twenty engineers.",
    "She wrote a letter to thank her former teacher.",
    "The train to the airport leaves every fifteen minutes.",
    "Local volunteers cleaned the beach on Saturday.",
    "The report highlights rising costs in the housing sector.",
    "He practices the piano for an hour after dinner.",
    "The garden is full of roses in early summer.",
    "A small boat drifted toward the harbor.",
    "The conference will be held online this year.",
    "They celebrated their anniversary at a seaside restaurant.",
    "The new policy takes effect at the start of the quarter.",
    "Our cat sleeps on the windowsill in the afternoon.",
    "The engineer explained how the turbine works.",
    "Tickets for the concert sold out within an hour.",
    "The city council voted to expand the bus network.",
    "He reads the newspaper while drinking his coffee.",
    "The hikers reached the summit just before sunset.",
    "The bakery on the corner closes at six.",
    "A sudden gust of wind knocked over the sign.",
    "The translation was checked by two native speakers.",
    "She keeps her notes in a green leather folder.",
    "The factory reduced its water use by a third.",
    "Our flight was delayed because of fog.",
    "The professor answered every question patiently.",
    "Wild strawberries grow along the forest path.",
    "The shop offers a discount to students.",
    "The lighthouse has guided ships for two centuries.",
    "He moved to a smaller apartment near the park.",
    "The exhibition explores the history of printing.",
    "Rain is expected across the north on Monday.",
    "The startup raised funding from three investors.",
    "She learned to swim when she was five.",
    "The old castle now hosts a music school.",
    "Engineers inspected the tunnel for cracks.",
    "The cafe serves soup made from local vegetables.",
    "Our guide spoke four languages fluently.",
    "The election results will be announced tonight.",
    "A family of ducks crossed the road slowly.",
    "The hospital opened a new wing for children.",
    "He keeps a diary of every trip he takes.",
    "The pharmacy is closed on public holidays.",
    "The team celebrated after winning the final.",
    "Fog covered the valley until late morning.",
    "The author signed copies of her latest novel.",
    "New trees were planted along the avenue.",
    "The printer on the second floor is out of paper.",
    "They shared a pot of tea on the balcony.",
    "The lecture covered the basics of statistics.",
    "The ferry carries cars and bicycles across the bay.",
    "He thanked the nurses for their kindness.",
    "A heat wave is forecast for the weekend.",
    "The school introduced a course on coding.",
    "The market sells cheese from nearby farms.",
    "Her presentation impressed the visiting experts.",
    "The kettle whistled while they set the table.",
    "The village square fills with stalls on Sundays.",
    "Workers finished painting the fence by noon.",
    "The journal accepted his article last month.",
    "A rainbow appeared over the hills after the shower.",
    "The clinic offers vaccinations without an appointment.",
    "She found an old map in her grandfather's desk.",
    "The stadium can hold forty thousand spectators.",
    "The bus driver greeted every passenger warmly.",
    "They restored the mosaic floor of the chapel.",
    "The data was stored on an encrypted drive.",
    "He bought a secondhand guitar from a neighbor.",
    "The wind turbines turn slowly on calm days.",
    "The chef prepared a special menu for the holiday.",
    "Snow melted quickly once the sun came out.",
    "The archive holds letters from the early settlers.",
];

/// 50 strings with an n-gram repeated at least three times back to back.
pub fn repetitive_strings(seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(&mut rng, 500);
    (0..50)
        .map(|i| {
            let n = 2 + i % 3;
            let copies = 3 + rng.random_range(0..3);
            let unit = random_words(&mut rng, &vocab, n);
            let (pre, post) = (rng.random_range(0..6), rng.random_range(0..6));
            let mut words = random_words(&mut rng, &vocab, pre);
            for _ in 0..copies {
                words.extend(unit.iter().cloned());
            }
            words.extend(random_words(&mut rng, &vocab, post));
            words.join(" ")
        })
        .collect()
}
