use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::LabelMap;
use crate::error::{Error, Result};

pub const VALIDATION_LIST: &str = "validation_list.txt";
pub const TESTING_LIST: &str = "testing_list.txt";
pub const BACKGROUND_NOISE_DIR: &str = "_background_noise_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    /// The dataset's validation list.
    Val1,
    /// The dataset's testing list.
    Val2,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val1, Split::Val2];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val1 => "val1",
            Split::Val2 => "val2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "train" => Some(Split::Train),
            "val1" | "validation" => Some(Split::Val1),
            "val2" | "test" | "testing" => Some(Split::Val2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub path: PathBuf,
    /// Path relative to the dataset root, `/`-separated (`word/file.wav`).
    pub relative: String,
    pub word: String,
    pub split: Split,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub examples: Vec<Example>,
}

/// Per-word utterance counts in train / val1 / val2 order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitCounts(pub [usize; 3]);

impl SplitCounts {
    pub fn train(&self) -> usize {
        self.0[0]
    }

    pub fn val1(&self) -> usize {
        self.0[1]
    }

    pub fn val2(&self) -> usize {
        self.0[2]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    fn add(&mut self, other: &SplitCounts) {
        for i in 0..3 {
            self.0[i] += other.0[i];
        }
    }
}

/// Counts grouped as: dictionary words individually, all other words pooled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsReport {
    pub dictionary: Vec<(String, SplitCounts)>,
    pub other: SplitCounts,
    pub total: SplitCounts,
}

impl CountsReport {
    pub fn dictionary_train_total(&self) -> usize {
        self.dictionary.iter().map(|(_, c)| c.train()).sum()
    }

    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>8} {:>8} {:>8} {:>8}", "word", "train", "val1", "val2", "total");
        let mut line = |name: &str, c: &SplitCounts| {
            let _ = writeln!(s, "{:<12} {:>8} {:>8} {:>8} {:>8}", name, c.train(), c.val1(), c.val2(), c.total());
        };
        for (w, c) in &self.dictionary {
            line(w, c);
        }
        line("other words", &self.other);
        line("total", &self.total);
        s
    }
}

fn read_list(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().replace('\\', "/"))
        .filter(|l| !l.is_empty())
        .collect())
}

/// Discovers every `<root>/<word>/*.wav` and assigns it to a split using the
/// two list files; everything not listed is training data.
pub fn scan_dataset(root: &Path) -> Result<DatasetManifest> {
    let val_path = root.join(VALIDATION_LIST);
    let test_path = root.join(TESTING_LIST);
    if !val_path.is_file() || !test_path.is_file() {
        return Err(Error::MissingSplitLists(root.to_path_buf()));
    }
    let val = read_list(&val_path)?;
    let test = read_list(&test_path)?;

    let mut words: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !n.starts_with('_') && !n.starts_with('.'))
        })
        .collect();
    words.sort();

    let mut examples = Vec::new();
    for dir in words {
        let word = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().and_then(|x| x.to_str()).is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        files.sort();
        for path in files {
            let file = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let relative = format!("{word}/{file}");
            let split = if val.contains(&relative) {
                Split::Val1
            } else if test.contains(&relative) {
                Split::Val2
            } else {
                Split::Train
            };
            examples.push(Example {
                path,
                relative,
                word: word.clone(),
                split,
            });
        }
    }
    if examples.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        examples,
    })
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> Vec<&Example> {
        self.examples.iter().filter(|e| e.split == split).collect()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn counts_by_word(&self) -> BTreeMap<String, SplitCounts> {
        let mut out: BTreeMap<String, SplitCounts> = BTreeMap::new();
        for e in &self.examples {
            out.entry(e.word.clone()).or_default().0[e.split as usize] += 1;
        }
        out
    }

    pub fn counts_report(&self, labels: &LabelMap) -> CountsReport {
        let by_word = self.counts_by_word();
        let mut dictionary = Vec::new();
        let mut other = SplitCounts::default();
        let mut total = SplitCounts::default();
        for (word, c) in &by_word {
            total.add(c);
            if !labels.contains(word) {
                other.add(c);
            }
        }
        for word in labels.words() {
            dictionary.push((word.to_string(), by_word.get(word).cloned().unwrap_or_default()));
        }
        CountsReport {
            dictionary,
            other,
            total,
        }
    }

    /// Keeps only examples whose word satisfies `keep`.
    pub fn filter_words(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            root: self.root.clone(),
            examples: self.examples.iter().filter(|e| keep(&e.word)).cloned().collect(),
        }
    }

    /// Deterministic per-word stratified subset of about `target` examples,
    /// preserving the split assignment.
    pub fn stratified_subset(&self, target: usize, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        let total = self.examples.len().max(1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut by_group: BTreeMap<(String, Split), Vec<&Example>> = BTreeMap::new();
        for e in &self.examples {
            by_group.entry((e.word.clone(), e.split)).or_default().push(e);
        }
        let mut examples = Vec::new();
        for (_, mut group) in by_group {
            let take = ((group.len() * target) as f64 / total as f64).round() as usize;
            group.shuffle(&mut rng);
            examples.extend(group.into_iter().take(take.max(1)).cloned());
        }
        Self {
            root: self.root.clone(),
            examples,
        }
    }

    pub fn background_noise_files(&self) -> Vec<PathBuf> {
        let dir = self.root.join(BACKGROUND_NOISE_DIR);
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .into_iter()
            .flatten()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().and_then(|x| x.to_str()).is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        files.sort();
        files
    }
}
