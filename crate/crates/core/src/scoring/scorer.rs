//! Engine-side view of a backend: turns rendered prompts into calibrated
//! distributions, bounds the number of requests in flight, counts API calls
//! and caches prompt priors.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use super::backend::ScoringBackend;
use super::math;
use crate::error::{Error, Result};
use crate::lexicon::{PromptTemplate, WordLexicon};
use crate::task::{render, render_empty, Instance, TaskSpec};

pub const DEFAULT_MAX_CONCURRENCY: usize = 8;

/// Raw, prior and calibrated class distributions for one
/// (instance, template) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedDistribution {
    pub o: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl CalibratedDistribution {
    pub fn prediction(&self) -> usize {
        math::predict(&self.p)
    }

    pub fn mutual_information(&self) -> f64 {
        math::entropy(&self.q) - math::entropy(&self.p)
    }
}

/// API calls consumed so far. One scored text is one call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCalls {
    pub instance: u64,
    pub prior: u64,
}

impl ApiCalls {
    pub fn total(&self) -> u64 {
        self.instance + self.prior
    }
}

/// A prior entry as persisted in a cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEntry {
    pub task: String,
    pub space_index: usize,
    pub q: Vec<f64>,
}

type PriorSlot = Arc<Mutex<Option<Arc<[f64]>>>>;

/// Counting semaphore limiting concurrent backend requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

pub struct Scorer<'b> {
    backend: &'b dyn ScoringBackend,
    max_concurrency: usize,
    gate: Gate,
    instance_calls: AtomicU64,
    prior_calls: AtomicU64,
    priors: Mutex<HashMap<(String, usize), PriorSlot>>,
}

impl<'b> Scorer<'b> {
    pub fn new(backend: &'b dyn ScoringBackend) -> Self {
        Self::with_concurrency(backend, DEFAULT_MAX_CONCURRENCY)
    }

    pub fn with_concurrency(backend: &'b dyn ScoringBackend, max_concurrency: usize) -> Self {
        let max_concurrency = max_concurrency.max(1);
        Self {
            backend,
            max_concurrency,
            gate: Gate::new(max_concurrency),
            instance_calls: AtomicU64::new(0),
            prior_calls: AtomicU64::new(0),
            priors: Mutex::new(HashMap::new()),
        }
    }

    pub fn backend(&self) -> &dyn ScoringBackend {
        self.backend
    }

    pub fn max_concurrency(&self) -> usize {
        self.max_concurrency
    }

    pub fn calls(&self) -> ApiCalls {
        ApiCalls {
            instance: self.instance_calls.load(Ordering::Relaxed),
            prior: self.prior_calls.load(Ordering::Relaxed),
        }
    }

    fn logits(&self, task: &TaskSpec, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if !self.backend.supports(task.model_style) {
            return Err(Error::UnsupportedStyle(task.model_style.as_str()));
        }
        let rows = self
            .gate
            .run(|| self.backend.score(task.model_style, task.verbalizer.label_words(), texts))?;
        if rows.len() != texts.len() {
            return Err(Error::MalformedResponse(format!(
                "{} logit rows for {} texts",
                rows.len(),
                texts.len()
            )));
        }
        Ok(rows)
    }

    /// Softmax over label-word logits for each text. Counted as instance
    /// calls.
    pub fn raw_distributions(&self, task: &TaskSpec, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let batch = self.backend.max_batch().max(1);
        let chunks: Vec<&[String]> = texts.chunks(batch).collect();
        let scored = self.map_concurrent(chunks.len(), |i| {
            let rows = self.logits(task, chunks[i])?;
            self.instance_calls.fetch_add(chunks[i].len() as u64, Ordering::Relaxed);
            rows.iter().map(|r| math::softmax(r)).collect::<Result<Vec<_>>>()
        })?;
        Ok(scored.into_iter().flatten().collect())
    }

    pub fn raw_distribution(&self, task: &TaskSpec, text: &str) -> Result<Vec<f64>> {
        let mut rows = self.raw_distributions(task, &[text.to_owned()])?;
        Ok(rows.pop().expect("one row per text"))
    }

    /// The template's class distribution on empty input. Computed at most
    /// once per (task, template) for the lifetime of the scorer, even under
    /// concurrent first access.
    pub fn prior(&self, template: &PromptTemplate, task: &TaskSpec, lexicon: &WordLexicon) -> Result<Arc<[f64]>> {
        let slot = {
            let mut map = self.priors.lock().unwrap();
            map.entry((task.name.clone(), template.space_index))
                .or_default()
                .clone()
        };
        let mut guard = slot.lock().unwrap();
        if let Some(q) = guard.as_ref() {
            return Ok(q.clone());
        }
        let text = render_empty(template, task, lexicon)?;
        let rows = self.logits(task, &[text])?;
        self.prior_calls.fetch_add(1, Ordering::Relaxed);
        let q: Arc<[f64]> = math::softmax(&rows[0])?.into();
        *guard = Some(q.clone());
        Ok(q)
    }

    pub fn calibrated(
        &self,
        instance: &Instance,
        template: &PromptTemplate,
        task: &TaskSpec,
        lexicon: &WordLexicon,
    ) -> Result<CalibratedDistribution> {
        let mut out = self.calibrated_many(std::slice::from_ref(instance), template, task, lexicon)?;
        Ok(out.pop().expect("one distribution per instance"))
    }

    /// Calibrated distributions of every instance under one template,
    /// in instance order.
    pub fn calibrated_many(
        &self,
        instances: &[Instance],
        template: &PromptTemplate,
        task: &TaskSpec,
        lexicon: &WordLexicon,
    ) -> Result<Vec<CalibratedDistribution>> {
        let q = self.prior(template, task, lexicon)?;
        let texts = instances
            .iter()
            .map(|inst| render(inst, template, task, lexicon))
            .collect::<Result<Vec<_>>>()?;
        self.raw_distributions(task, &texts)?
            .into_iter()
            .map(|o| {
                let p = math::calibrate(&o, &q)?;
                Ok(CalibratedDistribution { o, q: q.to_vec(), p })
            })
            .collect()
    }

    /// Seeds the prior cache. Preloaded priors are not counted as calls.
    pub fn preload_priors(&self, entries: impl IntoIterator<Item = PriorEntry>) {
        let mut map = self.priors.lock().unwrap();
        for e in entries {
            map.insert((e.task, e.space_index), Arc::new(Mutex::new(Some(e.q.into()))));
        }
    }

    /// All priors known to the scorer, sorted by (task, space_index).
    pub fn export_priors(&self) -> Vec<PriorEntry> {
        let map = self.priors.lock().unwrap();
        let sorted: BTreeMap<_, _> = map
            .iter()
            .filter_map(|(k, slot)| slot.lock().unwrap().as_ref().map(|q| (k.clone(), q.to_vec())))
            .collect();
        sorted
            .into_iter()
            .map(|((task, space_index), q)| PriorEntry { task, space_index, q })
            .collect()
    }

    /// Runs `f(0..n)` on up to `max_concurrency` threads and returns the
    /// results in index order. Stops handing out work after the first
    /// error; the error with the lowest index is returned.
    pub fn map_concurrent<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        let workers = self.max_concurrency.min(n);
        if workers <= 1 {
            return (0..n).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let slots: Vec<Mutex<Option<Result<T>>>> = (0..n).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let r = f(i);
                    if r.is_err() {
                        failed.store(true, Ordering::Relaxed);
                    }
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        let mut out = Vec::with_capacity(n);
        for slot in slots {
            match slot.into_inner().unwrap() {
                Some(Ok(v)) => out.push(v),
                Some(Err(e)) => return Err(e),
                None => {}
            }
        }
        debug_assert_eq!(out.len(), n);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::build_space;
    use crate::scoring::SyntheticOracle;
    use crate::task::{Metric, ModelStyle, TaskFormat, Verbalizer};
    use std::time::Duration;

    fn task() -> TaskSpec {
        let v = Verbalizer::new(vec!["great".into(), "bad".into()]).unwrap();
        TaskSpec::new("toy", TaskFormat::Single, v, Metric::Accuracy, ModelStyle::Masked).unwrap()
    }

    /// Counts requests and records the peak number in flight.
    struct Probe {
        inner: SyntheticOracle,
        in_flight: AtomicUsize,
        peak: AtomicUsize,
        requests: AtomicUsize,
    }

    impl Probe {
        fn new() -> Self {
            Self {
                inner: SyntheticOracle::new(3),
                in_flight: AtomicUsize::new(0),
                peak: AtomicUsize::new(0),
                requests: AtomicUsize::new(0),
            }
        }
    }

    impl ScoringBackend for Probe {
        fn identity(&self) -> &str {
            "probe"
        }

        fn supports(&self, _style: ModelStyle) -> bool {
            true
        }

        fn max_batch(&self) -> usize {
            2
        }

        fn score(&self, style: ModelStyle, words: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            self.requests.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            self.inner.score(style, words, texts)
        }
    }

    #[test]
    fn in_flight_requests_are_bounded() {
        let probe = Probe::new();
        let scorer = Scorer::with_concurrency(&probe, 3);
        let texts: Vec<String> = (0..40).map(|i| format!("text {i}")).collect();
        let dists = scorer.raw_distributions(&task(), &texts).unwrap();
        assert_eq!(dists.len(), 40);
        assert!(probe.peak.load(Ordering::SeqCst) <= 3);
        assert_eq!(probe.requests.load(Ordering::SeqCst), 20);
        assert_eq!(scorer.calls().instance, 40);

        // order matches a sequential scorer
        let seq = Scorer::with_concurrency(&probe, 1);
        assert_eq!(seq.raw_distributions(&task(), &texts).unwrap(), dists);
    }

    #[test]
    fn prior_is_computed_once_under_concurrency() {
        let probe = Probe::new();
        let scorer = Scorer::with_concurrency(&probe, 8);
        let space = build_space(crate::lexicon::WordLexicon::from_words(&["it"], &["was"], &["so"]).unwrap()).unwrap();
        let t = space.template(0).unwrap();
        let priors = scorer
            .map_concurrent(16, |_| scorer.prior(&t, &task(), space.lexicon()))
            .unwrap();
        assert!(priors.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(scorer.calls().prior, 1);
        assert_eq!(probe.requests.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn preloaded_priors_skip_the_backend() {
        let oracle = SyntheticOracle::new(5);
        let space = build_space(crate::lexicon::WordLexicon::from_words(&["it"], &["was"], &["so", "very"]).unwrap()).unwrap();
        let first = Scorer::new(&oracle);
        let inst = Instance::single("fine film", 0);
        let a: Vec<_> = space
            .iter()
            .map(|t| first.calibrated(&inst, &t, &task(), space.lexicon()).unwrap())
            .collect();
        let cache = first.export_priors();
        assert_eq!(cache.len(), 2);

        let second = Scorer::new(&oracle);
        second.preload_priors(cache);
        let b: Vec<_> = space
            .iter()
            .map(|t| second.calibrated(&inst, &t, &task(), space.lexicon()).unwrap())
            .collect();
        assert_eq!(a, b);
        assert_eq!(second.calls(), ApiCalls { instance: 2, prior: 0 });
    }

    #[test]
    fn map_concurrent_reports_lowest_error() {
        let oracle = SyntheticOracle::new(0);
        let scorer = Scorer::with_concurrency(&oracle, 4);
        let r = scorer.map_concurrent(50, |i| if i == 7 { Err(Error::EmptyInput("x")) } else { Ok(i) });
        assert!(matches!(r, Err(Error::EmptyInput("x"))));
        let ok = scorer.map_concurrent(50, Ok).unwrap();
        assert_eq!(ok, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn unsupported_style() {
        struct MaskedOnly(SyntheticOracle);
        impl ScoringBackend for MaskedOnly {
            fn identity(&self) -> &str {
                "m"
            }
            fn supports(&self, style: ModelStyle) -> bool {
                style == ModelStyle::Masked
            }
            fn score(&self, s: ModelStyle, w: &[String], t: &[String]) -> Result<Vec<Vec<f64>>> {
                self.0.score(s, w, t)
            }
        }
        let b = MaskedOnly(SyntheticOracle::new(0));
        let scorer = Scorer::new(&b);
        let mut t = task();
        t.model_style = ModelStyle::NextToken;
        assert!(matches!(scorer.raw_distribution(&t, "x"), Err(Error::UnsupportedStyle("next_token"))));
    }
}
