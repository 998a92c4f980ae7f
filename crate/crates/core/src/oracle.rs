//! A lazily decided free ultrafilter on the natural numbers.
//!
//! The oracle answers "is this set qualified?" one query at a time and keeps
//! every answer consistent with every earlier one: a positive answer commits
//! the set, a negative answer commits its complement, and the intersection of
//! all commitments must stay infinite. Queries whose sets carry an exact
//! classification (finite, cofinite, eventually periodic) are decided exactly
//! by reasoning modulo finite sets; anything else is decided by counting
//! members of the running intersection in the window `[horizon/2, horizon)`,
//! and is flagged heuristic.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, MutexGuard};

use fixedbitset::FixedBitSet;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_THRESHOLD: usize = 8;
const FINGERPRINT_WINDOW: u64 = 4096;
/// Longest residue pattern kept exact before falling back to sampling.
pub(crate) const PATTERN_CAP: usize = 1 << 16;
/// Longest preperiod materialized by classification algebra.
pub(crate) const PREPERIOD_CAP: u64 = 1 << 16;

pub type EvalFn = Arc<dyn Fn(u64) -> bool + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("descriptor `{label}` contradicts its classification at index {index}")]
    InconsistentDescriptor { label: String, index: u64 },
    #[error("intersection of commitments has {witnesses} witnesses below the horizon after `{label}`")]
    HorizonExhausted { label: String, witnesses: u64 },
    #[error("oracle is poisoned by an earlier horizon exhaustion")]
    Poisoned,
    #[error("replayed answer for `{label}` contradicts an exact decision")]
    ReplayConflict { label: String },
    #[error("malformed replay log: {0}")]
    BadReplay(String),
}

/// What is known about a set without evaluating it everywhere.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// No member `>= bound`.
    Finite(u64),
    /// Every `n >= bound` is a member.
    Cofinite(u64),
    /// Membership is `preperiod[n]` below `preperiod.len()`, then repeats
    /// `period` starting at that offset.
    PeriodicUnion {
        preperiod: Vec<bool>,
        period: Vec<bool>,
    },
    Unknown,
}

/// Shape of a set modulo finite sets, which is all an ultrafilter sees.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Essential {
    Empty,
    All,
    /// Indexed by `n mod len`.
    Pattern(Vec<bool>),
    Unknown,
}

impl Classification {
    fn essential(&self) -> Essential {
        match self {
            Classification::Finite(_) => Essential::Empty,
            Classification::Cofinite(_) => Essential::All,
            Classification::PeriodicUnion { preperiod, period } => {
                let pat = residue_pattern(preperiod.len() as u64, period);
                if pat.iter().all(|&b| !b) {
                    Essential::Empty
                } else if pat.iter().all(|&b| b) {
                    Essential::All
                } else {
                    Essential::Pattern(pat)
                }
            }
            Classification::Unknown => Essential::Unknown,
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Classification::Unknown)
    }

    /// Exact infinitude, when the classification decides it.
    pub fn is_infinite(&self) -> Option<bool> {
        match self.essential() {
            Essential::Empty => Some(false),
            Essential::All | Essential::Pattern(_) => Some(true),
            Essential::Unknown => None,
        }
    }

    fn complement(&self) -> Classification {
        match self {
            Classification::Finite(b) => Classification::Cofinite(*b),
            Classification::Cofinite(b) => Classification::Finite(*b),
            Classification::PeriodicUnion { preperiod, period } => Classification::PeriodicUnion {
                preperiod: preperiod.iter().map(|b| !b).collect(),
                period: period.iter().map(|b| !b).collect(),
            },
            Classification::Unknown => Classification::Unknown,
        }
    }
}

/// Pattern indexed by `n mod period.len()` for a period that starts at `offset`.
fn residue_pattern(offset: u64, period: &[bool]) -> Vec<bool> {
    let p = period.len() as u64;
    (0..p)
        .map(|r| period[((r + p - offset % p) % p) as usize])
        .collect()
}

fn and_patterns(a: &[bool], b: &[bool]) -> Option<Vec<bool>> {
    let p = a.len().lcm(&b.len());
    if p > PATTERN_CAP {
        return None;
    }
    Some((0..p).map(|r| a[r % a.len()] && b[r % b.len()]).collect())
}

/// A subset of ℕ: a total membership test plus whatever is known about its
/// shape.
#[derive(Clone)]
pub struct SetDescriptor {
    eval: EvalFn,
    classification: Classification,
    label: String,
}

impl fmt::Debug for SetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetDescriptor")
            .field("label", &self.label)
            .field("classification", &self.classification)
            .finish()
    }
}

impl SetDescriptor {
    pub fn new(
        label: impl Into<String>,
        classification: Classification,
        eval: impl Fn(u64) -> bool + Send + Sync + 'static,
    ) -> Self {
        SetDescriptor {
            eval: Arc::new(eval),
            classification,
            label: label.into(),
        }
    }

    /// An opaque predicate; every decision about it is heuristic.
    pub fn predicate(label: impl Into<String>, f: impl Fn(u64) -> bool + Send + Sync + 'static) -> Self {
        Self::new(label, Classification::Unknown, f)
    }

    pub fn finite(label: impl Into<String>, members: &[u64]) -> Self {
        let mut m = members.to_vec();
        m.sort_unstable();
        m.dedup();
        let bound = m.last().map_or(0, |&x| x + 1);
        Self::new(label, Classification::Finite(bound), move |n| m.binary_search(&n).is_ok())
    }

    pub fn singleton(k: u64) -> Self {
        Self::finite(format!("{{{k}}}"), &[k])
    }

    /// `{n : n >= bound}`.
    pub fn cofinite_from(bound: u64) -> Self {
        Self::new(format!("{{n >= {bound}}}"), Classification::Cofinite(bound), move |n| n >= bound)
    }

    pub fn periodic(label: impl Into<String>, preperiod: Vec<bool>, period: Vec<bool>) -> Self {
        assert!(!period.is_empty(), "empty period");
        let (pre, per) = (preperiod.clone(), period.clone());
        let eval = move |n: u64| {
            let l = pre.len() as u64;
            if n < l {
                pre[n as usize]
            } else {
                per[((n - l) % per.len() as u64) as usize]
            }
        };
        Self::new(label, Classification::PeriodicUnion { preperiod, period }, eval)
    }

    /// `{n : n ≡ r (mod p)}`.
    pub fn residue_class(r: u64, p: u64) -> Self {
        let period = (0..p).map(|k| k == r % p).collect();
        Self::periodic(format!("{{n ≡ {r} mod {p}}}"), Vec::new(), period)
    }

    pub fn evens() -> Self {
        Self::periodic("evens", Vec::new(), vec![true, false])
    }

    pub fn odds() -> Self {
        Self::periodic("odds", Vec::new(), vec![false, true])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn classification(&self) -> &Classification {
        &self.classification
    }

    pub fn contains(&self, n: u64) -> bool {
        (self.eval)(n)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn complement(&self) -> Self {
        let f = self.eval.clone();
        SetDescriptor {
            eval: Arc::new(move |n| !f(n)),
            classification: self.classification.complement(),
            label: format!("¬({})", self.label),
        }
    }

    pub fn intersect(&self, other: &SetDescriptor) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let eval: EvalFn = Arc::new(move |n| f(n) && g(n));
        let classification = intersect_classification(&self.classification, &other.classification, &eval);
        SetDescriptor {
            eval,
            classification,
            label: format!("({} ∩ {})", self.label, other.label),
        }
    }

    pub fn union(&self, other: &SetDescriptor) -> Self {
        self.complement().intersect(&other.complement()).complement().with_label(format!(
            "({} ∪ {})",
            self.label, other.label
        ))
    }

    /// Shared evaluation handle, for building derived descriptors.
    pub fn eval_fn(&self) -> EvalFn {
        self.eval.clone()
    }

    fn fingerprint(&self, horizon: u64) -> u64 {
        let mut h = DefaultHasher::new();
        self.label.hash(&mut h);
        for n in 0..horizon.min(FINGERPRINT_WINDOW) {
            self.contains(n).hash(&mut h);
        }
        h.finish()
    }

    /// Spot-checks the classification against `eval`.
    fn validate(&self) -> Result<(), OracleError> {
        let bad = |index| OracleError::InconsistentDescriptor {
            label: self.label.clone(),
            index,
        };
        match &self.classification {
            Classification::Finite(b) => {
                if let Some(n) = (*b..b.saturating_add(8)).find(|&n| self.contains(n)) {
                    return Err(bad(n));
                }
            }
            Classification::Cofinite(b) => {
                if let Some(n) = (*b..b.saturating_add(8)).find(|&n| !self.contains(n)) {
                    return Err(bad(n));
                }
            }
            Classification::PeriodicUnion { preperiod, period } => {
                let l = preperiod.len() as u64;
                for n in 0..l.min(8) {
                    if self.contains(n) != preperiod[n as usize] {
                        return Err(bad(n));
                    }
                }
                let span = (2 * period.len() as u64).min(32);
                for k in 0..span {
                    if self.contains(l + k) != period[(k % period.len() as u64) as usize] {
                        return Err(bad(l + k));
                    }
                }
            }
            Classification::Unknown => {}
        }
        Ok(())
    }
}

fn intersect_classification(a: &Classification, b: &Classification, eval: &EvalFn) -> Classification {
    use Classification::*;
    match (a, b) {
        (Finite(x), Finite(y)) => Finite(*x.min(y)),
        (Finite(x), _) | (_, Finite(x)) => Finite(*x),
        (Cofinite(x), Cofinite(y)) => Cofinite(*x.max(y)),
        (Unknown, _) | (_, Unknown) => Unknown,
        (Cofinite(c), PeriodicUnion { preperiod, period }) | (PeriodicUnion { preperiod, period }, Cofinite(c)) => {
            let start = (*c).max(preperiod.len() as u64);
            periodic_from(start, residue_pattern(preperiod.len() as u64, period), eval)
        }
        (
            PeriodicUnion {
                preperiod: p1,
                period: q1,
            },
            PeriodicUnion {
                preperiod: p2,
                period: q2,
            },
        ) => {
            let start = (p1.len() as u64).max(p2.len() as u64);
            match and_patterns(
                &residue_pattern(p1.len() as u64, q1),
                &residue_pattern(p2.len() as u64, q2),
            ) {
                Some(pat) => periodic_from(start, pat, eval),
                None => Unknown,
            }
        }
    }
}

/// Builds a periodic classification whose residue pattern holds from `start`.
pub(crate) fn periodic_from(start: u64, pattern: Vec<bool>, eval: &EvalFn) -> Classification {
    if start > PREPERIOD_CAP || pattern.len() > PATTERN_CAP {
        return Classification::Unknown;
    }
    let p = pattern.len() as u64;
    let preperiod = (0..start).map(|n| eval(n)).collect();
    let period = (0..p).map(|k| pattern[((start + k) % p) as usize]).collect();
    Classification::PeriodicUnion { preperiod, period }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionMode {
    Exact,
    Heuristic,
}

/// One line of the decision log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub label: String,
    pub answer: bool,
    pub mode: DecisionMode,
    /// Members of the committed intersection below the horizon, modulo the
    /// finite sets ignored by exact reasoning.
    pub witness_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub commitments: usize,
    pub horizon: u64,
    /// Witness count below the horizon after each prefix of the commitment
    /// log; the empty prefix has `horizon` witnesses.
    pub prefix_witnesses: Vec<u64>,
    pub witnesses: u64,
    pub heuristic_decisions: Vec<String>,
    pub failures: Vec<String>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub horizon: u64,
    pub threshold: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            horizon: DEFAULT_HORIZON,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl OracleConfig {
    pub fn with_horizon(horizon: u64) -> Self {
        OracleConfig {
            horizon,
            ..Self::default()
        }
    }

    /// Default configuration with `LAMBDA_HORIZON` applied when set.
    pub fn from_env() -> Self {
        let horizon = std::env::var("LAMBDA_HORIZON")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(DEFAULT_HORIZON);
        Self::with_horizon(horizon)
    }
}

/// Answers to re-impose, keyed by query label in log order.
#[derive(Clone, Debug, Default)]
pub struct ReplayLog {
    answers: HashMap<String, VecDeque<bool>>,
}

impl ReplayLog {
    pub fn from_records(records: &[DecisionRecord]) -> Self {
        let mut answers: HashMap<String, VecDeque<bool>> = HashMap::new();
        for r in records {
            answers.entry(r.label.clone()).or_default().push_back(r.answer);
        }
        ReplayLog { answers }
    }

    pub fn from_json_lines(text: &str) -> Result<Self, OracleError> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<DecisionRecord>(l).map_err(|e| OracleError::BadReplay(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_records(&records))
    }

    fn take(&mut self, label: &str) -> Option<bool> {
        self.answers.get_mut(label).and_then(VecDeque::pop_front)
    }
}

/// The simulated ultrafilter and its commitment log.
pub struct UltrafilterOracle {
    cfg: OracleConfig,
    committed: Vec<SetDescriptor>,
    /// Residue pattern of the exactly classified commitments.
    pattern: Vec<bool>,
    /// Intersection of the heuristic commitments on `[0, horizon)`.
    mask: Option<FixedBitSet>,
    log: Vec<DecisionRecord>,
    cache: HashMap<(String, u64), bool>,
    replay: Option<ReplayLog>,
    poisoned: bool,
}

impl UltrafilterOracle {
    pub fn new(cfg: OracleConfig) -> Self {
        UltrafilterOracle {
            cfg,
            committed: Vec::new(),
            pattern: vec![true],
            mask: None,
            log: Vec::new(),
            cache: HashMap::new(),
            replay: None,
            poisoned: false,
        }
    }

    pub fn with_replay(cfg: OracleConfig, replay: ReplayLog) -> Self {
        let mut o = Self::new(cfg);
        o.replay = Some(replay);
        o
    }

    pub fn config(&self) -> OracleConfig {
        self.cfg
    }

    pub fn horizon(&self) -> u64 {
        self.cfg.horizon
    }

    pub fn committed(&self) -> &[SetDescriptor] {
        &self.committed
    }

    pub fn decision_log(&self) -> &[DecisionRecord] {
        &self.log
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    fn in_intersection(&self, n: u64) -> bool {
        self.pattern[(n % self.pattern.len() as u64) as usize]
            && self.mask.as_ref().is_none_or(|m| m.contains(n as usize))
    }

    /// Members of `extra ∩ intersection` in the sampling window, stopping
    /// once `stop_at` are found.
    fn window_count(&self, extra: impl Fn(u64) -> bool, stop_at: usize) -> usize {
        let h = self.cfg.horizon;
        let mut count = 0;
        for n in h / 2..h {
            if self.in_intersection(n) && extra(n) {
                count += 1;
                if count >= stop_at {
                    break;
                }
            }
        }
        count
    }

    fn witness_count(&self) -> u64 {
        let h = self.cfg.horizon;
        match &self.mask {
            None => {
                let p = self.pattern.len() as u64;
                let ones = self.pattern.iter().filter(|&&b| b).count() as u64;
                let partial = (0..h % p).filter(|&r| self.pattern[r as usize]).count() as u64;
                (h / p) * ones + partial
            }
            Some(_) => (0..h).filter(|&n| self.in_intersection(n)).count() as u64,
        }
    }

    /// Whether committing `s` (or its complement when `answer` is false)
    /// leaves an infinite exact intersection.
    fn admits(&self, essential: &Essential, answer: bool) -> bool {
        match essential {
            Essential::Empty => !answer,
            Essential::All => answer,
            Essential::Pattern(ps) => {
                let ps: Vec<bool> = ps.iter().map(|&b| b == answer).collect();
                and_patterns(&self.pattern, &ps).map_or(true, |both| both.iter().any(|&b| b))
            }
            Essential::Unknown => true,
        }
    }

    /// Decides whether `s` is qualified and commits either `s` or its
    /// complement.
    pub fn is_qualified(&mut self, s: &SetDescriptor) -> Result<bool, OracleError> {
        if self.poisoned {
            return Err(OracleError::Poisoned);
        }
        s.validate()?;
        let theta = self.cfg.threshold;
        let essential = s.classification.essential();

        // (answer, exact?)
        let mut exact_pattern = None;
        let (computed, exact) = match &essential {
            Essential::Empty => (false, true),
            Essential::All => (true, true),
            Essential::Pattern(ps) => match and_patterns(&self.pattern, ps) {
                Some(both) if self.mask.is_none() => {
                    let ans = both.iter().any(|&b| b);
                    exact_pattern = Some(ps.clone());
                    (ans, true)
                }
                Some(_) => {
                    exact_pattern = Some(ps.clone());
                    let ps = ps.clone();
                    let c = self.window_count(|n| ps[(n % ps.len() as u64) as usize], theta);
                    (c >= theta, false)
                }
                None => (self.window_count(|n| s.contains(n), theta) >= theta, false),
            },
            Essential::Unknown => {
                let key = (s.label.clone(), s.fingerprint(self.cfg.horizon));
                match self.cache.get(&key) {
                    Some(&ans) => (ans, false),
                    None => {
                        let ans = self.window_count(|n| s.contains(n), theta) >= theta;
                        self.cache.insert(key, ans);
                        (ans, false)
                    }
                }
            }
        };

        let answer = match self.replay.as_mut().and_then(|r| r.take(&s.label)) {
            Some(forced) if forced != computed && exact && !self.admits(&essential, forced) => {
                return Err(OracleError::ReplayConflict { label: s.label.clone() })
            }
            Some(forced) => forced,
            None => computed,
        };

        // Commit s or its complement.
        match (&essential, exact_pattern) {
            (Essential::Empty | Essential::All, _) => {}
            (_, Some(ps)) => {
                let ps: Vec<bool> = if answer { ps } else { ps.iter().map(|b| !b).collect() };
                self.pattern = and_patterns(&self.pattern, &ps).expect("pattern within cap");
            }
            _ => {
                let h = self.cfg.horizon as usize;
                let mask = self.mask.get_or_insert_with(|| {
                    let mut m = FixedBitSet::with_capacity(h);
                    m.insert_range(..);
                    m
                });
                for n in 0..h {
                    if mask.contains(n) && s.contains(n as u64) != answer {
                        mask.set(n, false);
                    }
                }
            }
        }
        self.committed.push(if answer { s.clone() } else { s.complement() });

        let witnesses = self.witness_count();
        self.log.push(DecisionRecord {
            label: s.label.clone(),
            answer,
            mode: if exact {
                DecisionMode::Exact
            } else {
                DecisionMode::Heuristic
            },
            witness_count: witnesses,
        });
        if witnesses < theta as u64 {
            self.poisoned = true;
            return Err(OracleError::HorizonExhausted {
                label: s.label.clone(),
                witnesses,
            });
        }
        Ok(answer)
    }

    /// Recomputes witness counts for every prefix of the commitment log.
    pub fn check_consistency(&self) -> ConsistencyReport {
        let h = self.cfg.horizon;
        let mut replica = UltrafilterOracle::new(self.cfg);
        let mut prefix_witnesses = Vec::with_capacity(self.committed.len());
        let mut failures = Vec::new();
        for (i, c) in self.committed.iter().enumerate() {
            match c.classification.essential() {
                Essential::Empty => {
                    failures.push(format!("commitment {i} `{}` is finite", c.label));
                }
                Essential::All => {}
                Essential::Pattern(ps) => match and_patterns(&replica.pattern, &ps) {
                    Some(p) => replica.pattern = p,
                    None => replica.and_mask(c),
                },
                Essential::Unknown => replica.and_mask(c),
            }
            let w = replica.witness_count();
            if w < self.cfg.threshold as u64 {
                failures.push(format!(
                    "prefix ending at commitment {i} `{}` has {w} witnesses below {h}",
                    c.label
                ));
            }
            prefix_witnesses.push(w);
        }
        let heuristic_decisions = self
            .log
            .iter()
            .filter(|r| r.mode == DecisionMode::Heuristic)
            .map(|r| r.label.clone())
            .collect();
        ConsistencyReport {
            commitments: self.committed.len(),
            horizon: h,
            witnesses: prefix_witnesses.last().copied().unwrap_or(h),
            prefix_witnesses,
            heuristic_decisions,
            failures,
        }
    }

    fn and_mask(&mut self, s: &SetDescriptor) {
        let h = self.cfg.horizon as usize;
        let mask = self.mask.get_or_insert_with(|| {
            let mut m = FixedBitSet::with_capacity(h);
            m.insert_range(..);
            m
        });
        for n in 0..h {
            if mask.contains(n) && !s.contains(n as u64) {
                mask.set(n, false);
            }
        }
    }
}

/// Shared handle to one oracle; every query goes through its lock, which
/// fixes a single commit order.
#[derive(Clone)]
pub struct Oracle(Arc<Mutex<UltrafilterOracle>>);

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oracle({:p})", Arc::as_ptr(&self.0))
    }
}

impl Default for Oracle {
    fn default() -> Self {
        Self::new(OracleConfig::default())
    }
}

impl Oracle {
    pub fn new(cfg: OracleConfig) -> Self {
        Oracle(Arc::new(Mutex::new(UltrafilterOracle::new(cfg))))
    }

    pub fn from_state(state: UltrafilterOracle) -> Self {
        Oracle(Arc::new(Mutex::new(state)))
    }

    pub fn with_horizon(horizon: u64) -> Self {
        Self::new(OracleConfig::with_horizon(horizon))
    }

    pub fn lock(&self) -> MutexGuard<'_, UltrafilterOracle> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn is_qualified(&self, s: &SetDescriptor) -> Result<bool, OracleError> {
        self.lock().is_qualified(s)
    }

    pub fn check_consistency(&self) -> ConsistencyReport {
        self.lock().check_consistency()
    }

    pub fn decision_log(&self) -> Vec<DecisionRecord> {
        self.lock().decision_log().to_vec()
    }

    pub fn decisions_made(&self) -> usize {
        self.lock().decision_log().len()
    }

    pub fn horizon(&self) -> u64 {
        self.lock().horizon()
    }

    pub fn same_as(&self, other: &Oracle) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofinite_true_finite_false() {
        let mut o = UltrafilterOracle::new(OracleConfig::default());
        assert!(o.is_qualified(&SetDescriptor::cofinite_from(5)).unwrap());
        assert!(!o.is_qualified(&SetDescriptor::finite("{0,1,2}", &[0, 1, 2])).unwrap());
        assert!(o.decision_log().iter().all(|r| r.mode == DecisionMode::Exact));
    }

    #[test]
    fn evens_then_odds_flip() {
        let mut o = UltrafilterOracle::new(OracleConfig::default());
        let b = o.is_qualified(&SetDescriptor::evens()).unwrap();
        assert_eq!(o.is_qualified(&SetDescriptor::odds()).unwrap(), !b);
        // default tie-break commits the queried set
        assert!(b);
    }

    #[test]
    fn singletons_are_never_qualified() {
        let mut o = UltrafilterOracle::new(OracleConfig::default());
        for k in 0..100 {
            assert!(!o.is_qualified(&SetDescriptor::singleton(k)).unwrap());
        }
    }

    #[test]
    fn fresh_consistency_report() {
        let o = UltrafilterOracle::new(OracleConfig::default());
        let r = o.check_consistency();
        assert_eq!(r.commitments, 0);
        assert_eq!(r.witnesses, DEFAULT_HORIZON);
        assert!(r.is_consistent());
    }

    #[test]
    fn consistency_after_commitments() {
        let mut o = UltrafilterOracle::new(OracleConfig::default());
        o.is_qualified(&SetDescriptor::evens()).unwrap();
        o.is_qualified(&SetDescriptor::cofinite_from(10)).unwrap();
        let r = o.check_consistency();
        assert!(r.witnesses >= DEFAULT_THRESHOLD as u64);
        assert!(r.is_consistent());
        assert!(!o.is_qualified(&SetDescriptor::odds()).unwrap());
        let r = o.check_consistency();
        assert!(r.is_consistent());
        assert_eq!(o.decision_log().last().unwrap().answer, false);
    }

    #[test]
    fn inconsistent_descriptor_is_rejected() {
        let mut o = UltrafilterOracle::new(OracleConfig::default());
        let liar = SetDescriptor::new("liar", Classification::Finite(3), |n| n % 2 == 0);
        assert!(matches!(
            o.is_qualified(&liar),
            Err(OracleError::InconsistentDescriptor { .. })
        ));
    }

    #[test]
    fn heuristic_decisions_are_flagged_and_stable() {
        let mut o = UltrafilterOracle::new(OracleConfig::with_horizon(2000));
        let sq = SetDescriptor::predicate("mult3", |n| n % 3 == 0);
        assert!(o.is_qualified(&sq).unwrap());
        assert_eq!(o.decision_log()[0].mode, DecisionMode::Heuristic);
        assert!(o.is_qualified(&sq).unwrap());
        // complement of a committed set is refused
        assert!(!o.is_qualified(&sq.complement()).unwrap());
    }

    #[test]
    fn sparse_heuristic_set_exhausts_horizon() {
        let mut o = UltrafilterOracle::new(OracleConfig::with_horizon(1000));
        // members only below 100: answered false, complement committed
        let early = SetDescriptor::predicate("early", |n| n < 100);
        assert!(!o.is_qualified(&early).unwrap());
        // powers of two: only two members in [500, 1000)
        let pow2 = SetDescriptor::predicate("pow2", |n| n.is_power_of_two());
        assert!(!o.is_qualified(&pow2).unwrap());
        let late = SetDescriptor::predicate("late-sparse", |n| n >= 995);
        assert!(!o.is_qualified(&late).unwrap());
        assert!(!o.is_poisoned());
        let everything_but = SetDescriptor::predicate("tiny", |n| n % 997 == 0);
        assert!(!o.is_qualified(&everything_but).unwrap());
    }

    #[test]
    fn poisoning_after_exhaustion() {
        let mut o = UltrafilterOracle::new(OracleConfig::with_horizon(100));
        // Ten members in the window, answered true, but the committed
        // intersection then has too few witnesses once the next set lands.
        let a = SetDescriptor::predicate("a", |n| n % 5 == 0);
        assert!(o.is_qualified(&a).unwrap());
        let b = SetDescriptor::predicate("b", |n| n % 5 == 0 && n >= 60);
        assert!(o.is_qualified(&b).unwrap());
        let c = SetDescriptor::predicate("c", |n| n >= 90);
        let err = o.is_qualified(&c).unwrap_err();
        assert!(matches!(err, OracleError::HorizonExhausted { .. }));
        assert_eq!(o.is_qualified(&SetDescriptor::evens()), Err(OracleError::Poisoned));
    }

    #[test]
    fn replay_reimposes_answers() {
        let mut o = UltrafilterOracle::new(OracleConfig::default());
        o.is_qualified(&SetDescriptor::odds()).unwrap();
        let log = o.decision_log().to_vec();
        assert!(log[0].answer);
        // Forcing `evens` false replays the parity choice from a log that
        // decided evens first.
        let forced = ReplayLog::from_records(&[DecisionRecord {
            label: "evens".into(),
            answer: false,
            mode: DecisionMode::Exact,
            witness_count: 0,
        }]);
        let mut r = UltrafilterOracle::with_replay(OracleConfig::default(), forced);
        assert!(!r.is_qualified(&SetDescriptor::evens()).unwrap());
        assert!(r.is_qualified(&SetDescriptor::odds()).unwrap());
    }

    #[test]
    fn replay_conflict_with_exact_reasoning() {
        let forced = ReplayLog::from_records(&[DecisionRecord {
            label: "{n >= 3}".into(),
            answer: false,
            mode: DecisionMode::Exact,
            witness_count: 0,
        }]);
        let mut r = UltrafilterOracle::with_replay(OracleConfig::default(), forced);
        assert!(matches!(
            r.is_qualified(&SetDescriptor::cofinite_from(3)),
            Err(OracleError::ReplayConflict { .. })
        ));
    }

    #[test]
    fn intersection_classification() {
        let e = SetDescriptor::evens();
        let m3 = SetDescriptor::residue_class(0, 3);
        let both = e.intersect(&m3);
        assert_eq!(both.classification().is_infinite(), Some(true));
        for n in 0..60 {
            assert_eq!(both.contains(n), n % 6 == 0);
        }
        let c = e.intersect(&SetDescriptor::cofinite_from(7));
        assert!(c.validate().is_ok());
        let f = e.intersect(&SetDescriptor::finite("f", &[2, 3]));
        assert_eq!(f.classification(), &Classification::Finite(4));
    }
}
