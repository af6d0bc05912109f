//! Messaging-network simulation.
//!
//! Fits per-sender models from a timestamped message trace and simulates
//! new traces that look like the original:
//!
//! * **When** — inter-event times per sender follow a log-normal mixture
//!   ([`fit_lognormmix`], EM on log-durations). Simulation runs each
//!   sender as an independent renewal process and merges the streams in
//!   time order.
//! * **With whom** — each sender has a weight per observed recipient
//!   *set* (hyperedge), so a draw is a single categorical choice and the
//!   simulator emits uni-cast and multi-cast events from one model.
//!   Recipient sets never stray outside the training table; that
//!   closed-world property is the module's defining contract.
//! * **What** — [`assemble_threads`] groups events into conversation
//!   threads (same participant set within a time window), generates a
//!   subject for each thread root and a role-conditioned body for every
//!   message.
//!
//! Trace file format: one event per line, tab-separated fields
//! `ts`, `sender`, `recipients` (comma-joined), `thread`, `subject`,
//! `body`; the last three may be empty or absent. Participant ids are
//! restricted to `[A-Za-z0-9._@+-]`; subject/body escape backslash, tab
//! and newline as `\\`, `\t`, `\n`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::{derive_seed, seeded};
use crate::textgen::{gen_email_body, generate_tokens, is_structural_token, NgramModel};

/// Smallest admissible mixture component spread.
pub const SIGMA_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CommsError {
    #[error("durations must be positive (found {0})")]
    NonPositiveDuration(f64),
    #[error("need at least k = {k} durations, got {got}")]
    TooFewDurations { k: usize, got: usize },
    #[error("k must be >= 1")]
    BadK,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("trace has no inter-event durations to fit")]
    NoDurations,
    #[error("model has no participants")]
    NoParticipants,
    #[error("simulation needs a finite horizon or a positive max_events")]
    UnboundedSimulation,
    #[error("participant id {0:?} contains characters outside [A-Za-z0-9._@+-]")]
    BadParticipantId(String),
    #[error("trace line {0} is malformed: {1}")]
    BadTraceLine(usize, String),
    #[error("model file is malformed: {0}")]
    BadModelFile(String),
    #[error("text generation error: {0}")]
    Textgen(#[from] crate::textgen::TextgenError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One directed communication event.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Seconds from the trace origin; non-decreasing within a trace.
    pub ts: f64,
    pub sender: String,
    /// Non-empty, sender excluded, order preserved.
    pub recipients: Vec<String>,
    pub thread: Option<u64>,
    pub subject: Option<String>,
    pub body: Option<String>,
}

impl Event {
    pub fn new(ts: f64, sender: impl Into<String>, recipients: Vec<String>) -> Self {
        Self { ts, sender: sender.into(), recipients, thread: None, subject: None, body: None }
    }

    /// Canonical recipient set (sorted, deduplicated).
    pub fn recipient_set(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.recipients.iter().collect();
        set.into_iter().cloned().collect()
    }

    /// All participants of the event (sender plus recipients).
    pub fn participant_set(&self) -> BTreeSet<String> {
        let mut set: BTreeSet<String> = self.recipients.iter().cloned().collect();
        set.insert(self.sender.clone());
        set
    }
}

/// Time-ordered event list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventTrace {
    pub events: Vec<Event>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.chars().all(|c| c.is_ascii_alphanumeric() || ".-_@+".contains(c))
}

impl EventTrace {
    pub fn new(events: Vec<Event>) -> Self {
        Self { events }
    }

    pub fn validate(&self) -> Result<(), CommsError> {
        let mut prev = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.ts >= 0.0) {
                return Err(CommsError::InvalidTrace(format!("event {i}: ts {} < 0", e.ts)));
            }
            if e.ts < prev {
                return Err(CommsError::InvalidTrace(format!(
                    "event {i}: timestamp decreases ({} after {prev})",
                    e.ts
                )));
            }
            prev = e.ts;
            if e.recipients.is_empty() {
                return Err(CommsError::InvalidTrace(format!("event {i}: no recipients")));
            }
            if e.recipients.iter().any(|r| r == &e.sender) {
                return Err(CommsError::InvalidTrace(format!(
                    "event {i}: sender {} among recipients",
                    e.sender
                )));
            }
            if !valid_id(&e.sender) {
                return Err(CommsError::BadParticipantId(e.sender.clone()));
            }
            if let Some(bad) = e.recipients.iter().find(|r| !valid_id(r)) {
                return Err(CommsError::BadParticipantId(bad.clone()));
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.ts,
                e.sender,
                e.recipients.join(","),
                e.thread.map(|t| t.to_string()).unwrap_or_default(),
                escape(e.subject.as_deref().unwrap_or_default()),
                escape(e.body.as_deref().unwrap_or_default()),
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("trace text is UTF-8")
    }

    /// Parse the trace format. Lines may omit thread/subject/body.
    pub fn read_from<R: BufRead>(r: R) -> Result<EventTrace, CommsError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(CommsError::BadTraceLine(i + 1, "need ts, sender, recipients".into()));
            }
            let ts: f64 = fields[0]
                .parse()
                .map_err(|_| CommsError::BadTraceLine(i + 1, "bad timestamp".into()))?;
            let sender = fields[1].to_string();
            let recipients: Vec<String> =
                fields[2].split(',').filter(|s| !s.is_empty()).map(str::to_owned).collect();
            let thread = match fields.get(3) {
                Some(s) if !s.is_empty() => Some(
                    s.parse()
                        .map_err(|_| CommsError::BadTraceLine(i + 1, "bad thread id".into()))?,
                ),
                _ => None,
            };
            let subject = fields.get(4).filter(|s| !s.is_empty()).map(|s| unescape(s));
            let body = fields.get(5).filter(|s| !s.is_empty()).map(|s| unescape(s));
            events.push(Event { ts, sender, recipients, thread, subject, body });
        }
        let trace = EventTrace::new(events);
        trace.validate()?;
        Ok(trace)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Log-normal mixture over inter-event durations.
#[derive(Debug, Clone, PartialEq)]
pub struct LogNormMix {
    pub weights: Vec<f64>,
    /// Component means in log-seconds.
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl LogNormMix {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Mean duration `Σ π_k exp(μ_k + σ_k²/2)`.
    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.mu)
            .zip(&self.sigma)
            .map(|((w, m), s)| w * (m + s * s / 2.0).exp())
            .sum()
    }

    /// Log-likelihood of positive durations under the mixture.
    pub fn log_likelihood(&self, durations: &[f64]) -> f64 {
        durations
            .iter()
            .map(|&d| {
                let x = d.ln();
                let li = logsumexp(
                    &self
                        .weights
                        .iter()
                        .zip(&self.mu)
                        .zip(&self.sigma)
                        .map(|((w, m), s)| w.max(1e-300).ln() + log_normal_pdf(x, *m, *s))
                        .collect::<Vec<_>>(),
                );
                li - x // Jacobian of d -> ln d
            })
            .sum()
    }
}

fn log_normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Fit a `k`-component log-normal mixture by EM on log-durations.
///
/// Means initialize at quantile-spaced points (the seed only jitters
/// exact ties), sigmas at the pooled spread, weights uniform. Iteration
/// stops when the relative log-likelihood change drops below `tol` or
/// after `max_iters` sweeps. Sigmas are floored at [`SIGMA_FLOOR`].
pub fn fit_lognormmix(
    durations: &[f64],
    k: usize,
    max_iters: usize,
    tol: f64,
    rng_seed: u64,
) -> Result<LogNormMix, CommsError> {
    if k < 1 {
        return Err(CommsError::BadK);
    }
    if durations.len() < k {
        return Err(CommsError::TooFewDurations { k, got: durations.len() });
    }
    if let Some(&bad) = durations.iter().find(|d| !(**d > 0.0)) {
        return Err(CommsError::NonPositiveDuration(bad));
    }
    let x: Vec<f64> = durations.iter().map(|d| d.ln()).collect();
    let n = x.len();
    let mut rng = seeded(rng_seed);

    let mut sorted = x.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut mu: Vec<f64> = (0..k)
        .map(|j| sorted[((j as f64 + 0.5) / k as f64 * n as f64) as usize % n])
        .collect();
    for j in 1..k {
        if mu[j] <= mu[j - 1] {
            mu[j] = mu[j - 1] + rng.gen_range(1e-6..1e-4);
        }
    }
    let mean_x: f64 = x.iter().sum::<f64>() / n as f64;
    let var_x: f64 = x.iter().map(|v| (v - mean_x).powi(2)).sum::<f64>() / n as f64;
    let mut sigma = vec![var_x.sqrt().max(SIGMA_FLOOR); k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut prev_ll = f64::NEG_INFINITY;
    let mut resp = vec![vec![0.0f64; k]; n];
    for _ in 0..max_iters {
        // E step in log space.
        let mut ll = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let logs: Vec<f64> = (0..k)
                .map(|j| weights[j].max(1e-300).ln() + log_normal_pdf(xi, mu[j], sigma[j]))
                .collect();
            let norm = logsumexp(&logs);
            ll += norm;
            for j in 0..k {
                resp[i][j] = (logs[j] - norm).exp();
            }
        }
        // M step.
        for j in 0..k {
            let nj: f64 = resp.iter().map(|r| r[j]).sum();
            let nj = nj.max(1e-12);
            weights[j] = nj / n as f64;
            mu[j] = resp.iter().zip(&x).map(|(r, xi)| r[j] * xi).sum::<f64>() / nj;
            let var =
                resp.iter().zip(&x).map(|(r, xi)| r[j] * (xi - mu[j]).powi(2)).sum::<f64>() / nj;
            sigma[j] = var.sqrt().max(SIGMA_FLOOR);
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        if prev_ll.is_finite() && (ll - prev_ll).abs() <= tol * prev_ll.abs().max(1e-12) {
            break;
        }
        prev_ll = ll;
    }

    // Canonical component order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mu[a].partial_cmp(&mu[b]).unwrap());
    Ok(LogNormMix {
        weights: order.iter().map(|&j| weights[j]).collect(),
        mu: order.iter().map(|&j| mu[j]).collect(),
        sigma: order.iter().map(|&j| sigma[j]).collect(),
    })
}

/// Draw `n` durations from the mixture.
pub fn sample_lognormmix(m: &LogNormMix, n: usize, rng_seed: u64) -> Vec<f64> {
    let mut rng = seeded(rng_seed);
    (0..n).map(|_| sample_one(m, &mut rng)).collect()
}

fn sample_one(m: &LogNormMix, rng: &mut ChaCha8Rng) -> f64 {
    let mut x = rng.gen::<f64>();
    let mut j = m.k() - 1;
    for (i, w) in m.weights.iter().enumerate() {
        if x < *w {
            j = i;
            break;
        }
        x -= w;
    }
    let z: f64 = rng.sample(StandardNormal);
    (m.mu[j] + m.sigma[j] * z).exp()
}

/// Per-sender temporal and recipient model.
#[derive(Debug, Clone, PartialEq)]
pub struct SenderModel {
    pub mixture: LogNormMix,
    /// True when the sender had too few events and uses the global fit.
    pub uses_global: bool,
    /// Canonical recipient sets with simplex weights.
    pub hyperedges: Vec<(Vec<String>, f64)>,
}

/// Fitted communications model over a participant population.
#[derive(Debug, Clone, PartialEq)]
pub struct CommsModel {
    pub participants: BTreeSet<String>,
    pub senders: BTreeMap<String, SenderModel>,
    pub smoothing: f64,
    pub k: usize,
}

impl CommsModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "comms v1")?;
        writeln!(w, "k {}", self.k)?;
        writeln!(w, "smoothing {}", self.smoothing)?;
        writeln!(w, "participants {}", self.participants.len())?;
        for p in &self.participants {
            writeln!(w, "{p}")?;
        }
        for (name, s) in &self.senders {
            writeln!(w, "sender {name} {}", if s.uses_global { "global" } else { "own" })?;
            writeln!(w, "mixture {}", s.mixture.k())?;
            for j in 0..s.mixture.k() {
                writeln!(w, "{} {} {}", s.mixture.weights[j], s.mixture.mu[j], s.mixture.sigma[j])?;
            }
            writeln!(w, "hyperedges {}", s.hyperedges.len())?;
            for (set, weight) in &s.hyperedges {
                writeln!(w, "{weight}\t{}", set.join(","))?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("model text is UTF-8")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<CommsModel, CommsError> {
        let bad = |m: &str| CommsError::BadModelFile(m.to_string());
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String, CommsError> {
            lines.next().ok_or_else(|| bad(&format!("missing {what}")))?.map_err(CommsError::Io)
        };
        if next("header")? != "comms v1" {
            return Err(bad("bad header"));
        }
        let k: usize = next("k")?
            .strip_prefix("k ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad k"))?;
        let smoothing: f64 = next("smoothing")?
            .strip_prefix("smoothing ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad smoothing"))?;
        let np: usize = next("participants")?
            .strip_prefix("participants ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad participants"))?;
        let mut participants = BTreeSet::new();
        for _ in 0..np {
            participants.insert(next("participant")?);
        }
        let mut senders = BTreeMap::new();
        loop {
            let Some(line) = lines.next() else { break };
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let rest = line.strip_prefix("sender ").ok_or_else(|| bad("expected sender line"))?;
            let (name, kind) =
                rest.rsplit_once(' ').ok_or_else(|| bad("bad sender line"))?;
            let uses_global = match kind {
                "global" => true,
                "own" => false,
                _ => return Err(bad("bad sender kind")),
            };
            let km: usize = lines
                .next()
                .ok_or_else(|| bad("missing mixture"))??
                .strip_prefix("mixture ")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad mixture line"))?;
            let (mut weights, mut mu, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..km {
                let row = lines.next().ok_or_else(|| bad("missing component"))??;
                let vals: Vec<f64> =
                    row.split(' ').filter_map(|s| s.parse().ok()).collect();
                if vals.len() != 3 {
                    return Err(bad("bad component row"));
                }
                weights.push(vals[0]);
                mu.push(vals[1]);
                sigma.push(vals[2]);
            }
            let hn: usize = lines
                .next()
                .ok_or_else(|| bad("missing hyperedges"))??
                .strip_prefix("hyperedges ")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad hyperedges line"))?;
            let mut hyperedges = Vec::new();
            for _ in 0..hn {
                let row = lines.next().ok_or_else(|| bad("missing hyperedge"))??;
                let (weight, set) =
                    row.split_once('\t').ok_or_else(|| bad("bad hyperedge row"))?;
                let weight: f64 = weight.parse().map_err(|_| bad("bad hyperedge weight"))?;
                let set: Vec<String> = set.split(',').map(str::to_owned).collect();
                hyperedges.push((set, weight));
            }
            senders.insert(
                name.to_string(),
                SenderModel { mixture: LogNormMix { weights, mu, sigma }, uses_global, hyperedges },
            );
        }
        Ok(CommsModel { participants, senders, smoothing, k })
    }
}

/// Fit per-sender mixtures and hyperedge tables from a trace.
///
/// Senders with fewer than `max(k, 5)` events share a global mixture fit
/// on all senders' durations (flagged `uses_global`). Hyperedge weights
/// are the sender's empirical recipient-set frequencies with additive
/// smoothing `lambda` spread over the observed sets only.
pub fn fit_comms_model(
    trace: &EventTrace,
    k: usize,
    lambda: f64,
    rng_seed: u64,
) -> Result<CommsModel, CommsError> {
    if k < 1 {
        return Err(CommsError::BadK);
    }
    trace.validate()?;
    if trace.events.is_empty() {
        return Err(CommsError::InvalidTrace("trace has no events".into()));
    }
    let mut by_sender: BTreeMap<&str, Vec<&Event>> = BTreeMap::new();
    for e in &trace.events {
        by_sender.entry(e.sender.as_str()).or_default().push(e);
    }
    let durations_of = |events: &[&Event]| -> Vec<f64> {
        events.windows(2).map(|w| (w[1].ts - w[0].ts).max(1e-6)).collect()
    };
    let mut pooled = Vec::new();
    for events in by_sender.values() {
        pooled.extend(durations_of(events));
    }
    if pooled.is_empty() {
        return Err(CommsError::NoDurations);
    }
    let kg = k.min(pooled.len());
    let global = fit_lognormmix(&pooled, kg, 200, 1e-6, derive_seed(rng_seed, "comms.global"))?;

    let mut participants: BTreeSet<String> = BTreeSet::new();
    let mut senders = BTreeMap::new();
    for (name, events) in &by_sender {
        participants.insert(name.to_string());
        for e in events {
            participants.extend(e.recipients.iter().cloned());
        }
        let (mixture, uses_global) = if events.len() < k.max(5) {
            (global.clone(), true)
        } else {
            let durations = durations_of(events);
            let ks = k.min(durations.len());
            let label = format!("comms.sender.{name}");
            (fit_lognormmix(&durations, ks, 200, 1e-6, derive_seed(rng_seed, &label))?, false)
        };
        let mut counts: BTreeMap<Vec<String>, u64> = BTreeMap::new();
        for e in events {
            *counts.entry(e.recipient_set()).or_insert(0) += 1;
        }
        let total: u64 = counts.values().sum();
        let s = counts.len() as f64;
        let denom = total as f64 + s * lambda;
        let hyperedges: Vec<(Vec<String>, f64)> =
            counts.into_iter().map(|(set, c)| (set, (c as f64 + lambda) / denom)).collect();
        senders.insert(
            name.to_string(),
            SenderModel { mixture, uses_global, hyperedges },
        );
    }
    Ok(CommsModel { participants, senders, smoothing: lambda, k })
}

#[derive(PartialEq)]
struct Pending {
    ts: f64,
    sender: String,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ts.total_cmp(&other.ts).then_with(|| self.sender.cmp(&other.sender))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Simulate a merged event stream from per-sender renewal processes.
///
/// Each sender's first event fires at its first sampled duration;
/// subsequent events add further draws. Recipient sets come from the
/// sender's hyperedge table, so every simulated set was observed in
/// training. Stops at `horizon` seconds (if finite) or `max_events`
/// events (if nonzero), whichever bound bites first.
pub fn simulate_events(
    model: &CommsModel,
    horizon: f64,
    max_events: usize,
    rng_seed: u64,
) -> Result<EventTrace, CommsError> {
    if model.participants.is_empty() {
        return Err(CommsError::NoParticipants);
    }
    if !horizon.is_finite() && max_events == 0 {
        return Err(CommsError::UnboundedSimulation);
    }
    let mut rngs: BTreeMap<&str, ChaCha8Rng> = BTreeMap::new();
    let mut heap: BinaryHeap<Reverse<Pending>> = BinaryHeap::new();
    for (name, sender) in &model.senders {
        let mut rng = seeded(derive_seed(rng_seed, &format!("sim.sender.{name}")));
        let t0 = sample_one(&sender.mixture, &mut rng);
        rngs.insert(name.as_str(), rng);
        heap.push(Reverse(Pending { ts: t0, sender: name.clone() }));
    }
    let mut events = Vec::new();
    while let Some(Reverse(Pending { ts, sender })) = heap.pop() {
        if horizon.is_finite() && ts > horizon {
            break; // heap order: everything later is beyond the horizon too
        }
        if max_events > 0 && events.len() >= max_events {
            break;
        }
        let sm = &model.senders[&sender];
        let rng = rngs.get_mut(sender.as_str()).expect("rng per sender");
        let mut x = rng.gen::<f64>();
        let mut idx = sm.hyperedges.len() - 1;
        for (i, (_, w)) in sm.hyperedges.iter().enumerate() {
            if x < *w {
                idx = i;
                break;
            }
            x -= w;
        }
        let recipients = sm.hyperedges[idx].0.clone();
        events.push(Event::new(ts, sender.clone(), recipients));
        let dt = sample_one(&sm.mixture, rng);
        heap.push(Reverse(Pending { ts: ts + dt, sender }));
    }
    let trace = EventTrace::new(events);
    debug_assert!(trace.validate().is_ok());
    Ok(trace)
}

struct ThreadState {
    id: u64,
    participants: BTreeSet<String>,
    root_subject: String,
    topic_seed: Vec<String>,
    last_ts: f64,
}

fn title_case_words(tokens: &[String]) -> String {
    tokens
        .iter()
        .map(|w| {
            let mut cs = w.chars();
            match cs.next() {
                Some(c) => c.to_uppercase().collect::<String>() + cs.as_str(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Group a trace into conversation threads and fill in subjects and
/// bodies.
///
/// An event joins the most recent thread whose participant set equals
/// its own and whose last activity lies within `p_window` seconds;
/// otherwise it starts a new thread with a generated subject whose
/// tokens seed the topic of every body in that thread. Replies get a
/// `Re: ` subject. `roles` maps senders to role tags for the body
/// generator; unmapped senders use the `staff` role.
pub fn assemble_threads(
    trace: &EventTrace,
    email_model: &NgramModel,
    roles: &BTreeMap<String, String>,
    p_window: f64,
    rng_seed: u64,
) -> Result<EventTrace, CommsError> {
    trace.validate()?;
    let mut threads: Vec<ThreadState> = Vec::new();
    let mut out = Vec::with_capacity(trace.events.len());
    let mut master = seeded(derive_seed(rng_seed, "threads.master"));
    for (i, event) in trace.events.iter().enumerate() {
        let pset = event.participant_set();
        let role =
            roles.get(&event.sender).cloned().unwrap_or_else(|| "staff".to_string());
        let joined = threads
            .iter_mut()
            .filter(|t| t.participants == pset && event.ts - t.last_ts <= p_window)
            .max_by(|a, b| a.last_ts.total_cmp(&b.last_ts).then(a.id.cmp(&b.id)));
        let (thread_id, subject, topic_seed) = match joined {
            Some(t) => {
                t.last_ts = event.ts;
                (t.id, format!("Re: {}", t.root_subject), t.topic_seed.clone())
            }
            None => {
                let id = threads.len() as u64 + 1;
                let n_subject = master.gen_range(5..=8);
                let subj_seed = derive_seed(rng_seed, &format!("thread.subject.{i}"));
                let tokens = generate_tokens(email_model, &role, &[], n_subject, subj_seed)?;
                let tokens: Vec<String> =
                    tokens.into_iter().filter(|t| !is_structural_token(t)).collect();
                let subject = if tokens.is_empty() {
                    format!("Update {id}")
                } else {
                    title_case_words(&tokens)
                };
                threads.push(ThreadState {
                    id,
                    participants: pset,
                    root_subject: subject.clone(),
                    topic_seed: tokens.clone(),
                    last_ts: event.ts,
                });
                (id, subject, tokens)
            }
        };
        let body_len = master.gen_range(30..=120);
        let body_seed = derive_seed(rng_seed, &format!("thread.body.{i}"));
        let body =
            gen_email_body(email_model, &role, &topic_seed, body_len, body_seed, false)?;
        let mut enriched = event.clone();
        enriched.thread = Some(thread_id);
        enriched.subject = Some(subject);
        enriched.body = Some(body);
        out.push(enriched);
    }
    Ok(EventTrace::new(out))
}
