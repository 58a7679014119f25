//! Token moves and the per-token sampling kernel.

use rand::Rng;

use super::{new_topic_prob, predictive_prob, ModelState, Table, TopicId, UNASSIGNED};
use crate::corpus::WordId;
use crate::refinement::potential::Resolved;

/// Unnormalized weights for seating one token.
#[derive(Clone, Debug, PartialEq)]
pub struct TableWeights {
    /// One weight per existing table of the document, in table order.
    pub existing: Vec<f64>,
    pub new_table: f64,
}

/// Unnormalized weights for the topic of a freshly opened table.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicWeights {
    pub existing: Vec<(TopicId, f64)>,
    /// Reserved topics with no tables, then the next brand-new id. They share
    /// the `gamma0` mass equally.
    pub new_topics: Vec<(TopicId, f64)>,
}

#[derive(Default)]
struct Scratch {
    /// Per active slot: indicator * f_k(w) * potential.
    factor: Vec<f64>,
    new_topics: Vec<(TopicId, f64)>,
    tables: Vec<f64>,
    topics: Vec<f64>,
}

enum Seat {
    Table(usize),
    NewTable(TopicId),
}

impl ModelState {
    fn fill_factors(&self, w: WordId, resolved: &Resolved<'_>, sc: &mut Scratch) {
        let v = self.vocab_size();
        let beta = self.hyper.beta;
        sc.factor.clear();
        for (s, &k) in self.topics.ids.iter().enumerate() {
            let f = if self.admits(w, k) {
                let pk = predictive_prob(self.topics.word_counts[s][w as usize], self.topics.totals[s], v, beta);
                if resolved.is_trivial() {
                    pk
                } else {
                    pk * resolved.value(k)
                }
            } else {
                0.0
            };
            sc.factor.push(f);
        }
        sc.new_topics.clear();
        let candidates = self.dormant.len() + 1;
        let share = self.hyper.gamma0 / candidates as f64 * new_topic_prob(v);
        for k in self.dormant.iter().copied().chain(std::iter::once(self.next_topic)) {
            let weight = if self.admits(w, k) { share * resolved.value(k) } else { 0.0 };
            sc.new_topics.push((k, weight));
        }
    }

    fn fill_table_weights(&self, j: usize, sc: &mut Scratch) -> f64 {
        sc.tables.clear();
        for t in &self.tables[j] {
            let s = self.topics.slot(t.topic).expect("table serves an active topic");
            sc.tables.push(t.count as f64 * sc.factor[s]);
        }
        let mut mix = 0.0;
        let mut m_total = 0.0;
        for (s, &m) in self.topics.tables.iter().enumerate() {
            mix += m as f64 * sc.factor[s];
            m_total += m as f64;
        }
        mix += sc.new_topics.iter().map(|(_, w)| w).sum::<f64>();
        self.hyper.alpha * mix / (m_total + self.hyper.gamma0)
    }

    fn fill_topic_weights(&self, sc: &mut Scratch) {
        sc.topics.clear();
        for (s, &m) in self.topics.tables.iter().enumerate() {
            sc.topics.push(m as f64 * sc.factor[s]);
        }
        sc.topics.extend(sc.new_topics.iter().map(|(_, w)| *w));
    }

    /// Seating weights for word `w` in document `j` under the current counts.
    /// The caller is responsible for having removed the token first.
    pub fn table_weights(&self, j: usize, w: WordId) -> TableWeights {
        let mut sc = Scratch::default();
        let resolved = self.potential.resolve(w, j as u32);
        self.fill_factors(w, &resolved, &mut sc);
        let new_table = self.fill_table_weights(j, &mut sc);
        TableWeights { existing: sc.tables, new_table }
    }

    /// Topic weights for a new table opened in document `j` for word `w`.
    pub fn topic_weights(&self, j: usize, w: WordId) -> TopicWeights {
        let mut sc = Scratch::default();
        let resolved = self.potential.resolve(w, j as u32);
        self.fill_factors(w, &resolved, &mut sc);
        self.fill_topic_weights(&mut sc);
        let k = self.topics.ids.len();
        TopicWeights {
            existing: self.topics.ids.iter().copied().zip(sc.topics[..k].iter().copied()).collect(),
            new_topics: sc.new_topics,
        }
    }

    fn choose(&mut self, j: usize, w: WordId, sc: &mut Scratch) -> Seat {
        let resolved = self.potential.resolve(w, j as u32);
        self.fill_factors(w, &resolved, sc);
        drop(resolved);
        let new_table = self.fill_table_weights(j, sc);
        let existing: f64 = sc.tables.iter().sum();
        let total = existing + new_table;
        if total <= 0.0 || !total.is_finite() {
            log::warn!(
                "constraint conflict for word {:?} in document {j}: every seating has zero weight",
                self.corpus.vocabulary().term(w)
            );
            let n = self.tables[j].len();
            if n > 0 {
                return Seat::Table(self.rng.random_range(0..n));
            }
            return Seat::NewTable(self.fallback_topic());
        }
        let u = self.rng.random::<f64>() * total;
        if u < existing {
            if let Some(t) = pick(&sc.tables, u) {
                return Seat::Table(t);
            }
        }
        self.fill_topic_weights(sc);
        let topic_total: f64 = sc.topics.iter().sum();
        if topic_total <= 0.0 {
            return Seat::NewTable(self.fallback_topic());
        }
        let u = self.rng.random::<f64>() * topic_total;
        let i = pick(&sc.topics, u).expect("positive total");
        let k = self.topics.ids.len();
        if i < k {
            Seat::NewTable(self.topics.ids[i])
        } else {
            Seat::NewTable(sc.new_topics[i - k].0)
        }
    }

    fn fallback_topic(&mut self) -> TopicId {
        let k = self.topics.ids.len();
        if k == 0 {
            self.next_topic
        } else {
            self.topics.ids[self.rng.random_range(0..k)]
        }
    }

    /// Takes token `(j, i)` out of all counts, dropping its table if it
    /// empties and vacating the topic if that was its last table.
    pub(crate) fn remove_token(&mut self, j: usize, i: usize) {
        let t = self.assign[j][i];
        if t == UNASSIGNED {
            return;
        }
        let w = self.corpus.document(j).tokens[i] as usize;
        let t = t as usize;
        let table = &mut self.tables[j][t];
        table.count -= 1;
        let k = table.topic;
        let emptied = table.count == 0;
        let s = self.topics.slot(k).expect("seated token has an active topic");
        self.topics.word_counts[s][w] -= 1;
        self.topics.totals[s] -= 1;
        self.assign[j][i] = UNASSIGNED;
        if emptied {
            self.drop_table(j, t);
        }
    }

    fn drop_table(&mut self, j: usize, t: usize) {
        let k = self.tables[j].swap_remove(t).topic;
        let moved = self.tables[j].len() as u32;
        if (t as u32) != moved {
            for a in self.assign[j].iter_mut() {
                if *a == moved {
                    *a = t as u32;
                }
            }
        }
        let s = self.topics.slot(k).unwrap();
        self.topics.tables[s] -= 1;
        if self.topics.tables[s] == 0 {
            self.topics.deactivate(k);
            if self.keeps_reserved(k) {
                self.dormant.insert(k);
            }
        }
    }

    fn seat_token(&mut self, j: usize, i: usize, seat: Seat) {
        let t = match seat {
            Seat::Table(t) => t,
            Seat::NewTable(k) => self.open_table(j, k),
        };
        let w = self.corpus.document(j).tokens[i] as usize;
        self.tables[j][t].count += 1;
        let s = self.topics.slot(self.tables[j][t].topic).unwrap();
        self.topics.word_counts[s][w] += 1;
        self.topics.totals[s] += 1;
        self.assign[j][i] = t as u32;
    }

    #[cfg(test)]
    pub(crate) fn place_token(&mut self, j: usize, i: usize, table: Option<usize>, topic: TopicId) {
        let seat = match table {
            Some(t) => Seat::Table(t),
            None => Seat::NewTable(topic),
        };
        self.seat_token(j, i, seat);
    }

    fn open_table(&mut self, j: usize, k: TopicId) -> usize {
        let s = match self.topics.slot(k) {
            Some(s) => s,
            None => {
                self.dormant.remove(&k);
                if k >= self.next_topic {
                    self.next_topic = k + 1;
                }
                self.topics.activate(k, self.corpus.vocab_size())
            }
        };
        self.topics.tables[s] += 1;
        self.tables[j].push(Table { topic: k, count: 0 });
        self.tables[j].len() - 1
    }

    fn resample_token(&mut self, j: usize, i: usize, sc: &mut Scratch) {
        self.remove_token(j, i);
        let w = self.corpus.document(j).tokens[i];
        let seat = self.choose(j, w, sc);
        self.seat_token(j, i, seat);
    }

    /// Resamples every token once, documents in corpus order and positions
    /// left to right.
    pub fn gibbs_sweep(&mut self) {
        let mut sc = Scratch::default();
        for j in 0..self.corpus.len() {
            for i in 0..self.corpus.document(j).len() {
                self.resample_token(j, i, &mut sc);
            }
        }
        self.iteration += 1;
    }

    pub fn train(&mut self, n_iters: usize) {
        self.train_with_progress(n_iters, |_, _| {});
    }

    /// Runs `n_iters` sweeps, calling `progress(done, total)` after each.
    pub fn train_with_progress(&mut self, n_iters: usize, mut progress: impl FnMut(usize, usize)) {
        for it in 0..n_iters {
            self.gibbs_sweep();
            progress(it + 1, n_iters);
        }
    }

    /// Unseats the given tokens, leaving them out of every count.
    pub(crate) fn forget(&mut self, tokens: &[(u32, u32)]) {
        for &(j, i) in tokens {
            self.remove_token(j as usize, i as usize);
        }
    }

    /// Samples a seat for every unseated token, in corpus order.
    pub(crate) fn reseat_unassigned(&mut self) {
        let mut sc = Scratch::default();
        for j in 0..self.corpus.len() {
            for i in 0..self.corpus.document(j).len() {
                if self.assign[j][i] == UNASSIGNED {
                    let w = self.corpus.document(j).tokens[i];
                    let seat = self.choose(j, w, &mut sc);
                    self.seat_token(j, i, seat);
                }
            }
        }
    }
}

fn pick(weights: &[f64], mut u: f64) -> Option<usize> {
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Some(i);
            }
            u -= w;
            last = Some(i);
        }
    }
    last
}
