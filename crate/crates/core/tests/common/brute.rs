//! Straight-line reference implementations. They render texts, enumerate
//! the space and do the calibration arithmetic by hand, touching the library
//! only through the synthetic oracle's raw logits.
#![allow(dead_code)]

use lotto::scoring::SyntheticOracle;

pub struct World<'a> {
    pub oracle: &'a SyntheticOracle,
    pub labels: Vec<String>,
    pub nouns: Vec<String>,
    pub verbs: Vec<String>,
    pub third: Vec<String>,
}

/// One test instance: text and gold label.
pub type Item = (String, usize);

pub fn softmax(l: &[f64]) -> Vec<f64> {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = l.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

pub fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> f64 {
    let hits = pred.iter().zip(gold).filter(|(a, b)| a == b).count();
    hits as f64 / gold.len() as f64
}

impl World<'_> {
    /// Prompt phrases in noun-major order.
    pub fn prompts(&self) -> Vec<String> {
        let mut out = Vec::new();
        for n in &self.nouns {
            for v in &self.verbs {
                for t in &self.third {
                    out.push(format!("{n} {v} {t}"));
                }
            }
        }
        out
    }

    fn dist(&self, text: &str) -> Vec<f64> {
        softmax(&self.oracle.logits(text, &self.labels))
    }

    /// `(q, p)` for a masked single-text task.
    pub fn calibrated(&self, prompt: &str, text: &str) -> (Vec<f64>, Vec<f64>) {
        let o = self.dist(&format!("{text} {prompt} <MASK>"));
        let q = self.dist(&format!("{prompt} <MASK>"));
        let raw: Vec<f64> = o.iter().zip(&q).map(|(a, b)| a / b.max(1e-12)).collect();
        let z: f64 = raw.iter().sum();
        let p = raw.iter().map(|x| x / z).collect();
        (q, p)
    }

    pub fn predict(&self, prompt: &str, text: &str) -> usize {
        argmax(&self.calibrated(prompt, text).1)
    }

    /// `(found, cost)` per instance.
    pub fn search(&self, data: &[Item], budget: usize) -> Vec<(Option<usize>, usize)> {
        let prompts = self.prompts();
        data.iter()
            .map(|(text, gold)| {
                for (i, prompt) in prompts.iter().enumerate().take(budget) {
                    if self.predict(prompt, text) == *gold {
                        return (Some(i), i + 1);
                    }
                }
                (None, budget)
            })
            .collect()
    }

    /// `(space_index, accuracy)` of every template, best first.
    pub fn ranked(&self, data: &[Item]) -> Vec<(usize, f64)> {
        let gold: Vec<usize> = data.iter().map(|d| d.1).collect();
        let mut all: Vec<(usize, f64)> = self
            .prompts()
            .iter()
            .enumerate()
            .map(|(i, prompt)| {
                let pred: Vec<usize> = data.iter().map(|(t, _)| self.predict(prompt, t)).collect();
                (i, accuracy(&pred, &gold))
            })
            .collect();
        // stable sort keeps index order among equal scores
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        all
    }

    pub fn vote(&self, members: &[usize], data: &[Item]) -> Vec<usize> {
        let prompts = self.prompts();
        data.iter()
            .map(|(text, _)| {
                let mut sum = vec![0.0; self.labels.len()];
                for &m in members {
                    let (_, p) = self.calibrated(&prompts[m], text);
                    for (s, x) in sum.iter_mut().zip(p) {
                        *s += x;
                    }
                }
                let avg: Vec<f64> = sum.iter().map(|s| s / members.len() as f64).collect();
                argmax(&avg)
            })
            .collect()
    }

    /// `(chosen member, prediction)` per instance.
    pub fn mi(&self, members: &[usize], data: &[Item]) -> Vec<(usize, usize)> {
        let prompts = self.prompts();
        data.iter()
            .map(|(text, _)| {
                let mut best: Option<(usize, f64, usize)> = None;
                for &m in members {
                    let (q, p) = self.calibrated(&prompts[m], text);
                    let info = entropy(&q) - entropy(&p);
                    if best.is_none() || info > best.unwrap().1 {
                        best = Some((m, info, argmax(&p)));
                    }
                }
                let (m, _, pred) = best.unwrap();
                (m, pred)
            })
            .collect()
    }
}
