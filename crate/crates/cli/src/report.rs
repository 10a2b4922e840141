//! JSON written next to the factors of a run.

use oocpca::source::PhaseSeconds;
use oocpca::{NormEstimate, PcaResult};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct PcaReport {
    pub input: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub i: usize,
    pub seed: u64,
    pub prescale: bool,
    pub ram_budget_words: u64,
    pub passes_over_a: u64,
    pub words_transferred: u64,
    pub disk_seeks: u64,
    pub high_water_words: u64,
    pub seconds: PhaseSeconds,
    pub t_pca: f64,
    pub sigma: Vec<f64>,
    pub epsilon: Option<EpsilonReport>,
}

#[derive(Debug, Serialize)]
pub struct EpsilonReport {
    pub value: f64,
    pub j_iters: usize,
    pub k_probes: usize,
    pub failure_bound: f64,
    pub passes_over_a: u64,
    pub seconds: f64,
}

impl EpsilonReport {
    pub fn new(est: &NormEstimate, passes_over_a: u64, seconds: f64) -> Self {
        Self {
            value: est.value,
            j_iters: est.j_iters,
            k_probes: est.k_probes,
            failure_bound: est.failure_bound,
            passes_over_a,
            seconds,
        }
    }
}

impl PcaReport {
    pub fn new(input: String, dims: (usize, usize), res: &PcaResult, t_pca: f64) -> Self {
        let d = &res.diagnostics;
        let p = &res.params;
        Self {
            input,
            m: dims.0,
            n: dims.1,
            k: p.k,
            l: p.l,
            i: p.i,
            seed: p.seed,
            prescale: p.prescale,
            ram_budget_words: p.ram_budget_words,
            passes_over_a: d.passes_over_a,
            words_transferred: d.words_transferred,
            disk_seeks: d.disk_seeks,
            high_water_words: d.high_water_words,
            seconds: d.wall_time_per_phase.clone(),
            t_pca,
            sigma: res.sigma.clone(),
            epsilon: None,
        }
    }
}
