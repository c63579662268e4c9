//! Run configuration: a flat JSON document, optionally embedded in the
//! `# config:` header line of a previous report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subhash::bbm92::{Bbm92Params, BoundForm, LeakageModel, POmega, Scenario, ScenarioKind};
use subhash::rng::MasterSeed;
use subhash::toeplitz::BlockingParams;

use crate::Failure;

const HEADER_PREFIX: &str = "# config: ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_rounds: f64,
    pub p_x: f64,
    pub e_ph: f64,
    pub e_bit: f64,
    pub q_tol: f64,
    pub eta_tol: f64,
    pub f_ec: f64,
    pub p_det: f64,
    pub d_x: u32,
    pub eps_sec: f64,
    pub eps_abort: f64,
    pub leakage: LeakageModel,
    pub per_block_syndrome: bool,
    /// `null` for the worst case `p_Omega = eps`.
    pub p_omega: Option<f64>,
    pub bound: BoundForm,
    pub scenario: ScenarioKind,
    pub n_subblocks: u32,
    pub m_prime: usize,
    pub n_prime: usize,
    pub stat_sigma: f64,
    pub seed: String,
    pub input: Option<PathBuf>,
    pub input_len: Option<u64>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = Bbm92Params::default();
        let b = BlockingParams::default();
        RunConfig {
            n_rounds: p.n_rounds,
            p_x: p.p_x,
            e_ph: p.e_ph,
            e_bit: p.e_bit,
            q_tol: p.q_tol,
            eta_tol: p.eta_tol,
            f_ec: p.f_ec,
            p_det: p.p_det,
            d_x: p.d_x,
            eps_sec: p.eps_sec,
            eps_abort: p.eps_abort,
            leakage: p.leakage,
            per_block_syndrome: p.per_block_syndrome,
            p_omega: None,
            bound: p.bound,
            scenario: ScenarioKind::Full,
            n_subblocks: 1,
            m_prime: b.m_prime,
            n_prime: b.n_prime,
            stat_sigma: 5.0,
            seed: MasterSeed::from_u64(0).to_hex(),
            input: None,
            input_len: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Accepts a bare JSON object or a report whose header carries one.
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let json = match text.lines().find_map(|l| l.strip_prefix(HEADER_PREFIX)) {
            Some(j) => j,
            None => text,
        };
        serde_json::from_str(json).map_err(|e| Failure::Parse(format!("config: {e}")))
    }

    /// Resolved configuration, minus the output path, as one header line.
    pub fn header(&self) -> String {
        let shown = RunConfig {
            output: None,
            ..self.clone()
        };
        format!("{HEADER_PREFIX}{}", serde_json::to_string(&shown).expect("config serialises"))
    }

    pub fn params(&self) -> Result<Bbm92Params, Failure> {
        let p = Bbm92Params {
            n_rounds: self.n_rounds,
            p_x: self.p_x,
            e_ph: self.e_ph,
            e_bit: self.e_bit,
            q_tol: self.q_tol,
            eta_tol: self.eta_tol,
            f_ec: self.f_ec,
            p_det: self.p_det,
            d_x: self.d_x,
            eps_sec: self.eps_sec,
            eps_abort: self.eps_abort,
            leakage: self.leakage,
            per_block_syndrome: self.per_block_syndrome,
            p_omega: self.p_omega.map_or(POmega::WorstCase, POmega::Fixed),
            bound: self.bound,
        };
        p.validate().map_err(|e| Failure::Parse(e.to_string()))?;
        Ok(p)
    }

    pub fn scenario(&self) -> Result<Scenario, Failure> {
        let ns = if self.scenario == ScenarioKind::Full { 1 } else { self.n_subblocks };
        Scenario::new(self.scenario, ns).map_err(|e| Failure::Parse(e.to_string()))
    }

    pub fn blocking(&self) -> Result<BlockingParams, Failure> {
        BlockingParams::new(self.m_prime, self.n_prime).map_err(|e| Failure::Parse(e.to_string()))
    }

    pub fn master_seed(&self) -> Result<MasterSeed, Failure> {
        self.seed.parse().map_err(|e: subhash::Error| Failure::Parse(format!("seed: {e}")))
    }
}
