//! Un-normalized PageRank as a vertex program, plus a dense reference
//! iteration.
//!
//! Every vertex starts at 1.0 and updates as
//! `r_u = (1 - d) + d * sum(r_v / outdeg(v))` over its in-neighbours `v`.
//! Values average about 1 and sum to the vertex count when no vertex is
//! dangling. Dangling vertices send nothing, so their mass leaks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bsp::{MessageEnvelope, ProgramError, VertexContext, VertexProgram};
use crate::graph_io::{EdgeList, VertexId};
use crate::scalar::Scalar;

/// Aggregator slot holding the summed absolute change of all vertices.
pub const DELTA_SLOT: usize = 0;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("damping must lie strictly between 0 and 1, got {0}")]
    Damping(String),
    #[error("eps must be non-negative, got {0}")]
    Eps(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankParams<S> {
    pub damping: S,
    /// The run halts once the aggregated absolute change drops below this.
    pub eps: S,
    pub init_value: S,
}

impl<S: Scalar> Default for PageRankParams<S> {
    fn default() -> Self {
        PageRankParams {
            damping: S::from_f64(0.85).unwrap(),
            eps: S::from_f64(1e-6).unwrap(),
            init_value: S::one(),
        }
    }
}

impl<S: Scalar> PageRankParams<S> {
    pub fn new(damping: S, eps: S) -> Result<Self, ParamsError> {
        if !(damping > S::zero() && damping < S::one()) {
            return Err(ParamsError::Damping(damping.to_string()));
        }
        if eps.is_nan() || eps < S::zero() {
            return Err(ParamsError::Eps(eps.to_string()));
        }
        Ok(PageRankParams {
            damping,
            eps,
            init_value: S::one(),
        })
    }

    fn teleport(&self) -> S {
        S::one() - self.damping
    }
}

/// The vertex program; see the module docs for the update rule.
#[derive(Debug, Clone, Copy)]
pub struct PageRankProgram<S> {
    pub params: PageRankParams<S>,
}

impl<S: Scalar> PageRankProgram<S> {
    pub fn new(params: PageRankParams<S>) -> Self {
        PageRankProgram { params }
    }
}

impl<S: Scalar> VertexProgram<S> for PageRankProgram<S> {
    fn compute(
        &self,
        ctx: &mut VertexContext<'_, S>,
        messages: &[MessageEnvelope<S>],
    ) -> Result<(), ProgramError> {
        let value = if ctx.superstep_index() == 0 {
            self.params.init_value
        } else {
            // the delta of superstep 0 is never accumulated, so wait for 2
            if ctx.superstep_index() >= 2 && ctx.get_aggr_global(DELTA_SLOT)? < self.params.eps {
                ctx.vote_to_halt();
                return Ok(());
            }
            let sum = messages.iter().fold(S::zero(), |acc, m| acc + m.payload);
            let value = self.params.teleport() + self.params.damping * sum;
            ctx.accumulate_aggr(DELTA_SLOT, (ctx.value() - value).abs())?;
            value
        };
        ctx.set_value(value);
        let out_degree = ctx.out_degree();
        if out_degree > 0 {
            ctx.send_message_to_all_neighbors(value / S::from_count(out_degree));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<S> {
    pub values: BTreeMap<VertexId, S>,
    /// Number of updates applied to the all-ones start vector.
    pub iterations: usize,
    /// Summed absolute change of the last update; zero if none ran.
    pub last_delta: S,
}

/// Dense Jacobi iteration of the same update rule.
///
/// Stops after the first update whose summed absolute change is below
/// `params.eps`, or after `max_iters` updates. In-neighbour contributions
/// are summed in ascending source id, so results match the engine bit for
/// bit.
pub fn power_iteration<S: Scalar>(
    g: &EdgeList,
    params: &PageRankParams<S>,
    max_iters: usize,
) -> OracleResult<S> {
    let ids: Vec<VertexId> = g.vertex_ids.iter().copied().collect();
    let index: BTreeMap<VertexId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let edges = g.canonical_edges();
    let mut out_degree = vec![0usize; ids.len()];
    let mut in_neighbours: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    // canonical edges are sorted by source, so each in-list ends up ascending
    for &(s, d) in &edges {
        out_degree[index[&s]] += 1;
        in_neighbours[index[&d]].push(index[&s]);
    }

    let teleport = S::one() - params.damping;
    let mut current = vec![params.init_value; ids.len()];
    let mut iterations = 0;
    let mut last_delta = S::zero();
    while iterations < max_iters {
        let next: Vec<S> = in_neighbours
            .iter()
            .map(|sources| {
                let sum = sources.iter().fold(S::zero(), |acc, &v| {
                    acc + current[v] / S::from_count(out_degree[v])
                });
                teleport + params.damping * sum
            })
            .collect();
        let delta = current
            .iter()
            .zip(&next)
            .fold(S::zero(), |acc, (&a, &b)| acc + (a - b).abs());
        current = next;
        iterations += 1;
        last_delta = delta;
        if delta < params.eps {
            break;
        }
    }
    OracleResult {
        values: ids.into_iter().zip(current).collect(),
        iterations,
        last_delta,
    }
}

/// Vertices ordered by descending value, ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable<S> {
    pub entries: Vec<(VertexId, S)>,
}

impl<S: Scalar> RankTable<S> {
    pub fn top(&self) -> Option<(VertexId, S)> {
        self.entries.first().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn rank<S: Scalar>(values: &BTreeMap<VertexId, S>) -> RankTable<S> {
    let mut entries: Vec<_> = values.iter().map(|(&id, &v)| (id, v)).collect();
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    RankTable { entries }
}

/// Formats like C's `%.15g`.
pub fn format_significant(value: f64) -> String {
    const DIGITS: usize = 15;
    if value == 0.0 {
        return if value.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".into()
        } else if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", DIGITS - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS as i32 - 1 - exp) as usize;
        trim_fraction(&format!("{:.*}", decimals, value)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Result file body: `<id>\t<value>` in the order given.
pub fn emit_results<'a, S: Scalar>(rows: impl IntoIterator<Item = (&'a VertexId, &'a S)>) -> String {
    let mut out = String::new();
    for (id, v) in rows {
        let _ = writeln!(out, "{id}\t{}", format_significant(v.to_f64().unwrap_or(f64::NAN)));
    }
    out
}
