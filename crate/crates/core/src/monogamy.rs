//! Coarsening inequalities, the dis-correlated condition and the assumption
//! scans built on the discord engine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discord::{self, d_quantity, gqd_defect, DiscordResult, MeasureKind};
use crate::error::{invalid_arg, Result};
use crate::linalg::{self, CMatrix, C64, ONE};
use crate::measure::{params_from_unitary, unitary_from_params, n_basis_params, ProjectiveBasis};
use crate::optimizer::{Minimizer, OptimizerConfig};
use crate::partition::{apply_move, available_moves, coarser_set, is_coarser, xi_set_with, Partition};
use crate::qstate::{make_named_state, sample_random_state, save_state, DensityMatrix};

/// Two discord values closer than this count as equal.
pub const EPS_EQ: f64 = 1e-4;
/// Discord values below this count as zero.
pub const EPS_ZERO: f64 = 1e-4;
/// Inequality margins above `-EPS_CHECK` count as satisfied.
pub const EPS_CHECK: f64 = 5e-4;
/// Tolerance for comparisons between d-quantities, which are evaluated
/// exactly at a fixed measurement.
pub const EPS_D: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Assumption {
    /// e.g. `d_{AB;C} >= d_{B;C}`.
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// e.g. `D_{A;B;C} >= D_{A;B} + D_{AB;C}`.
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Individual discord values entering both sides.
    pub terms: Vec<(String, f64)>,
    pub lhs_certified: bool,
    /// Spread of the left side's restart values.
    pub lhs_spread: f64,
    pub assumptions: Vec<Assumption>,
    /// When set, one satisfied assumption is enough.
    pub any_assumption: bool,
    pub verdict: Verdict,
}

impl InequalityCheck {
    pub fn assumptions_met(&self) -> bool {
        if self.assumptions.is_empty() {
            return true;
        }
        if self.any_assumption {
            self.assumptions.iter().any(|a| a.satisfied)
        } else {
            self.assumptions.iter().all(|a| a.satisfied)
        }
    }

    fn decide(&mut self) {
        self.verdict = if !self.assumptions_met() {
            Verdict::Inconclusive
        } else if self.margin >= -EPS_CHECK {
            Verdict::Holds
        } else if self.lhs_certified {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        };
    }
}

fn assumption(statement: String, lhs: f64, rhs: f64, tol: f64) -> Assumption {
    Assumption {
        statement,
        lhs,
        rhs,
        satisfied: lhs - rhs >= -tol,
    }
}

/// Parameters of the tree for `target` induced by the tree of `src`, when
/// the measured blocks of `target` are consecutive unions of the measured
/// blocks of `src` starting from the first.
fn induced_tree_start(src: &DiscordResult, dims: &[usize], target: &Partition) -> Option<Vec<f64>> {
    let tree = src.tree(dims).ok()?;
    let sblocks = &src.blocks;
    let tblocks = target.blocks();
    let mut runs = Vec::new();
    let mut cursor = 0;
    for tb in &tblocks[..tblocks.len() - 1] {
        let start = cursor;
        let mut acc: Vec<usize> = Vec::new();
        while acc.len() < tb.len() {
            if cursor >= tree.depth() {
                return None;
            }
            acc.extend(&sblocks[cursor]);
            cursor += 1;
        }
        acc.sort_unstable();
        if &acc != tb {
            return None;
        }
        runs.push(start..cursor);
    }
    let mut params = Vec::new();
    let mut nodes = 1usize;
    for run in &runs {
        let d: usize = run.clone().map(|s| tree.block_dims[s]).product();
        for node in 0..nodes {
            // columns: outcome strings over the run, in mixed-radix order
            let mut cols: Vec<(usize, Vec<C64>)> = vec![(node, vec![ONE])];
            for s in run.clone() {
                let ds = tree.block_dims[s];
                cols = cols
                    .into_iter()
                    .flat_map(|(nd, v)| {
                        let b = &tree.nodes[s][nd];
                        (0..ds)
                            .map(|j| {
                                let bj = b.vector(j);
                                (nd * ds + j, v.iter().flat_map(|&x| bj.iter().map(move |&y| x * y)).collect())
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
            }
            let u = CMatrix::from_fn(d, d, |r, c| cols[c].1[r]);
            params.extend(params_from_unitary(&u).ok()?);
        }
        nodes *= d;
    }
    Some(params)
}

/// Product-measurement parameters for `target` built from the bases of
/// `src`, when every target block is a union of source blocks.
fn induced_product_start(src: &DiscordResult, dims: &[usize], target: &Partition) -> Option<Vec<f64>> {
    let m = src.product_measurement(dims).ok()?;
    let mut params = Vec::new();
    for tb in target.blocks() {
        let parts: Vec<&ProjectiveBasis> = m.bases.iter().filter(|b| b.target.iter().any(|l| tb.contains(l))).collect();
        let mut covered: Vec<usize> = parts.iter().flat_map(|b| b.target.iter().copied()).collect();
        covered.sort_unstable();
        if &covered != tb {
            return None;
        }
        if parts.len() == 1 {
            params.extend(&parts[0].params);
        } else {
            let mut u = CMatrix::from_element(1, 1, ONE);
            for b in parts {
                u = u.kronecker(b.unitary());
            }
            params.extend(params_from_unitary(&u).ok()?);
        }
    }
    Some(params)
}

/// Caches discord values per partition and seeds each new evaluation from the
/// measurements already found on finer partitions.
pub struct Evaluator<'a> {
    rho: &'a DensityMatrix,
    kind: MeasureKind,
    cfg: &'a OptimizerConfig,
    cache: BTreeMap<Partition, DiscordResult>,
}

impl<'a> Evaluator<'a> {
    pub fn new(rho: &'a DensityMatrix, kind: MeasureKind, cfg: &'a OptimizerConfig) -> Self {
        let kind = if kind == MeasureKind::QdBipartite { MeasureKind::Mqd } else { kind };
        Self {
            rho,
            kind,
            cfg,
            cache: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn get(&mut self, p: &Partition) -> Result<DiscordResult> {
        if let Some(r) = self.cache.get(p) {
            return Ok(r.clone());
        }
        let dims = self.rho.dims();
        let starts: Vec<Vec<f64>> = self
            .cache
            .values()
            .filter_map(|src| match self.kind {
                MeasureKind::Gqd => induced_product_start(src, &dims, p),
                _ => induced_tree_start(src, &dims, p),
            })
            .collect();
        let r = discord::discord_with_starts(self.rho, self.kind, p, self.cfg, &starts)?;
        self.cache.insert(p.clone(), r.clone());
        Ok(r)
    }

    pub fn value(&mut self, p: &Partition) -> Result<f64> {
        Ok(self.get(p)?.value)
    }

    pub fn label(&self, p: &Partition) -> String {
        let names = self.rho.names();
        let parts: Vec<String> = p
            .blocks()
            .iter()
            .map(|b| b.iter().map(|&i| names.get(i).copied().unwrap_or("?")).collect())
            .collect();
        format!("D_{{{}}}", parts.join(self.kind.separator()))
    }

    /// `lhs >= sum(rhs)` with the left side's certification.
    fn inequality(&mut self, name: &str, lhs: &Partition, rhs: &[&Partition]) -> Result<InequalityCheck> {
        let l = self.get(lhs)?;
        let mut terms = vec![(l.label.clone(), l.value)];
        let mut total = 0.0;
        for r in rhs {
            let v = self.get(r)?;
            total += v.value;
            terms.push((v.label.clone(), v.value));
        }
        let statement = format!(
            "{} >= {}",
            self.label(lhs),
            rhs.iter().map(|r| self.label(r)).collect::<Vec<_>>().join(" + ")
        );
        let mut c = InequalityCheck {
            name: name.to_string(),
            statement,
            lhs: l.value,
            rhs: total,
            margin: l.value - total,
            terms,
            lhs_certified: l.opt.certified,
            lhs_spread: l.opt.spread,
            assumptions: Vec::new(),
            any_assumption: false,
            verdict: Verdict::Holds,
        };
        c.decide();
        Ok(c)
    }
}

fn names_of(rho: &DensityMatrix, labels: &[usize]) -> String {
    let names = rho.names();
    labels.iter().map(|&i| names[i]).collect()
}

/// `d_{X;Y}` at the optimal tree of the finest partition `tree_src`, with `Y`
/// the block at index `y_block` (everything before it measured).
fn d_at(rho: &DensityMatrix, top: &DiscordResult, x: &[usize], y_block: usize) -> Result<f64> {
    let tree = top.tree(&rho.dims())?;
    d_quantity(rho, x, &top.blocks[y_block], &tree, y_block)
}

fn d_assumption(rho: &DensityMatrix, top: &DiscordResult, big: &[usize], small: &[usize], y: usize) -> Result<Assumption> {
    let yname = names_of(rho, &top.blocks[y]);
    let l = d_at(rho, top, big, y)?;
    let r = d_at(rho, top, small, y)?;
    Ok(assumption(
        format!("d_{{{};{yname}}} >= d_{{{};{yname}}}", names_of(rho, big), names_of(rho, small)),
        l,
        r,
        EPS_D,
    ))
}

fn part(blocks: &[&[usize]]) -> Partition {
    Partition::new(blocks.iter().map(|b| b.to_vec()).collect()).expect("catalog partitions are valid")
}

/// Identifiers accepted by [`check_proposition`].
pub const PROPOSITION_IDS: &[&str] = &[
    "prop1.item1",
    "prop1.item1.ac",
    "prop1.item2",
    "prop1.item3",
    "prop1.item3.b",
    "prop1.item4",
    "prop3",
    "prop4.item1",
    "prop4.item2",
    "prop4.item3.ab",
    "prop4.item3.ac",
    "prop4.item3.ad",
    "prop4.item4",
    "prop4.item5",
    "prop4.item6",
    "prop4.item7",
    "prop4.item8",
    "prop4.item9",
    "prop4.item10",
    "prop4.item11",
    "prop4.item12",
    "prop4.item13",
    "prop4.item14",
    "prop4.item15",
    "thm1.item1",
    "thm1.item2",
    "thm1.item3",
    "thm1.item4",
    "gqd_bound_eq26",
];

/// Expands an id or a group prefix (`prop1`, `prop4`, `thm1`) into catalog ids.
pub fn expand_proposition_id(id: &str) -> Result<Vec<&'static str>> {
    if let Some(&exact) = PROPOSITION_IDS.iter().find(|&&p| p == id) {
        return Ok(vec![exact]);
    }
    let group: Vec<&'static str> = PROPOSITION_IDS
        .iter()
        .copied()
        .filter(|p| p.starts_with(id) && p[id.len()..].starts_with('.'))
        .collect();
    if group.is_empty() {
        return Err(invalid_arg(format!("unknown proposition {id:?}")));
    }
    Ok(group)
}

fn need_parties(rho: &DensityMatrix, id: &str, n: usize) -> Result<()> {
    if rho.n_subsystems() != n {
        return Err(invalid_arg(format!(
            "{id} is stated for {n} parties, the state has {}",
            rho.n_subsystems()
        )));
    }
    Ok(())
}

/// Evaluates catalog inequalities on `rho`. Assumption-gated items evaluate
/// their d-quantities at the optimal tree of the finest partition.
pub fn check_proposition(rho: &DensityMatrix, prop_id: &str, cfg: &OptimizerConfig) -> Result<Vec<InequalityCheck>> {
    let ids = expand_proposition_id(prop_id)?;
    let kind = if ids.iter().all(|i| *i == "gqd_bound_eq26") { MeasureKind::Gqd } else { MeasureKind::Mqd };
    let mut ev = Evaluator::new(rho, kind, cfg);
    let mut gqd_ev = Evaluator::new(rho, MeasureKind::Gqd, cfg);
    let mut out = Vec::new();
    for id in ids {
        if id == "gqd_bound_eq26" {
            out.push(gqd_bound(rho, &mut gqd_ev)?);
        } else {
            out.extend(mqd_item(rho, id, &mut ev)?);
        }
    }
    Ok(out)
}

fn mqd_item(rho: &DensityMatrix, id: &str, ev: &mut Evaluator) -> Result<Vec<InequalityCheck>> {
    let (a, b, c, d): (&[usize], &[usize], &[usize], &[usize]) = (&[0], &[1], &[2], &[3]);
    if id.starts_with("prop1") || id == "prop3" {
        need_parties(rho, id, 3)?;
        let top = part(&[a, b, c]);
        let t = ev.get(&top)?;
        let check = match id {
            "prop1.item1" => ev.inequality(id, &top, &[&part(&[a, b]), &part(&[&[0, 1], c])])?,
            "prop1.item1.ac" => ev.inequality(id, &top, &[&part(&[a, c])])?,
            "prop1.item2" => {
                let mut k = ev.inequality(id, &top, &[&part(&[b, c])])?;
                k.assumptions.push(d_assumption(rho, &t, &[0, 1], b, 2)?);
                k
            }
            "prop1.item3" => ev.inequality(id, &top, &[&part(&[a, &[1, 2]])])?,
            "prop1.item3.b" => ev.inequality(id, &part(&[a, &[1, 2]]), &[&part(&[a, b])])?,
            "prop1.item4" => {
                let mut k = ev.inequality(id, &part(&[a, &[1, 2]]), &[&part(&[a, c])])?;
                k.assumptions.push(d_assumption(rho, &t, &[0, 1], a, 2)?);
                k
            }
            "prop3" => {
                let mut k = ev.inequality(id, &top, &[&part(&[a, b]), &part(&[a, c])])?;
                k.assumptions.push(d_assumption(rho, &t, &[0, 1], a, 2)?);
                k
            }
            _ => return Err(invalid_arg(format!("unknown proposition {id:?}"))),
        };
        let mut check = check;
        check.decide();
        return Ok(vec![check]);
    }
    if id.starts_with("prop4") {
        need_parties(rho, id, 4)?;
        let top = part(&[a, b, c, d]);
        let t = ev.get(&top)?;
        let abc: &[usize] = &[0, 1, 2];
        let ab: &[usize] = &[0, 1];
        let (rhs, assumptions, any): (Vec<Partition>, Vec<Assumption>, bool) = match id {
            "prop4.item1" => (vec![part(&[a, b, c]), part(&[abc, d])], vec![], false),
            "prop4.item2" => (vec![part(&[a, b, d])], vec![], false),
            "prop4.item3.ab" => (vec![part(&[a, b])], vec![], false),
            "prop4.item3.ac" => (vec![part(&[a, c])], vec![], false),
            "prop4.item3.ad" => (vec![part(&[a, d])], vec![], false),
            "prop4.item4" => (vec![part(&[a, c, d])], vec![d_assumption(rho, &t, abc, &[0, 2], 3)?], false),
            "prop4.item5" => (
                vec![part(&[a, c, d]), part(&[a, b])],
                vec![d_assumption(rho, &t, abc, &[0, 2], 3)?, d_assumption(rho, &t, ab, a, 2)?],
                false,
            ),
            "prop4.item6" => (
                vec![part(&[b, c, d]), part(&[a, b])],
                vec![d_assumption(rho, &t, abc, &[1, 2], 3)?, d_assumption(rho, &t, ab, b, 2)?],
                false,
            ),
            "prop4.item7" => (
                vec![part(&[a, b, d]), part(&[ab, c])],
                vec![d_assumption(rho, &t, abc, ab, 3)?],
                false,
            ),
            "prop4.item8" => (
                vec![part(&[b, c])],
                vec![d_assumption(rho, &t, ab, b, 2)?, d_abc_d_vs_b_c(rho, &t)?],
                true,
            ),
            "prop4.item9" => (vec![part(&[b, d])], vec![d_assumption(rho, &t, abc, b, 3)?], false),
            "prop4.item10" => (vec![part(&[c, d])], vec![d_assumption(rho, &t, abc, a, 3)?], false),
            "prop4.item11" => (vec![part(&[ab, &[2, 3]]), part(&[a, b])], vec![], false),
            "prop4.item12" => (vec![part(&[a, &[1, 2, 3]])], vec![], false),
            "prop4.item13" => (vec![part(&[a, &[1, 2], d])], vec![], false),
            "prop4.item14" => (vec![part(&[ab, c, d]), part(&[a, b])], vec![], false),
            "prop4.item15" => (vec![part(&[a, b, &[2, 3]])], vec![], false),
            _ => return Err(invalid_arg(format!("unknown proposition {id:?}"))),
        };
        let refs: Vec<&Partition> = rhs.iter().collect();
        let mut k = ev.inequality(id, &top, &refs)?;
        k.assumptions = assumptions;
        k.any_assumption = any;
        k.decide();
        return Ok(vec![k]);
    }
    if id.starts_with("thm1") {
        return thm1_item(rho, id, ev);
    }
    Err(invalid_arg(format!("unknown proposition {id:?}")))
}

/// `d_{ABC;D} >= d_{B;C}`: the two sides have different targets, so each is
/// evaluated at its own target's depth in the tree.
fn d_abc_d_vs_b_c(rho: &DensityMatrix, top: &DiscordResult) -> Result<Assumption> {
    let l = d_at(rho, top, &[0, 1, 2], 3)?;
    let r = d_at(rho, top, &[1], 2)?;
    Ok(assumption("d_{ABC;D} >= d_{B;C}".to_string(), l, r, EPS_D))
}

fn thm1_item(rho: &DensityMatrix, id: &str, ev: &mut Evaluator) -> Result<Vec<InequalityCheck>> {
    let n = rho.n_subsystems();
    if n < 3 {
        return Err(invalid_arg(format!("{id} needs at least three parties")));
    }
    let single = |i: usize| vec![i];
    let top = Partition::singletons(n);
    let mut out = Vec::new();
    match id {
        "thm1.item1" => {
            let merged = Partition::new(vec![(0..n - 1).collect(), single(n - 1)])?;
            let prefix = Partition::singletons(n - 1);
            out.push(ev.inequality(id, &top, &[&merged, &prefix])?);
        }
        "thm1.item2" => {
            for p in 2..n {
                let mut blocks: Vec<Vec<usize>> = (0..p).map(single).collect();
                blocks.push(single(n - 1));
                let q = Partition::new(blocks)?;
                out.push(ev.inequality(&format!("{id}.p{p}"), &top, &[&q])?);
            }
        }
        "thm1.item3" => {
            for i in 2..n {
                let q = Partition::new(vec![single(0), single(i)])?;
                out.push(ev.inequality(&format!("{id}.i{}", i + 1), &top, &[&q])?);
            }
        }
        "thm1.item4" => {
            let merges = coarser_set(&top, crate::partition::MoveSet::MERGE);
            for q in merges {
                out.push(ev.inequality(&format!("{id}.{q}"), &top, &[&q])?);
                let first = &q.blocks()[0];
                if first.len() >= 2 {
                    let prefix = Partition::singletons(first.len());
                    out.push(ev.inequality(&format!("{id}.sum.{q}"), &top, &[&q, &prefix])?);
                }
            }
        }
        _ => return Err(invalid_arg(format!("unknown proposition {id:?}"))),
    }
    Ok(out)
}

/// `D_{A1:...:An} >= sum_k D_{A1:A_{k+1}}`, gated on
/// `D_{A1...Ak:A_{k+1}} >= D_{A1:A_{k+1}}` for `2 <= k < n`.
fn gqd_bound(rho: &DensityMatrix, ev: &mut Evaluator) -> Result<InequalityCheck> {
    let n = rho.n_subsystems();
    if n < 3 {
        return Err(invalid_arg("gqd_bound_eq26 needs at least three parties"));
    }
    let top = Partition::singletons(n);
    let pairs: Vec<Partition> = (1..n).map(|k| Partition::new(vec![vec![0], vec![k]]).unwrap()).collect();
    let refs: Vec<&Partition> = pairs.iter().collect();
    let mut check = ev.inequality("gqd_bound_eq26", &top, &refs)?;
    for k in 2..n {
        let big = Partition::new(vec![(0..k).collect(), vec![k]])?;
        let l = ev.value(&big)?;
        let r = ev.value(&pairs[k - 1])?;
        check.assumptions.push(assumption(
            format!("{} >= {}", ev.label(&big), ev.label(&pairs[k - 1])),
            l,
            r,
            EPS_CHECK,
        ));
        check.terms.push((ev.label(&big), l));
    }
    check.decide();
    Ok(check)
}

/// Checks `D_p >= D_q` along every single coarsening move reachable from
/// `top` (moves allowed by the measure kind).
pub fn check_complete(
    rho: &DensityMatrix,
    kind: MeasureKind,
    top: &Partition,
    cfg: &OptimizerConfig,
) -> Result<Vec<InequalityCheck>> {
    if top.n_blocks() < 2 {
        return Err(invalid_arg("the top partition needs at least two blocks"));
    }
    let allowed = kind.allowed_moves();
    let mut ev = Evaluator::new(rho, kind, cfg);
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([top.clone()]);
    seen.insert(top.clone());
    let mut checks = Vec::new();
    while let Some(p) = queue.pop_front() {
        for m in available_moves(&p, allowed) {
            let q = apply_move(&p, &m)?;
            if q.n_blocks() < 2 {
                continue;
            }
            let name = format!("complete.{p}>{q}");
            checks.push(ev.inequality(&name, &p, &[&q])?);
            if seen.insert(q.clone()) {
                queue.push_back(q);
            }
        }
    }
    Ok(checks)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XiEntry {
    pub partition: Partition,
    pub label: String,
    pub value: f64,
    pub vanishes: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonogamyReport {
    pub state_id: String,
    pub kind: MeasureKind,
    pub finer: Partition,
    pub coarser: Partition,
    /// Partitions along a coarsening chain from `finer` to `coarser`.
    pub chain: Vec<(String, f64)>,
    pub checks: Vec<InequalityCheck>,
    /// `|D_finer - D_coarser| <= EPS_EQ`.
    pub equality: bool,
    pub xi: Vec<XiEntry>,
    /// The dis-correlated condition: no equality, or every Xi member vanishes.
    pub dis_correlated: bool,
}

pub fn check_discorrelated(
    rho: &DensityMatrix,
    kind: MeasureKind,
    p: &Partition,
    q: &Partition,
    cfg: &OptimizerConfig,
) -> Result<MonogamyReport> {
    let allowed = {
        let k = if kind == MeasureKind::QdBipartite { MeasureKind::Mqd } else { kind };
        k.allowed_moves()
    };
    let chain = is_coarser(p, q, allowed)
        .ok_or_else(|| invalid_arg(format!("{q} is not coarser than {p} for {kind}")))?;
    let mut ev = Evaluator::new(rho, kind, cfg);
    let mut steps = Vec::new();
    let mut cur = p.clone();
    steps.push((ev.label(&cur), ev.value(&cur)?));
    for m in &chain.moves {
        cur = apply_move(&cur, m)?;
        if cur.n_blocks() >= 2 {
            steps.push((ev.label(&cur), ev.value(&cur)?));
        }
    }
    let check = ev.inequality("discorrelated.monotone", p, &[q])?;
    let equality = (ev.value(p)? - ev.value(q)?).abs() <= EPS_EQ;
    let mut xi = Vec::new();
    for g in xi_set_with(p, q, allowed)? {
        let r = ev.get(&g)?;
        xi.push(XiEntry {
            label: ev.label(&g),
            partition: g,
            value: r.value,
            vanishes: r.value <= EPS_ZERO,
        });
    }
    let dis_correlated = !equality || xi.iter().all(|x| x.vanishes);
    Ok(MonogamyReport {
        state_id: String::new(),
        kind: ev.kind(),
        finer: p.clone(),
        coarser: q.clone(),
        chain: steps,
        checks: vec![check],
        equality,
        xi,
        dis_correlated,
    })
}

/// Squared Frobenius distance between `rho` and its dephasing in the given
/// local bases (blocks disjoint, not necessarily covering).
fn dephasing_defect(rho: &DensityMatrix, blocks: &[Vec<usize>], x: &[f64]) -> f64 {
    let dims = rho.dims();
    let mut w = CMatrix::identity(rho.dim(), rho.dim());
    let mut off = 0;
    for b in blocks {
        let d: usize = b.iter().map(|&p| dims[p]).product();
        let np = n_basis_params(d);
        let u = unitary_from_params(d, &x[off..off + np]);
        off += np;
        w = linalg::embed_operator(&u, &dims, b) * w;
    }
    let r = w.adjoint() * rho.matrix() * &w;
    let keys: Vec<Vec<usize>> = blocks.iter().map(|b| linalg::split_indices(&dims, b).into_iter().map(|k| k.0).collect()).collect();
    let mut acc = 0.0;
    for i in 0..r.nrows() {
        for j in 0..r.ncols() {
            if keys.iter().any(|k| k[i] != k[j]) {
                acc += r[(i, j)].norm_sqr();
            }
        }
    }
    acc
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalWitness {
    pub classical: bool,
    /// Distance `||rho - Phi(rho)||` at the best bases found.
    pub distance: f64,
    pub bases: Vec<ProjectiveBasis>,
}

/// Whether some local bases on `blocks` leave `rho` unchanged (within 1e-9).
pub fn is_classical_on(rho: &DensityMatrix, blocks: &[Vec<usize>], cfg: &OptimizerConfig) -> Result<ClassicalWitness> {
    let dims = rho.dims();
    let mut used = BTreeSet::new();
    for b in blocks {
        if b.is_empty() {
            return Err(invalid_arg("empty block"));
        }
        for &p in b {
            if p >= dims.len() || !used.insert(p) {
                return Err(invalid_arg("blocks must be disjoint positions of the state"));
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = blocks.to_vec();
    for b in &mut blocks {
        b.sort_unstable();
    }
    let bdims: Vec<usize> = blocks.iter().map(|b| b.iter().map(|&p| dims[p]).product()).collect();
    let n: usize = bdims.iter().map(|&d| n_basis_params(d)).sum();
    let f = |x: &[f64]| dephasing_defect(rho, &blocks, x);
    let tight = OptimizerConfig {
        f_tol: 1e-24,
        ..cfg.clone()
    };
    let opt = Minimizer::new(&f, n, &tight)
        .qubit_grid(bdims.iter().all(|&d| d == 2))
        .start(vec![0.0; n])
        .run()?;
    let distance = opt.value.max(0.0).sqrt();
    let mut off = 0;
    let mut bases = Vec::new();
    for (b, &d) in blocks.iter().zip(&bdims) {
        let np = n_basis_params(d);
        bases.push(ProjectiveBasis::from_params(b.clone(), d, opt.params[off..off + np].to_vec())?);
        off += np;
    }
    Ok(ClassicalWitness {
        classical: distance <= 1e-9,
        distance,
        bases,
    })
}

pub const ALPHA_MIN: f64 = 1e-3;
pub const ALPHA_MAX: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    /// The inequality is an equality for every exponent.
    pub equality: bool,
}

/// Smallest `alpha` in `[ALPHA_MIN, ALPHA_MAX]` with
/// `lhs^alpha >= sum_i rhs_i^alpha`, by bisection.
pub fn monogamy_alpha(lhs: f64, rhs: &[f64]) -> Result<Option<AlphaResult>> {
    if lhs < 0.0 || rhs.iter().any(|&r| r < 0.0) || !lhs.is_finite() || rhs.iter().any(|r| !r.is_finite()) {
        return Err(invalid_arg("monogamy exponent needs finite non-negative values"));
    }
    let positive: Vec<f64> = rhs.iter().copied().filter(|&r| r > 0.0).collect();
    if positive.is_empty() {
        return Ok(Some(AlphaResult {
            alpha: ALPHA_MIN,
            equality: lhs == 0.0,
        }));
    }
    if lhs == 0.0 || positive.iter().any(|&r| r > lhs) {
        return Ok(None);
    }
    if positive.iter().any(|&r| r == lhs) {
        return Ok(if positive.len() == 1 {
            Some(AlphaResult {
                alpha: ALPHA_MIN,
                equality: true,
            })
        } else {
            None
        });
    }
    let excess = |a: f64| positive.iter().map(|&r| (r / lhs).powf(a)).sum::<f64>() - 1.0;
    if excess(ALPHA_MIN) <= 0.0 {
        return Ok(Some(AlphaResult {
            alpha: ALPHA_MIN,
            equality: false,
        }));
    }
    if excess(ALPHA_MAX) > 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (ALPHA_MIN, ALPHA_MAX);
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if excess(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(AlphaResult {
        alpha: hi,
        equality: false,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Ginibre states of the given rank (full rank when 0).
    Ginibre { rank: usize },
    /// Random diagonal states.
    Classical,
}

impl std::str::FromStr for Sampler {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "ginibre" => Ok(Sampler::Ginibre { rank: 0 }),
            None if s == "classical" => Ok(Sampler::Classical),
            Some(("ginibre", r)) => r
                .parse()
                .map(|rank| Sampler::Ginibre { rank })
                .map_err(|_| invalid_arg(format!("bad rank in sampler {s:?}"))),
            _ => Err(invalid_arg(format!("unknown sampler {s:?} (ginibre[:RANK] or classical)"))),
        }
    }
}

impl Sampler {
    pub fn sample(self, dims: &[usize], seed: u64) -> Result<DensityMatrix> {
        match self {
            Sampler::Ginibre { rank } => {
                let d: usize = dims.iter().product();
                sample_random_state(dims, if rank == 0 { d } else { rank }, seed)
            }
            Sampler::Classical => {
                if dims.iter().any(|&d| d != 2) {
                    return Err(invalid_arg("the classical sampler draws qubit states"));
                }
                make_named_state("classical_random", &[dims.len() as f64, seed as f64])
            }
        }
    }
}

/// Seed of sample `i` in a scan seeded with `seed`.
pub fn sample_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub sample: usize,
    pub seed: u64,
    pub assumption: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AssumptionSummary {
    pub assumption: String,
    pub count: usize,
    pub violations: usize,
    pub min_margin: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScanSummary {
    pub n_samples: usize,
    pub rows: Vec<ScanRow>,
    pub per_assumption: Vec<AssumptionSummary>,
    pub offending_samples: Vec<usize>,
    pub saved_states: Vec<PathBuf>,
}

/// Regenerates samples `indices` of a scan and writes each as
/// `offender_NNNNN.state` under `dir`.
pub fn save_samples(sampler: Sampler, dims: &[usize], seed: u64, indices: &[usize], dir: &Path) -> Result<Vec<PathBuf>> {
    if indices.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir)?;
    indices
        .iter()
        .map(|&i| {
            let path = dir.join(format!("offender_{i:05}.state"));
            save_state(&path, &sampler.sample(dims, sample_seed(seed, i))?)?;
            Ok(path)
        })
        .collect()
}

/// The conjectured d-quantity comparisons for one state: for MQD every
/// `d_{Z1..Zs;Z_{s+1}} >= d_{X;Z_{s+1}}` with `X` a proper subset of the
/// measured prefix, at the optimal tree of the finest partition; for GQD
/// `d(full) >= d(sub)` for every sub-collection of at least two blocks, at
/// the optimal product measurement.
pub fn assumption_margins(rho: &DensityMatrix, kind: MeasureKind, cfg: &OptimizerConfig) -> Result<Vec<(String, f64, f64)>> {
    let n = rho.n_subsystems();
    let top = Partition::singletons(n);
    let mut out = Vec::new();
    match kind {
        MeasureKind::Gqd => {
            let r = discord::gqd(rho, &top, cfg)?;
            let m = r.product_measurement(&rho.dims())?;
            let names = rho.names();
            for mask in 1u32..(1 << n) - 1 {
                let sub: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                if sub.len() < 2 {
                    continue;
                }
                let (defect, _) = gqd_defect(rho, &top, &sub, &m)?;
                let sub_name = sub.iter().map(|&i| names[i]).collect::<Vec<_>>().join(":");
                let full_name = names.join(":");
                // margin = d(full) - d(sub) = defect
                out.push((format!("d^Phi_{{{full_name}}} >= d^Phi_{{{sub_name}}}"), defect, 0.0));
            }
        }
        _ => {
            if n < 3 {
                return Err(invalid_arg("assumption scans need at least three parties"));
            }
            let r = discord::mqd(rho, &top, cfg)?;
            for s in 2..n {
                let prefix: Vec<usize> = (0..s).collect();
                for mask in 1u32..(1 << s) - 1 {
                    let sub: Vec<usize> = (0..s).filter(|i| mask & (1 << i) != 0).collect();
                    let a = d_assumption(rho, &r, &prefix, &sub, s)?;
                    out.push((a.statement, a.lhs, a.rhs));
                }
            }
        }
    }
    Ok(out)
}

/// Samples states, evaluates [`assumption_margins`] and collects every
/// negative margin; offending states are written to `save_dir` when given.
pub fn scan_assumptions(
    n_samples: usize,
    dims: &[usize],
    sampler: Sampler,
    kind: MeasureKind,
    cfg: &OptimizerConfig,
    seed: u64,
    save_dir: Option<&Path>,
) -> Result<ScanSummary> {
    if dims.len() > 4 || dims.iter().product::<usize>() > 16 {
        return Err(invalid_arg("scans are limited to four qubits"));
    }
    let per_sample: Vec<Result<Vec<ScanRow>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let s = sample_seed(seed, i);
            let rho = sampler.sample(dims, s)?;
            Ok(assumption_margins(&rho, kind, cfg)?
                .into_iter()
                .map(|(assumption, lhs, rhs)| {
                    let margin = lhs - rhs;
                    ScanRow {
                        sample: i,
                        seed: s,
                        assumption,
                        lhs,
                        rhs,
                        margin,
                        violated: margin < -EPS_D,
                    }
                })
                .collect())
        })
        .collect();
    let mut summary = ScanSummary {
        n_samples,
        ..Default::default()
    };
    for rows in per_sample {
        summary.rows.extend(rows?);
    }
    let mut per: BTreeMap<String, AssumptionSummary> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for row in &summary.rows {
        let e = per.entry(row.assumption.clone()).or_insert_with(|| {
            order.push(row.assumption.clone());
            AssumptionSummary {
                assumption: row.assumption.clone(),
                ..Default::default()
            }
        });
        e.count += 1;
        e.violations += row.violated as usize;
        e.min_margin = Some(e.min_margin.map_or(row.margin, |m: f64| m.min(row.margin)));
        if row.violated && summary.offending_samples.last() != Some(&row.sample) {
            summary.offending_samples.push(row.sample);
        }
    }
    summary.per_assumption = order.into_iter().map(|k| per.remove(&k).unwrap()).collect();
    if let Some(dir) = save_dir {
        summary.saved_states = save_samples(sampler, dims, seed, &summary.offending_samples, dir)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::load_state;

    fn p(s: &str) -> Partition {
        Partition::parse(s).unwrap()
    }

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 8,
            ..Default::default()
        }
    }

    #[test]
    fn alpha_examples() {
        let a = monogamy_alpha(1.0, &[0.0, 0.0, 0.0]).unwrap().unwrap();
        assert_eq!(a.alpha, ALPHA_MIN);
        let a = monogamy_alpha(1.0, &[1.0, 0.0, 0.0]).unwrap().unwrap();
        assert!(a.equality);
        assert_eq!(a.alpha, ALPHA_MIN);
        let a = monogamy_alpha(1.0, &[0.6, 0.6, 0.0]).unwrap().unwrap();
        let expect = 2f64.ln() / (1.0 / 0.6f64).ln();
        assert!((a.alpha - expect).abs() < 1e-9, "{}", a.alpha);
        assert!(monogamy_alpha(1.0, &[1.2]).unwrap().is_none());
        assert!(monogamy_alpha(0.0, &[0.1]).unwrap().is_none());
        assert!(monogamy_alpha(-1.0, &[0.1]).is_err());
        assert!(monogamy_alpha(1.0, &[1.0, 0.5]).unwrap().is_none());
    }

    #[test]
    fn alpha_is_tight() {
        for rhs in [[0.3, 0.5, 0.2], [0.7, 0.1, 0.05], [0.5, 0.5, 0.5]] {
            let lhs: f64 = 0.9;
            let a = monogamy_alpha(lhs, &rhs).unwrap().unwrap().alpha;
            let holds = |x: f64| lhs.powf(x) >= rhs.iter().map(|r| r.powf(x)).sum::<f64>() - 1e-12;
            assert!(holds(a));
            if a > ALPHA_MIN {
                assert!(!holds(a / 1.01));
            }
        }
    }

    #[test]
    fn catalog_ids() {
        assert_eq!(expand_proposition_id("prop1").unwrap().len(), 6);
        assert_eq!(expand_proposition_id("prop1.item1").unwrap(), vec!["prop1.item1"]);
        assert_eq!(expand_proposition_id("prop4").unwrap().len(), 17);
        assert!(expand_proposition_id("prop2").is_err());
        assert!(expand_proposition_id("prop").is_err());
    }

    #[test]
    fn prop1_on_classical_state() {
        let rho = make_named_state("classical_random", &[3.0, 6.0]).unwrap();
        for c in check_proposition(&rho, "prop1", &quick()).unwrap() {
            assert!(c.margin.abs() < 1e-6, "{} {}", c.name, c.margin);
            assert_eq!(c.verdict, Verdict::Holds);
        }
    }

    #[test]
    fn prop1_unconditional_items_hold_on_random_states() {
        for seed in 0..4 {
            let rho = sample_random_state(&[2, 2, 2], 2, seed).unwrap();
            for id in ["prop1.item1", "prop1.item1.ac", "prop1.item3", "prop1.item3.b"] {
                for c in check_proposition(&rho, id, &quick()).unwrap() {
                    assert!(c.margin >= -EPS_CHECK, "{} {}", c.name, c.margin);
                    assert!(c.lhs_certified || id == "prop1.item3.b");
                }
            }
        }
    }

    #[test]
    fn wrong_party_count_rejected() {
        let rho = make_named_state("bell", &[]).unwrap();
        assert!(check_proposition(&rho, "prop1.item1", &quick()).is_err());
        assert!(check_proposition(&rho, "nope", &quick()).is_err());
    }

    #[test]
    fn eq26_assumption_fails_on_incompatible_state() {
        let rho = make_named_state("paper_cx_p11", &[]).unwrap();
        let c = &check_proposition(&rho, "gqd_bound_eq26", &quick()).unwrap()[0];
        assert!(!c.assumptions[0].satisfied);
        assert_eq!(c.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn gqd_counterexample_is_not_dis_correlated() {
        let rho = make_named_state("paper_cx_1p11", &[]).unwrap();
        let r = check_discorrelated(&rho, MeasureKind::Gqd, &p("A|B|C"), &p("A|B"), &quick()).unwrap();
        assert!(r.equality);
        assert!(!r.dis_correlated);
        let bc = r.xi.iter().find(|x| x.partition == p("B|C")).unwrap();
        assert!(bc.value > 0.1);
        let labels: Vec<String> = r.xi.iter().map(|x| x.partition.to_string()).collect();
        assert_eq!(labels, vec!["A|C", "B|C"]);
    }

    #[test]
    fn product_state_is_vacuously_dis_correlated() {
        let rho = make_named_state("product_random", &[3.0, 1.0]).unwrap();
        let r = check_discorrelated(&rho, MeasureKind::Mqd, &p("A|B|C"), &p("A|C"), &quick()).unwrap();
        assert!(r.equality);
        assert!(r.dis_correlated);
        assert!(r.xi.iter().all(|x| x.vanishes));
        assert!(check_discorrelated(&rho, MeasureKind::Gqd, &p("A|BC"), &p("A|B"), &quick()).is_err());
    }

    /// rho = sum p_kj |k><k|^A |j><j|^B (x) rho_kj^C: D_{A;B;C} = D_{A;C} and the
    /// Xi members D_{A;B}, D_{B;C} vanish.
    #[test]
    fn classical_ab_structure_discords_vanish() {
        let mut m = CMatrix::zeros(8, 8);
        let probs = [0.1, 0.2, 0.3, 0.4];
        for (kj, &pk) in probs.iter().enumerate() {
            let c = sample_random_state(&[2], 2, 40 + kj as u64).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    m[(2 * kj + i, 2 * kj + j)] = c.matrix()[(i, j)] * pk;
                }
            }
        }
        let rho = DensityMatrix::from_dims(&[2, 2, 2], m).unwrap();
        let w = is_classical_on(&rho, &[vec![0], vec![1]], &quick()).unwrap();
        assert!(w.classical);
        let r = check_discorrelated(&rho, MeasureKind::Mqd, &p("A|B|C"), &p("A|C"), &quick()).unwrap();
        for x in &r.xi {
            if x.partition == p("A|B") || x.partition == p("B|C") {
                assert!(x.vanishes, "{} = {}", x.label, x.value);
            }
        }
    }

    #[test]
    fn classical_structure_detection() {
        let rho = make_named_state("paper_cx_1p11", &[]).unwrap();
        let w = is_classical_on(&rho, &[vec![0]], &quick()).unwrap();
        assert!(w.classical, "{}", w.distance);
        let bell = make_named_state("bell", &[]).unwrap();
        let w = is_classical_on(&bell, &[vec![0]], &quick()).unwrap();
        assert!(!w.classical);
        assert!(w.distance > 0.1);
        assert!(is_classical_on(&bell, &[vec![0], vec![0]], &quick()).is_err());
        // classical in a rotated basis: |+><+| (x) rho0 + |-><-| (x) rho1
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = CMatrix::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)]);
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = C64::new(0.3, 0.0);
        m[(1, 1)] = C64::new(0.2, 0.0);
        m[(2, 2)] = C64::new(0.4, 0.0);
        m[(3, 3)] = C64::new(0.1, 0.0);
        m[(2, 3)] = C64::new(0.05, 0.0);
        m[(3, 2)] = C64::new(0.05, 0.0);
        let w4 = u.kronecker(&CMatrix::identity(2, 2));
        let rot = DensityMatrix::from_dims(&[2, 2], &w4 * m * w4.adjoint()).unwrap();
        assert!(is_classical_on(&rot, &[vec![0]], &quick()).unwrap().classical);
    }

    #[test]
    fn complete_check_on_classical_state() {
        let rho = make_named_state("classical_random", &[3.0, 2.0]).unwrap();
        let checks = check_complete(&rho, MeasureKind::Mqd, &p("A|B|C"), &quick()).unwrap();
        assert!(checks.len() >= 5);
        for c in checks {
            assert!(c.margin.abs() < 1e-6);
        }
    }

    #[test]
    fn induced_starts_reproduce_parent_parts() {
        let rho = sample_random_state(&[2, 2, 2], 3, 77).unwrap();
        let cfg = quick();
        let mut ev = Evaluator::new(&rho, MeasureKind::Mqd, &cfg);
        let top = ev.get(&p("A|B|C")).unwrap();
        let start = induced_tree_start(&top, &rho.dims(), &p("AB|C")).unwrap();
        let tree = crate::measure::MeasurementTree::from_params(&[2, 2, 2], &p("AB|C"), &start).unwrap();
        let full = top.tree(&[2, 2, 2]).unwrap();
        let a = crate::measure::apply_tree(&rho, &tree, 1).unwrap();
        let b = crate::measure::apply_tree(&rho, &full, 2).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
        assert!(induced_tree_start(&top, &rho.dims(), &p("B|C")).is_none());
        let ac = induced_tree_start(&top, &rho.dims(), &p("A|C")).unwrap();
        for (x, y) in ac.iter().zip(&top.opt.params[..2]) {
            let tau = std::f64::consts::TAU;
            assert!(((x - y).rem_euclid(tau) + 1e-9) % tau < 1e-8, "{x} {y}");
        }
    }

    #[test]
    fn scans() {
        let empty = scan_assumptions(0, &[2, 2, 2], Sampler::Ginibre { rank: 0 }, MeasureKind::Mqd, &quick(), 1, None).unwrap();
        assert!(empty.rows.is_empty() && empty.per_assumption.is_empty());
        let classical = scan_assumptions(3, &[2, 2, 2], Sampler::Classical, MeasureKind::Mqd, &quick(), 1, None).unwrap();
        assert_eq!(classical.rows.len(), 3 * 2);
        assert!(classical.rows.iter().all(|r| r.margin >= -1e-9));
        let g = scan_assumptions(2, &[2, 2, 2], Sampler::Classical, MeasureKind::Gqd, &quick(), 1, None).unwrap();
        assert_eq!(g.per_assumption.len(), 3);
    }

    #[test]
    fn saved_samples_replay() {
        let dir = std::env::temp_dir().join(format!("qdiscord-scan-{}", std::process::id()));
        let sampler = Sampler::Ginibre { rank: 2 };
        let paths = save_samples(sampler, &[2, 2, 2], 3, &[1, 4], &dir).unwrap();
        assert_eq!(paths.len(), 2);
        for (path, i) in paths.iter().zip([1, 4]) {
            let back = load_state(path).unwrap();
            let again = sampler.sample(&[2, 2, 2], sample_seed(3, i)).unwrap();
            assert!(back.max_abs_diff(&again) < 1e-12);
        }
        assert!(save_samples(sampler, &[2, 2, 2], 3, &[], &dir.join("none")).unwrap().is_empty());
        assert!(!dir.join("none").exists());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn samplers_parse() {
        assert_eq!("ginibre".parse::<Sampler>().unwrap(), Sampler::Ginibre { rank: 0 });
        assert_eq!("ginibre:2".parse::<Sampler>().unwrap(), Sampler::Ginibre { rank: 2 });
        assert_eq!("classical".parse::<Sampler>().unwrap(), Sampler::Classical);
        assert!("haar".parse::<Sampler>().is_err());
    }
}
