//! Filter input selection: forward-backward search over lagged bounds,
//! scored by two-fold nearest-neighbour cross-validation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::interval::SupervisedDataset;
use crate::msvr::Scaler;

/// Subset of the `2d` lag coordinates. Coordinate `i` is lag `i / 2 + 1`,
/// lower bound when `i` is even and upper bound when odd.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct VariableSet {
    selected: Vec<usize>,
}

impl VariableSet {
    pub fn new(mut selected: Vec<usize>) -> Self {
        selected.sort_unstable();
        selected.dedup();
        Self { selected }
    }

    /// Every coordinate of an order-`d` embedding.
    pub fn full(order: usize) -> Self {
        Self {
            selected: (0..2 * order).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.selected.binary_search(&i).is_ok()
    }

    /// Smallest embedding order that covers every selected coordinate.
    pub fn required_order(&self) -> usize {
        self.selected.last().map_or(0, |&i| i / 2 + 1)
    }

    fn with(&self, i: usize) -> Self {
        let mut s = self.selected.clone();
        s.push(i);
        Self::new(s)
    }

    fn without(&self, i: usize) -> Self {
        Self {
            selected: self.selected.iter().copied().filter(|&j| j != i).collect(),
        }
    }
}

pub fn token(i: usize) -> String {
    format!("{}{}", if i.is_multiple_of(2) { 'L' } else { 'U' }, i / 2 + 1)
}

impl fmt::Display for VariableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<String> = self.selected.iter().map(|&i| token(i)).collect();
        f.write_str(&tokens.join(","))
    }
}

impl FromStr for VariableSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (bound, lag) = tok.split_at(1);
            let parity = match bound {
                "L" | "l" => 0,
                "U" | "u" => 1,
                _ => return Err(Error::Format(format!("bad variable token {tok:?}"))),
            };
            let lag: usize = lag
                .parse()
                .ok()
                .filter(|&l| l >= 1)
                .ok_or_else(|| Error::Format(format!("bad lag in token {tok:?}")))?;
            out.push(2 * (lag - 1) + parity);
        }
        if out.is_empty() {
            return Err(Error::Format("empty variable set".into()));
        }
        Ok(Self::new(out))
    }
}

/// Nearest-neighbour relevance `E(V)`.
///
/// The pairs are split into a first and second contiguous half. Every point
/// is matched to its Euclidean nearest neighbour in the opposite half,
/// measured on the standardized inputs restricted to `v` (ties go to the
/// lowest index), and scores half the squared distance between the two
/// targets. Returns the mean over all points.
pub fn relevance(data: &SupervisedDataset, v: &VariableSet) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Argument("relevance of an empty variable set".into()));
    }
    if data.len() < 4 {
        return Err(Error::Size {
            what: "pairs for relevance",
            needed: 4,
            got: data.len(),
        });
    }
    if let Some(&bad) = v.indices().iter().find(|&&i| i >= data.input_dim()) {
        return Err(Error::Argument(format!("variable {} outside the input dimension", token(bad))));
    }
    let scaler = Scaler::fit(&data.inputs);
    let points: Vec<Vec<f64>> = data
        .inputs
        .iter()
        .map(|x| {
            let z = scaler.transform(x);
            v.indices().iter().map(|&i| z[i]).collect()
        })
        .collect();
    Ok(relevance_points(&points, &data.targets))
}

fn relevance_points(points: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let half = n / 2;
    let nearest = |i: usize, range: std::ops::Range<usize>| {
        let mut best = (f64::INFINITY, range.start);
        for j in range {
            let d: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    };
    let total: f64 = (0..n)
        .map(|i| {
            let j = if i < half { nearest(i, half..n) } else { nearest(i, 0..half) };
            0.5 * targets[i]
                .iter()
                .zip(&targets[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    total / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Add(usize),
    Remove(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub applied: Move,
    pub relevance: f64,
    pub set: VariableSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub selected: VariableSet,
    pub relevance: f64,
    /// Accepted moves in order; relevance strictly decreases along it.
    pub steps: Vec<SelectionStep>,
}

/// Greedy forward-backward search from the empty set over all input
/// coordinates. Each round scores every single addition and, once two or
/// more variables are held, every single removal; the best move is applied
/// only if it strictly lowers `E(V)`. Ties prefer the smaller resulting set,
/// then the lowest variable index.
pub fn forward_backward_select(data: &SupervisedDataset) -> Result<SelectionReport> {
    let universe = data.input_dim();
    if universe == 0 {
        return Err(Error::Argument("dataset has no input coordinates".into()));
    }
    if data.len() < 4 {
        return Err(Error::Size {
            what: "pairs for selection",
            needed: 4,
            got: data.len(),
        });
    }
    let scaler = Scaler::fit(&data.inputs);
    let standardized: Vec<Vec<f64>> = data.inputs.iter().map(|x| scaler.transform(x)).collect();
    let score = |v: &VariableSet| {
        let pts: Vec<Vec<f64>> = standardized
            .iter()
            .map(|z| v.indices().iter().map(|&i| z[i]).collect())
            .collect();
        relevance_points(&pts, &data.targets)
    };

    let mut current = VariableSet::default();
    let mut current_e = f64::INFINITY;
    let mut steps = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize, Move, VariableSet)> = None;
        let mut consider = |mv: Move, set: VariableSet| {
            let e = score(&set);
            let var = match mv {
                Move::Add(i) | Move::Remove(i) => i,
            };
            let key = (e, set.len(), var);
            let better = match &best {
                None => true,
                Some((be, bl, bv, _, _)) => {
                    key.0 < *be || (key.0 == *be && (key.1, key.2) < (*bl, *bv))
                }
            };
            if better {
                best = Some((e, set.len(), var, mv, set));
            }
        };
        for i in 0..universe {
            if current.contains(i) {
                if current.len() >= 2 {
                    consider(Move::Remove(i), current.without(i));
                }
            } else {
                consider(Move::Add(i), current.with(i));
            }
        }
        match best {
            Some((e, _, _, mv, set)) if e < current_e => {
                current = set.clone();
                current_e = e;
                steps.push(SelectionStep {
                    applied: mv,
                    relevance: e,
                    set,
                });
            }
            _ => break,
        }
    }
    if current.is_empty() {
        // every single variable scored NaN; fall back to the first
        current = VariableSet::new(vec![0]);
        current_e = score(&current);
    }
    Ok(SelectionReport {
        selected: current,
        relevance: current_e,
        steps,
    })
}
