use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    /// Active load in pu (positive means consumption).
    pub p_load: f64,
    pub q_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

impl Line {
    /// Series admittance `G + jB = 1 / (R + jX)`.
    pub fn admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }

    pub fn conductance(&self) -> f64 {
        self.r / (self.r * self.r + self.x * self.x)
    }

    pub fn susceptance(&self) -> f64 {
        -self.x / (self.r * self.r + self.x * self.x)
    }

    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub id: usize,
    pub v_re: f64,
    pub v_im: f64,
}

/// On-disk case description. Bus and line ids are arbitrary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub slack: Slack,
}

/// A radial network in canonical form: the slack bus has index 0 and line `k`
/// feeds bus `k + 1` from a bus with a smaller index. `Line::from`/`to` hold
/// canonical indices; the original labels are kept in `bus_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    bus_ids: Vec<usize>,
    slack_voltage: Complex64,
}

impl NetworkCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn slack_voltage(&self) -> Complex64 {
        self.slack_voltage
    }

    /// Original label of canonical bus `index`.
    pub fn bus_id(&self, index: usize) -> usize {
        self.bus_ids[index]
    }

    /// Canonical index of the bus labelled `id`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }

    /// Line feeding canonical bus `bus` (none for the slack).
    pub fn parent_line(&self, bus: usize) -> Option<usize> {
        bus.checked_sub(1)
    }

    /// Same network with every load multiplied by `factor`.
    pub fn scaled_loads(&self, factor: f64) -> NetworkCase {
        let mut out = self.clone();
        for b in &mut out.buses {
            b.p_load *= factor;
            b.q_load *= factor;
        }
        out
    }

    /// Builds the canonical form, checking that the lines form a tree that
    /// spans every bus.
    pub fn from_file(file: &CaseFile) -> Result<Self> {
        let n = file.buses.len();
        if n == 0 {
            return Err(Error::input("case has no buses"));
        }
        let mut index_of = BTreeMap::new();
        for (k, b) in file.buses.iter().enumerate() {
            if !(b.p_load.is_finite() && b.q_load.is_finite()) {
                return Err(Error::input(format!("bus {} has a non-finite load", b.id)));
            }
            if index_of.insert(b.id, k).is_some() {
                return Err(Error::input(format!("duplicate bus id {}", b.id)));
            }
        }
        let slack = *index_of
            .get(&file.slack.id)
            .ok_or_else(|| Error::input(format!("slack bus {} not found", file.slack.id)))?;
        let v1 = Complex64::new(file.slack.v_re, file.slack.v_im);
        if !(v1.norm() > 0.0) || !v1.norm().is_finite() {
            return Err(Error::input("slack voltage must be nonzero"));
        }

        let mut seen = BTreeSet::new();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (l, line) in file.lines.iter().enumerate() {
            let (Some(&a), Some(&b)) = (index_of.get(&line.from), index_of.get(&line.to)) else {
                return Err(Error::input(format!(
                    "line {}-{} references an unknown bus",
                    line.from, line.to
                )));
            };
            if a == b {
                return Err(Error::Topology(format!("line {}-{} is a self-loop", line.from, line.to)));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Topology(format!(
                    "duplicate line between {} and {}",
                    line.from, line.to
                )));
            }
            let z2 = line.r * line.r + line.x * line.x;
            if !(z2 > 0.0) || !z2.is_finite() {
                return Err(Error::input(format!(
                    "line {}-{} has zero or non-finite impedance",
                    line.from, line.to
                )));
            }
            adjacency[a].push((b, l));
            adjacency[b].push((a, l));
        }
        if file.lines.len() >= n {
            return Err(Error::Topology(format!(
                "{} lines on {} buses cannot be radial",
                file.lines.len(),
                n
            )));
        }

        // grow the tree from the slack, always taking the smallest label next;
        // a case already numbered parent-before-child keeps its order
        let mut order = Vec::with_capacity(n);
        let mut parent_line = vec![None; n];
        let mut visited = vec![false; n];
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((file.buses[slack].id, slack, usize::MAX)));
        while let Some(Reverse((_, v, via))) = heap.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            if via != usize::MAX {
                parent_line[v] = Some(via);
            }
            order.push(v);
            for &(w, l) in &adjacency[v] {
                if !visited[w] {
                    heap.push(Reverse((file.buses[w].id, w, l)));
                }
            }
        }
        if order.len() < n {
            return Err(Error::Topology(format!(
                "network is disconnected: {} of {} buses reachable from the slack",
                order.len(),
                n
            )));
        }
        if file.lines.len() != n - 1 {
            return Err(Error::Topology("network contains a loop".into()));
        }

        let mut canonical = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            canonical[v] = k;
        }
        let buses: Vec<Bus> = order.iter().map(|&v| file.buses[v].clone()).collect();
        let bus_ids = buses.iter().map(|b| b.id).collect();
        let lines = order[1..]
            .iter()
            .map(|&v| {
                let l = parent_line[v].expect("non-root bus has a parent");
                let line = &file.lines[l];
                let other = if index_of[&line.from] == v {
                    index_of[&line.to]
                } else {
                    index_of[&line.from]
                };
                Line {
                    from: canonical[other],
                    to: canonical[v],
                    r: line.r,
                    x: line.x,
                }
            })
            .collect();
        Ok(NetworkCase {
            buses,
            lines,
            bus_ids,
            slack_voltage: v1,
        })
    }

    /// Case file using the original labels.
    pub fn to_file(&self) -> CaseFile {
        CaseFile {
            buses: self.buses.clone(),
            lines: self
                .lines
                .iter()
                .map(|l| Line {
                    from: self.bus_ids[l.from],
                    to: self.bus_ids[l.to],
                    r: l.r,
                    x: l.x,
                })
                .collect(),
            slack: Slack {
                id: self.bus_ids[0],
                v_re: self.slack_voltage.re,
                v_im: self.slack_voltage.im,
            },
        }
    }
}

/// Reads a JSON case file.
pub fn load_case(path: &Path) -> Result<NetworkCase> {
    let text = std::fs::read_to_string(path)?;
    parse_case_json(&text)
}

pub fn parse_case_json(text: &str) -> Result<NetworkCase> {
    let file: CaseFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    NetworkCase::from_file(&file)
}

/// Random radial feeder: bus `k` attaches to a uniformly chosen earlier bus,
/// `R, X ~ U[0.005, 0.05]` pu and loads `~ U[0, load_scale]` pu. The slack is
/// bus 1 at `1∠0`.
pub fn generate_radial_case(n_buses: usize, seed: u64, load_scale: f64) -> Result<NetworkCase> {
    if n_buses < 2 {
        return Err(Error::input(format!("need at least 2 buses, got {n_buses}")));
    }
    if !(load_scale >= 0.0) || !load_scale.is_finite() {
        return Err(Error::input(format!("load_scale must be non-negative, got {load_scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = vec![Bus {
        id: 1,
        p_load: 0.0,
        q_load: 0.0,
    }];
    let mut lines = Vec::with_capacity(n_buses - 1);
    for k in 1..n_buses {
        let parent = rng.random_range(0..k);
        let r = rng.random_range(0.005..=0.05);
        let x = rng.random_range(0.005..=0.05);
        let p_load = load_scale * rng.random::<f64>();
        let q_load = load_scale * rng.random::<f64>();
        buses.push(Bus {
            id: k + 1,
            p_load,
            q_load,
        });
        lines.push(Line {
            from: parent + 1,
            to: k + 1,
            r,
            x,
        });
    }
    NetworkCase::from_file(&CaseFile {
        buses,
        lines,
        slack: Slack {
            id: 1,
            v_re: 1.0,
            v_im: 0.0,
        },
    })
}

/// Parses the `mpc.baseMVA`, `mpc.bus` and `mpc.branch` tables of a
/// MATPOWER-style case.
///
/// Bus columns: `bus_i type Pd Qd Gs Bs area Vm Va ...` (Pd/Qd in MW/MVAr,
/// Va in degrees); the type-3 bus is the slack. Branch columns:
/// `fbus tbus r x ...` with `r, x` already in pu; an 11th column, when present,
/// is the status and rows with status 0 are skipped. Shunts and line charging
/// are ignored.
pub fn parse_matpower(text: &str) -> Result<NetworkCase> {
    let base_mva = matpower_scalar(text, "mpc.baseMVA")?.unwrap_or(100.0);
    let bus_rows = matpower_table(text, "mpc.bus")?;
    let branch_rows = matpower_table(text, "mpc.branch")?;
    let mut buses = Vec::new();
    let mut slack = None;
    for row in &bus_rows {
        if row.len() < 4 {
            return Err(Error::Parse("bus rows need at least 4 columns".into()));
        }
        let id = as_id(row[0])?;
        if row[1] == 3.0 {
            if slack.is_some() {
                return Err(Error::Parse("more than one slack (type 3) bus".into()));
            }
            let vm = row.get(7).copied().unwrap_or(1.0);
            let va = row.get(8).copied().unwrap_or(0.0).to_radians();
            slack = Some(Slack {
                id,
                v_re: vm * va.cos(),
                v_im: vm * va.sin(),
            });
        }
        buses.push(Bus {
            id,
            p_load: row[2] / base_mva,
            q_load: row[3] / base_mva,
        });
    }
    let mut lines = Vec::new();
    for row in &branch_rows {
        if row.len() < 4 {
            return Err(Error::Parse("branch rows need at least 4 columns".into()));
        }
        if row.len() >= 11 && row[10] == 0.0 {
            continue;
        }
        lines.push(Line {
            from: as_id(row[0])?,
            to: as_id(row[1])?,
            r: row[2],
            x: row[3],
        });
    }
    let slack = slack.ok_or_else(|| Error::Parse("no slack (type 3) bus".into()))?;
    NetworkCase::from_file(&CaseFile {
        buses,
        lines,
        slack,
    })
}

fn as_id(v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Parse(format!("invalid bus number {v}")))
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

fn matpower_scalar(text: &str, name: &str) -> Result<Option<f64>> {
    for line in text.lines().map(strip_comment) {
        if let Some(rest) = line.trim().strip_prefix(name) {
            let value = rest.trim().trim_start_matches('=').trim().trim_end_matches(';').trim();
            return value
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad value for {name}: {value:?}")));
        }
    }
    Ok(None)
}

fn matpower_table(text: &str, name: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().map(strip_comment);
    let mut first = None;
    for line in lines.by_ref() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix(name) {
            if rest.trim_start().starts_with('=') {
                first = Some(rest.trim_start()[1..].trim().trim_start_matches('[').to_string());
                break;
            }
        }
    }
    let Some(first) = first else {
        return Err(Error::Parse(format!("missing table {name}")));
    };
    let mut rows = Vec::new();
    let mut pending = first;
    loop {
        let done = pending.contains(']');
        let body = pending.split(']').next().unwrap_or("");
        for chunk in body.split(';') {
            let values: Vec<&str> = chunk
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if values.is_empty() {
                continue;
            }
            let row = values
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {v:?} in {name}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if done {
            return Ok(rows);
        }
        pending = match lines.next() {
            Some(l) => l.to_string(),
            None => return Err(Error::Parse(format!("table {name} is not closed"))),
        };
    }
}
