//! Risk-to-authority fuzzy inference and the automation output allocation.

use serde::{Deserialize, Serialize};

use crate::dynamics::ControlVector;

/// Complete triangular partition of `[0, 1]` given by strictly increasing
/// peaks. The end sets are shoulders that stay at 1 outward of their peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    pub peaks: Vec<f64>,
}

impl Partition {
    pub fn uniform(n: usize) -> Self {
        let last = (n - 1) as f64;
        Partition {
            peaks: (0..n).map(|k| k as f64 / last).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn membership(&self, set: usize, x: f64) -> f64 {
        let p = &self.peaks;
        let n = p.len();
        if x == p[set] {
            return 1.0;
        }
        if x < p[set] {
            if set == 0 {
                return 1.0;
            }
            let lo = p[set - 1];
            return if x <= lo { 0.0 } else { (x - lo) / (p[set] - lo) };
        }
        if set == n - 1 {
            return 1.0;
        }
        let hi = p[set + 1];
        if x >= hi {
            0.0
        } else {
            (hi - x) / (hi - p[set])
        }
    }

    fn validate(&self, name: &str) -> Result<(), String> {
        if self.peaks.len() < 2 {
            return Err(format!("{name} partition needs at least two sets"));
        }
        if self.peaks.iter().any(|p| !p.is_finite()) || self.peaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("{name} partition peaks must be finite and strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuzzySets {
    /// Lateral risk levels VS, S, M, B, VB.
    pub lateral: Partition,
    /// Longitudinal risk levels VS, S, M, L, VL.
    pub longitudinal: Partition,
    /// Authority levels VVL through VVH.
    pub output: Partition,
    /// Defuzzification grid size on `[0, 1]`.
    pub samples: usize,
}

impl Default for FuzzySets {
    fn default() -> Self {
        FuzzySets {
            lateral: Partition::uniform(5),
            longitudinal: Partition::uniform(5),
            output: Partition::uniform(7),
            samples: 201,
        }
    }
}

impl FuzzySets {
    pub fn validate(&self) -> Result<(), String> {
        self.lateral.validate("lateral")?;
        self.longitudinal.validate("longitudinal")?;
        self.output.validate("output")?;
        if self.samples < 2 {
            return Err("defuzzification needs at least two samples".into());
        }
        Ok(())
    }
}

/// Output level for each (lateral level, longitudinal level) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleBase {
    pub table: Vec<Vec<usize>>,
}

impl Default for RuleBase {
    fn default() -> Self {
        RuleBase {
            table: (0..5)
                .map(|i| (0..5).map(|j| 6usize.saturating_sub(i + j)).collect())
                .collect(),
        }
    }
}

impl RuleBase {
    pub fn validate(&self, sets: &FuzzySets) -> Result<(), String> {
        if self.table.len() != sets.lateral.len() || self.table.iter().any(|row| row.len() != sets.longitudinal.len()) {
            return Err("rule table shape must match the input partitions".into());
        }
        if self.table.iter().flatten().any(|&o| o >= sets.output.len()) {
            return Err("rule table references an undefined output level".into());
        }
        let rows_ok = self.table.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0]));
        let cols_ok = self
            .table
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b <= a));
        if !(rows_ok && cols_ok) {
            return Err("rule table must be non-increasing in both risks".into());
        }
        Ok(())
    }
}

/// Mamdani inference with min implication, max aggregation and a discretised
/// centroid.
pub fn fis_alpha(r_y: f64, r_x: f64, sets: &FuzzySets, rules: &RuleBase) -> f64 {
    let r_y = r_y.clamp(0.0, 1.0);
    let r_x = r_x.clamp(0.0, 1.0);

    // Strongest firing per output level.
    let mut strength = vec![0.0f64; sets.output.len()];
    for (i, row) in rules.table.iter().enumerate() {
        let mu_y = sets.lateral.membership(i, r_y);
        if mu_y == 0.0 {
            continue;
        }
        for (j, &level) in row.iter().enumerate() {
            let w = mu_y.min(sets.longitudinal.membership(j, r_x));
            strength[level] = strength[level].max(w);
        }
    }

    let last = (sets.samples - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..sets.samples {
        let z = k as f64 / last;
        let mu = strength
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(level, &s)| s.min(sets.output.membership(level, z)))
            .fold(0.0, f64::max);
        num += mu * z;
        den += mu;
    }
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocationParams {
    pub epsilon: f64,
    pub tolerance: f64,
}

impl Default for AllocationParams {
    fn default() -> Self {
        AllocationParams {
            epsilon: 1e-6,
            tolerance: 0.02,
        }
    }
}

impl AllocationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0 && self.tolerance >= 0.0) {
            return Err("allocation epsilon must be positive and tolerance nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Output matches the desired control.
    Healthy,
    /// Output is weaker than desired but within the authority bound.
    Attenuated,
    /// Output is replaced by `alpha_a` times the desired control.
    Capped,
}

impl Branch {
    pub fn code(self) -> u8 {
        match self {
            Branch::Healthy => 1,
            Branch::Attenuated => 2,
            Branch::Capped => 3,
        }
    }
}

/// Guarded ratio `u_f / (u_des + eps * sign(u_des))`, with `sign(0) = 1`.
pub fn guarded_ratio(u_des: f64, u_f: f64, eps: f64) -> f64 {
    let sign = if u_des < 0.0 { -1.0 } else { 1.0 };
    u_f / (u_des + eps * sign)
}

pub fn allocate_component(u_des: f64, u_f: f64, alpha: f64, p: &AllocationParams) -> (f64, Branch) {
    let ratio = guarded_ratio(u_des, u_f, p.epsilon);
    if ratio >= 0.0 && (u_f - u_des).abs() <= p.tolerance * (u_des.abs() + p.epsilon) {
        (u_f, Branch::Healthy)
    } else if ratio > 0.0 && ratio < alpha {
        (u_f, Branch::Attenuated)
    } else {
        (alpha * u_des, Branch::Capped)
    }
}

/// Actual automation output, componentwise, with the branch taken for
/// acceleration and steering.
pub fn allocate(
    u_des: &ControlVector,
    u_f: &ControlVector,
    alpha: f64,
    p: &AllocationParams,
) -> (ControlVector, [Branch; 2]) {
    let (a, ba) = allocate_component(u_des.accel, u_f.accel, alpha, p);
    let (d, bd) = allocate_component(u_des.steer, u_f.steer, alpha, p);
    (ControlVector::new(a, d), [ba, bd])
}
