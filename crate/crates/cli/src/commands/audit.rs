use std::fmt::Write as _;
use std::path::Path;

use granular_core::{MembershipVector, ReportingKernel};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::io::{read_json, write_json};

/// JSON form of a reporting kernel: outcome membership vectors and optional reference masses
/// (uniform when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub outcomes: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
}

impl KernelFile {
    pub fn build(&self) -> Result<ReportingKernel> {
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| MembershipVector::new(o.clone()))
            .collect::<granular_core::Result<Vec<_>>>()?;
        Ok(match &self.nu {
            Some(nu) => ReportingKernel::new(outcomes, nu.clone())?,
            None => ReportingKernel::uniform(outcomes)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRecord {
    pub outcome: usize,
    pub is_car: bool,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub witness: Option<(usize, usize)>,
}

/// `φ(y, {ξ_j})` for every count and outcome, the normalizer `c(y)` and the CAR verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub tolerance: f64,
    pub nu: Vec<f64>,
    pub normalizer: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub verdicts: Vec<VerdictRecord>,
}

impl AuditReport {
    /// Plain-text tables for the terminal.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let m = self.nu.len();
        let _ = write!(s, "{:>4} {:>12}", "y", "c(y)");
        for j in 0..m {
            let _ = write!(s, " {:>12}", format!("phi(y,{{{}}})", j + 1));
        }
        s.push('\n');
        for (y, row) in self.phi.iter().enumerate() {
            let _ = write!(s, "{y:>4} {:>12.6}", self.normalizer[y]);
            for v in row {
                let _ = write!(s, " {v:>12.6}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "\n{:>7} {:>6} {:>12} {:>12}  witness", "outcome", "car", "min_ratio", "max_ratio");
        for v in &self.verdicts {
            let witness = v.witness.map_or("-".to_string(), |(a, b)| format!("({a}, {b})"));
            let _ = writeln!(
                s,
                "{:>7} {:>6} {:>12.6} {:>12.6}  {witness}",
                v.outcome + 1,
                if v.is_car { "yes" } else { "no" },
                v.min_ratio,
                v.max_ratio
            );
        }
        s
    }
}

/// Audits the kernel in `kernel` (JSON); also writes the report as JSON when `out` is given.
pub fn kernel_audit(kernel: &Path, out: Option<&Path>, cfg: &RunConfig) -> Result<AuditReport> {
    let file: KernelFile = read_json(kernel)?;
    let k = file.build()?;
    let tol = cfg.kernel.car_tolerance;
    let verdicts = (0..k.len())
        .map(|j| {
            let v = k.is_car(j, tol)?;
            Ok(VerdictRecord {
                outcome: j,
                is_car: v.is_car,
                min_ratio: v.min_ratio,
                max_ratio: v.max_ratio,
                witness: v.witness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let normalizer = (0..=k.k_max()).map(|y| k.normalizer(y)).collect::<granular_core::Result<_>>()?;
    let report = AuditReport { tolerance: tol, nu: k.nu().to_vec(), normalizer, phi: k.kernel_matrix(), verdicts };
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    let non_car = report.verdicts.iter().filter(|v| !v.is_car).count();
    log::info!("stage=kernel-audit outcomes={} K={} non_car={non_car}", k.len(), k.k_max());
    Ok(report)
}
