use serde::Serialize;

use crate::geometry::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Sqne,
    Cutter,
    Fejer,
    TraceRegularity,
    /// Combination and product inequalities with their residual bounds.
    Aggregate,
    /// `||Tx - x|| <= ||P_Fix x - x||` for cutters.
    CutterDistance,
    RateBound,
    /// `||x - P_f x|| >= (δ/Δ) d(x, S(f, 0))`.
    SubgradientRegularity,
    /// Sampled schedule modulus against a claimed upper bound.
    Modulus,
}

/// Where the worst violation was observed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<Vector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// Verdict of a sampled inequality check. `worst_violation` is the largest
/// `LHS - RHS` seen (0 when nothing was evaluated), and
/// `pass ⇔ worst_violation <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub kind: CheckKind,
    pub pass: bool,
    pub worst_violation: f64,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    pub seed: Option<u64>,
    pub evaluated: usize,
}

/// Running maximum of violations.
pub(crate) struct Tally {
    kind: CheckKind,
    tolerance: f64,
    seed: Option<u64>,
    worst: Option<(f64, Witness)>,
    evaluated: usize,
}

impl Tally {
    pub(crate) fn new(kind: CheckKind, tolerance: f64, seed: Option<u64>) -> Self {
        Self {
            kind,
            tolerance,
            seed,
            worst: None,
            evaluated: 0,
        }
    }

    pub(crate) fn observe(&mut self, violation: f64, witness: impl FnOnce() -> Witness) {
        self.evaluated += 1;
        let worse = match &self.worst {
            None => true,
            Some((w, _)) => violation > *w || violation.is_nan(),
        };
        if worse {
            self.worst = Some((violation, witness()));
        }
    }

    pub(crate) fn at_point(x: &Vector) -> impl FnOnce() -> Witness + '_ {
        move || Witness {
            input: Some(x.clone()),
            k: None,
        }
    }

    pub(crate) fn at_step(k: usize) -> impl FnOnce() -> Witness {
        move || Witness { input: None, k: Some(k) }
    }

    pub(crate) fn finish(self) -> RegularityReport {
        let (worst_violation, witness) = match self.worst {
            Some((v, w)) => (v, Some(w)),
            None => (0.0, None),
        };
        RegularityReport {
            kind: self.kind,
            // NaN never passes.
            pass: worst_violation <= self.tolerance,
            worst_violation,
            witness,
            tolerance: self.tolerance,
            seed: self.seed,
            evaluated: self.evaluated,
        }
    }
}
