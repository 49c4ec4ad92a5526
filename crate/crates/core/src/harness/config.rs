use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Gcm,
    PrivGcm,
    Crt,
    PrivCrt,
}

impl TestKind {
    pub fn is_private(self) -> bool {
        matches!(self, Self::PrivGcm | Self::PrivCrt)
    }

    pub fn is_crt(self) -> bool {
        matches!(self, Self::Crt | Self::PrivCrt)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gcm => "gcm",
            Self::PrivGcm => "priv_gcm",
            Self::Crt => "crt",
            Self::PrivCrt => "priv_crt",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "gcm" => Ok(Self::Gcm),
            "priv_gcm" => Ok(Self::PrivGcm),
            "crt" => Ok(Self::Crt),
            "priv_crt" => Ok(Self::PrivCrt),
            _ => Err(HarnessError::InvalidConfig(format!("unknown test '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(HarnessError::InvalidConfig(format!("unknown format '{s}'"))),
        }
    }
}

/// How the regressions inside each trial choose λ and the bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperMode {
    /// Five-fold CV in every trial.
    #[default]
    CrossValidated,
    /// λ at the floor and the median-distance bandwidth.
    Fixed,
}

/// What to do with trials whose test returned an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Keep failed trials in the denominator as non-rejections.
    #[default]
    CountAsNonRejection,
    /// Drop failed trials from the denominator.
    Exclude,
}

/// Parameter lists whose cartesian product forms the experiment cells.
/// `epsilon` must be non-empty exactly for private tests and `m` exactly for
/// CRT tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub s: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub m: Vec<usize>,
}

impl Grid {
    pub fn single(n: usize, d: usize, s: f64, beta: f64) -> Self {
        Self {
            n: vec![n],
            d: vec![d],
            s: vec![s],
            beta: vec![beta],
            epsilon: Vec::new(),
            m: Vec::new(),
        }
    }

    pub fn with_epsilon(mut self, eps: Vec<f64>) -> Self {
        self.epsilon = eps;
        self
    }

    pub fn with_m(mut self, m: Vec<usize>) -> Self {
        self.m = m;
        self
    }
}

/// One fully specified grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub d: usize,
    pub s: f64,
    pub beta: f64,
    pub epsilon: Option<f64>,
    pub m: Option<usize>,
}

impl Cell {
    /// Canonical text of the cell's parameters. Trial seeds are keyed on it,
    /// so a cell's results do not depend on where it sits in the grid.
    pub fn key(&self, test: TestKind) -> String {
        let mut k = format!(
            "{test}|n={}|d={}|s={:e}|beta={:e}",
            self.n, self.d, self.s, self.beta
        );
        if let Some(e) = self.epsilon {
            k.push_str(&format!("|eps={e:e}"));
        }
        if let Some(m) = self.m {
            k.push_str(&format!("|m={m}"));
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub test: TestKind,
    pub grid: Grid,
    pub trials: usize,
    pub alpha: f64,
    pub seed: u64,
    pub lambda_floor: f64,
    pub split_mode: bool,
    /// Constant `C` of the `sqrt(C ln n)` rescaling bound.
    pub bound_c: f64,
    pub hyper: HyperMode,
    pub failure_policy: FailurePolicy,
    /// Keep every trial's p-value in the cell result.
    pub retain_p_values: bool,
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn new(test: TestKind, grid: Grid, trials: usize, seed: u64) -> Self {
        Self {
            test,
            grid,
            trials,
            alpha: 0.05,
            seed,
            lambda_floor: 10.0,
            split_mode: false,
            bound_c: crate::synth::DEFAULT_BOUND_C,
            hyper: HyperMode::default(),
            failure_policy: FailurePolicy::default(),
            retain_p_values: false,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.lambda_floor > 0.0 && self.lambda_floor.is_finite()) {
            return bad(format!("lambda floor must be positive, got {}", self.lambda_floor));
        }
        if !(self.bound_c > 0.0 && self.bound_c.is_finite()) {
            return bad(format!("bound constant must be positive, got {}", self.bound_c));
        }
        let g = &self.grid;
        if g.n.is_empty() || g.d.is_empty() || g.s.is_empty() || g.beta.is_empty() {
            return bad("grid lists n, d, s and beta must be non-empty".into());
        }
        if g.n.iter().any(|&n| n < 2) {
            return bad("every n must be at least 2".into());
        }
        if self.split_mode && g.n.iter().any(|&n| n < 4) {
            return bad("split mode needs n of at least 4".into());
        }
        if g.d.iter().any(|&d| d < 1) {
            return bad("every d must be at least 1".into());
        }
        if g.s.iter().chain(&g.beta).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("s and beta must be non-negative".into());
        }
        match (self.test.is_private(), g.epsilon.is_empty()) {
            (true, true) => return bad(format!("{} needs at least one epsilon", self.test)),
            (false, false) => return bad(format!("{} takes no epsilon", self.test)),
            _ => {}
        }
        if g.epsilon.iter().any(|e| !(*e > 0.0)) {
            return bad("every epsilon must be positive".into());
        }
        match (self.test.is_crt(), g.m.is_empty()) {
            (true, true) => return bad(format!("{} needs at least one m", self.test)),
            (false, false) => return bad(format!("{} takes no m", self.test)),
            _ => {}
        }
        if g.m.iter().any(|&m| m < 1) {
            return bad("every m must be at least 1".into());
        }
        Ok(())
    }

    /// Cartesian product of the grid, in the order n, d, s, beta, epsilon, m.
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let eps: Vec<Option<f64>> = if g.epsilon.is_empty() {
            vec![None]
        } else {
            g.epsilon.iter().copied().map(Some).collect()
        };
        let ms: Vec<Option<usize>> = if g.m.is_empty() {
            vec![None]
        } else {
            g.m.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &n in &g.n {
            for &d in &g.d {
                for &s in &g.s {
                    for &beta in &g.beta {
                        for &epsilon in &eps {
                            for &m in &ms {
                                out.push(Cell {
                                    n,
                                    d,
                                    s,
                                    beta,
                                    epsilon,
                                    m,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(test: TestKind) -> ExperimentConfig {
        ExperimentConfig::new(test, Grid::single(100, 1, 2.0, 0.0), 10, 1)
    }

    #[test]
    fn validation_rules() {
        assert!(base(TestKind::Gcm).validate().is_ok());
        assert!(base(TestKind::PrivGcm).validate().is_err());
        let mut c = base(TestKind::PrivGcm);
        c.grid.epsilon = vec![1.0];
        assert!(c.validate().is_ok());
        c.grid.m = vec![19];
        assert!(c.validate().is_err());
        let mut c = base(TestKind::Crt);
        assert!(c.validate().is_err());
        c.grid.m = vec![19];
        assert!(c.validate().is_ok());
        let mut c = base(TestKind::Gcm);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = base(TestKind::Gcm);
        c.alpha = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cells_product() {
        let mut c = base(TestKind::PrivCrt);
        c.grid.beta = vec![0.0, 0.5];
        c.grid.epsilon = vec![1.0, 2.0];
        c.grid.m = vec![19, 99, 499];
        let cells = c.cells();
        assert_eq!(cells.len(), 12);
        assert_eq!(cells[0].m, Some(19));
        assert_eq!(cells[11].beta, 0.5);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("priv-gcm".parse::<TestKind>().unwrap(), TestKind::PrivGcm);
        assert_eq!("priv_crt".parse::<TestKind>().unwrap(), TestKind::PrivCrt);
        assert!("foo".parse::<TestKind>().is_err());
    }

    #[test]
    fn keys_distinguish_cells() {
        let a = Cell {
            n: 10,
            d: 1,
            s: 2.0,
            beta: 0.5,
            epsilon: Some(1.0),
            m: None,
        };
        let mut b = a;
        b.epsilon = Some(2.0);
        assert_ne!(a.key(TestKind::PrivGcm), b.key(TestKind::PrivGcm));
        assert_ne!(a.key(TestKind::PrivGcm), a.key(TestKind::Gcm));
    }
}
