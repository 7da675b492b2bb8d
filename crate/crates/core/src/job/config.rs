use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::AmlsConfig;
use crate::input_model::{ClipBox, InputModel};
use crate::network::load_network;
use crate::oracle::OracleDecl;
use crate::property::{infer_true_class, PropertySpec};

pub const JOB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    Amls,
    NaiveMc,
    Sweep,
    OracleSelftest,
}

/// One job per file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub format_version: u32,
    pub job: JobKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemDecl>,
    #[serde(default)]
    pub amls: AmlsConfig,
    #[serde(default)]
    pub naive_mc: NaiveMcSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestSettings>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemDecl {
    Oracle(OracleDecl),
    Custom {
        input_model: InputModelDecl,
        property: PropertyDecl,
    },
}

/// Input model as written in a job file. An l-inf ball without a center is
/// placed on the property's reference input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputModelDecl {
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    UniformLinfBall {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clip: Option<ClipBox>,
    },
    StandardNormal {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearTerm {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PropertyDecl {
    AdversarialMargin {
        /// Weight file, relative to the job file's directory.
        network: PathBuf,
        reference_input: Vec<f64>,
        /// Defaults to the network's prediction at `reference_input`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        true_class: Option<usize>,
    },
    LinearThreshold {
        a: Vec<f64>,
        b: f64,
    },
    MaxOfLinear {
        terms: Vec<LinearTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveMcSettings {
    pub samples: u64,
    pub batch_size: usize,
}

impl Default for NaiveMcSettings {
    fn default() -> Self {
        NaiveMcSettings {
            samples: 1_000_000,
            batch_size: 65_536,
        }
    }
}

/// Grid of AMLS settings. Omitted lists fall back to the single value in the
/// `amls` section; `radius` re-centers an l-inf ball model per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mh_steps: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_chains: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Vec<f64>>,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestSettings {
    /// Oracles to check; empty means the full roster.
    pub oracles: Vec<OracleDecl>,
    /// Largest accepted `|log10 estimate - log10 truth|` for AMLS.
    pub log10_tolerance: f64,
    /// Naive MC must land within this many standard errors of the truth.
    pub naive_sigmas: f64,
    /// Naive MC is only checked on oracles with at least this probability.
    pub naive_min_prob: f64,
}

impl Default for SelftestSettings {
    fn default() -> Self {
        SelftestSettings {
            oracles: Vec::new(),
            log10_tolerance: 0.3,
            naive_sigmas: 3.0,
            naive_min_prob: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: PathBuf,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            dir: PathBuf::from("out"),
        }
    }
}

/// A fully built problem ready for the estimators.
#[derive(Debug, Clone)]
pub struct ResolvedProblem {
    pub name: String,
    pub model: InputModel,
    pub spec: PropertySpec,
    /// Natural log of the true probability when known in closed form.
    pub log_true_prob: Option<f64>,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn nonempty<T>(field: &str, list: &Option<Vec<T>>) -> Result<()> {
    match list {
        Some(v) if v.is_empty() => Err(field_err(field, "list is empty")),
        _ => Ok(()),
    }
}

impl JobConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("job config serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks every field, including that referenced files load. `base_dir`
    /// anchors relative paths.
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        if self.format_version != JOB_FORMAT_VERSION {
            return Err(field_err(
                "format_version",
                format!("unsupported version {}", self.format_version),
            ));
        }
        self.amls
            .validate()
            .map_err(|e| field_err("amls", e))?;
        match self.job {
            JobKind::OracleSelftest => {
                if let Some(s) = &self.selftest {
                    for o in &s.oracles {
                        o.build().map_err(|e| field_err("selftest.oracles", e))?;
                    }
                }
                return Ok(());
            }
            JobKind::NaiveMc => {
                if self.naive_mc.samples == 0 {
                    return Err(field_err("naive_mc.samples", "must be positive"));
                }
                if self.naive_mc.batch_size == 0 {
                    return Err(field_err("naive_mc.batch_size", "must be positive"));
                }
            }
            JobKind::Sweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| field_err("sweep", "required for sweep jobs"))?;
                if sweep.repeats == 0 {
                    return Err(field_err("sweep.repeats", "must be at least 1"));
                }
                nonempty("sweep.quantile", &sweep.quantile)?;
                nonempty("sweep.mh_steps", &sweep.mh_steps)?;
                nonempty("sweep.n_chains", &sweep.n_chains)?;
                nonempty("sweep.radius", &sweep.radius)?;
                for cell in self.sweep_cells() {
                    cell.amls_config(&self.amls, 0)
                        .validate()
                        .map_err(|e| field_err("sweep", e))?;
                    if let Some(r) = cell.radius {
                        if !(r > 0.0) {
                            return Err(field_err("sweep.radius", format!("{r} is not positive")));
                        }
                    }
                }
                if sweep.radius.is_some()
                    && !matches!(
                        self.problem,
                        Some(ProblemDecl::Custom {
                            input_model: InputModelDecl::UniformLinfBall { .. },
                            ..
                        })
                    )
                {
                    return Err(field_err(
                        "sweep.radius",
                        "radius sweeps need an uniform-linf-ball input model",
                    ));
                }
            }
            JobKind::Amls => {}
        }
        let first_radius = self
            .sweep
            .as_ref()
            .and_then(|s| s.radius.as_ref())
            .and_then(|r| r.first().copied());
        let problem = self.build_problem(base_dir, first_radius)?;
        problem
            .spec
            .check_dim(problem.model.dim())
            .map_err(|e| field_err("problem", e))?;
        Ok(())
    }

    /// Builds the problem, optionally replacing the l-inf ball radius.
    pub fn build_problem(&self, base_dir: &Path, radius: Option<f64>) -> Result<ResolvedProblem> {
        let decl = self
            .problem
            .as_ref()
            .ok_or_else(|| field_err("problem", "required for this job kind"))?;
        match decl {
            ProblemDecl::Oracle(o) => {
                let p = o.build().map_err(|e| field_err("problem.oracle", e))?;
                Ok(ResolvedProblem {
                    name: p.name,
                    model: p.model,
                    spec: p.spec,
                    log_true_prob: Some(p.log_true_prob),
                })
            }
            ProblemDecl::Custom {
                input_model,
                property,
            } => {
                let (spec, reference) = build_property(property, base_dir)?;
                let model = build_model(input_model, reference.as_deref(), radius)?;
                Ok(ResolvedProblem {
                    name: "custom".into(),
                    model,
                    spec,
                    log_true_prob: None,
                })
            }
        }
    }

    pub fn sweep_cells(&self) -> Vec<SweepCell> {
        let Some(sweep) = &self.sweep else {
            return Vec::new();
        };
        let quantiles = sweep.quantile.clone().unwrap_or_else(|| vec![self.amls.quantile]);
        let steps = sweep.mh_steps.clone().unwrap_or_else(|| vec![self.amls.mh_steps]);
        let chains = sweep.n_chains.clone().unwrap_or_else(|| vec![self.amls.n_chains]);
        let radii: Vec<Option<f64>> = match &sweep.radius {
            Some(r) => r.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut cells = Vec::new();
        for &quantile in &quantiles {
            for &mh_steps in &steps {
                for &n_chains in &chains {
                    for &radius in &radii {
                        cells.push(SweepCell {
                            index: cells.len(),
                            quantile,
                            mh_steps,
                            n_chains,
                            radius,
                        });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub quantile: f64,
    pub mh_steps: usize,
    pub n_chains: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl SweepCell {
    pub fn amls_config(&self, base: &AmlsConfig, seed: u64) -> AmlsConfig {
        AmlsConfig {
            quantile: self.quantile,
            mh_steps: self.mh_steps,
            n_chains: self.n_chains,
            seed,
            ..base.clone()
        }
    }
}

fn build_property(decl: &PropertyDecl, base_dir: &Path) -> Result<(PropertySpec, Option<Vec<f64>>)> {
    match decl {
        PropertyDecl::AdversarialMargin {
            network,
            reference_input,
            true_class,
        } => {
            let path = base_dir.join(network);
            if !path.exists() {
                return Err(field_err(
                    "problem.custom.property.network",
                    format!("{} does not exist", path.display()),
                ));
            }
            let net = load_network(&path).map_err(|e| field_err("problem.custom.property.network", e))?;
            let class = match true_class {
                Some(c) => *c,
                None => infer_true_class(&net, reference_input)
                    .map_err(|e| field_err("problem.custom.property.reference_input", e))?,
            };
            if reference_input.len() != net.input_dim() {
                return Err(field_err(
                    "problem.custom.property.reference_input",
                    format!("has {} entries, network expects {}", reference_input.len(), net.input_dim()),
                ));
            }
            let spec = PropertySpec::adversarial_margin(Arc::new(net), class)
                .map_err(|e| field_err("problem.custom.property.true_class", e))?;
            Ok((spec, Some(reference_input.clone())))
        }
        PropertyDecl::LinearThreshold { a, b } => Ok((
            PropertySpec::linear_threshold(a.clone(), *b)
                .map_err(|e| field_err("problem.custom.property", e))?,
            None,
        )),
        PropertyDecl::MaxOfLinear { terms } => Ok((
            PropertySpec::max_of_linear(terms.iter().map(|t| (t.a.clone(), t.b)).collect())
                .map_err(|e| field_err("problem.custom.property", e))?,
            None,
        )),
    }
}

fn build_model(decl: &InputModelDecl, reference: Option<&[f64]>, radius_override: Option<f64>) -> Result<InputModel> {
    let field = "problem.custom.input_model";
    let model = match decl {
        InputModelDecl::UniformBox { lower, upper } => InputModel::uniform_box(lower.clone(), upper.clone()),
        InputModelDecl::StandardNormal { dim } => InputModel::standard_normal(*dim),
        InputModelDecl::UniformLinfBall {
            center,
            radius,
            clip,
        } => {
            let center = match (center, reference) {
                (Some(c), _) => c.clone(),
                (None, Some(r)) => r.to_vec(),
                (None, None) => {
                    return Err(field_err(
                        "problem.custom.input_model.center",
                        "required unless the property has a reference input",
                    ))
                }
            };
            InputModel::linf_ball(center, radius_override.unwrap_or(*radius), clip.clone())
        }
    };
    model.map_err(|e| field_err(field, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_job(kind: JobKind) -> JobConfig {
        JobConfig {
            format_version: 1,
            job: kind,
            problem: Some(ProblemDecl::Oracle(OracleDecl::IrwinHall {
                dim: 3,
                threshold: 2.5,
            })),
            amls: AmlsConfig::new(100, 5, 0.1, -20.0, 0),
            naive_mc: NaiveMcSettings::default(),
            sweep: None,
            selftest: None,
            seed: 1,
            output: OutputSettings::default(),
        }
    }

    #[test]
    fn parses_minimal_job() {
        let text = r#"{
            "format_version": 1,
            "job": "amls",
            "problem": {"oracle": {"name": "irwin-hall", "dim": 10, "threshold": 9.5}},
            "amls": {"n_chains": 1000, "mh_steps": 50},
            "seed": 3
        }"#;
        let cfg: JobConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.amls.quantile, 0.1);
        assert_eq!(cfg.amls.n_chains, 1000);
        cfg.validate(Path::new(".")).unwrap();
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"format_version": 1, "job": "amls", "bogus": 1}"#;
        assert!(serde_json::from_str::<JobConfig>(text).is_err());
    }

    #[test]
    fn validation_names_field() {
        let mut cfg = oracle_job(JobKind::Sweep);
        cfg.sweep = Some(SweepSettings {
            quantile: Some(vec![]),
            mh_steps: None,
            n_chains: None,
            radius: None,
            repeats: 2,
        });
        let err = cfg.validate(Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("sweep.quantile"), "{err}");

        let mut cfg = oracle_job(JobKind::Amls);
        cfg.amls.quantile = 1.5;
        assert!(cfg.validate(Path::new(".")).unwrap_err().to_string().contains("amls"));

        let mut cfg = oracle_job(JobKind::Amls);
        cfg.problem = None;
        assert!(cfg.validate(Path::new(".")).unwrap_err().to_string().contains("problem"));
    }

    #[test]
    fn missing_network_file_fails_validation() {
        let mut cfg = oracle_job(JobKind::Amls);
        cfg.problem = Some(ProblemDecl::Custom {
            input_model: InputModelDecl::UniformLinfBall {
                center: None,
                radius: 0.1,
                clip: None,
            },
            property: PropertyDecl::AdversarialMargin {
                network: "does-not-exist.json".into(),
                reference_input: vec![0.0; 4],
                true_class: None,
            },
        });
        let err = cfg.validate(Path::new("/nonexistent")).unwrap_err().to_string();
        assert!(err.contains("property.network"), "{err}");
    }

    #[test]
    fn sweep_grid_is_cartesian() {
        let mut cfg = oracle_job(JobKind::Sweep);
        cfg.sweep = Some(SweepSettings {
            quantile: Some(vec![0.1, 0.25, 0.5]),
            mh_steps: Some(vec![10, 20]),
            n_chains: None,
            radius: None,
            repeats: 3,
        });
        let cells = cfg.sweep_cells();
        assert_eq!(cells.len(), 6);
        assert!(cells.iter().all(|c| c.n_chains == 100 && c.radius.is_none()));
        assert_eq!(cells[5].index, 5);
        cfg.validate(Path::new(".")).unwrap();
    }

    #[test]
    fn radius_sweep_requires_ball() {
        let mut cfg = oracle_job(JobKind::Sweep);
        cfg.sweep = Some(SweepSettings {
            quantile: None,
            mh_steps: None,
            n_chains: None,
            radius: Some(vec![0.1]),
            repeats: 1,
        });
        assert!(cfg.validate(Path::new(".")).unwrap_err().to_string().contains("sweep.radius"));
    }
}
