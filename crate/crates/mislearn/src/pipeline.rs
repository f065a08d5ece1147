//! Subcommand orchestration: load inputs once, run the stages, write every
//! table under the output directory.
//!
//! Output files are byte-identical across runs with the same inputs and
//! seed, whatever the thread count: parallel stages collect results in
//! input order and all tables are ordered by sample, series and month.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use mislearn_core::{ExogenousSeries, ReturnPanel};

use crate::config::{PipelineConfig, SampleConfig, Suite};
use crate::error::{PipelineError, Result};
use crate::fit::{fit_sample, FittedSample};
use crate::io::{self, Table};
use crate::regress::{passive_proxies, regress_sample, PassiveProxies, RegressTables};
use crate::simulate::run_simulations;
use crate::xsec::xsec_sample;

/// Non-fatal problems, also written to `warnings.csv`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Warnings {
    rows: Vec<[String; 3]>,
}

impl Warnings {
    pub fn push(&mut self, stage: &str, subject: &str, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{stage} [{subject}]: {message}");
        self.rows.push([stage.into(), subject.into(), message]);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn messages(&self) -> impl Iterator<Item = &[String; 3]> {
        self.rows.iter()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["stage", "subject", "message"]);
        for r in &self.rows {
            t.push(r.to_vec());
        }
        t
    }
}

/// A loaded return panel with its settings.
#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub panel: ReturnPanel,
    pub market: Option<String>,
}

fn load_sample(cfg: &SampleConfig) -> Result<Sample> {
    let raw = io::load_returns(&cfg.path, cfg.layout, cfg.unit).map_err(PipelineError::Input)?;
    let ids: Vec<String> = match &cfg.series {
        Some(list) => {
            if let Some(missing) = list.iter().find(|s| !raw.contains(s)) {
                return Err(PipelineError::Usage(format!(
                    "sample `{}`: series `{missing}` not found in {}",
                    cfg.name,
                    cfg.path.display()
                )));
            }
            list.clone()
        }
        None => raw.series_ids().map(String::from).collect(),
    };
    let panel = if cfg.common_sample {
        raw.align_common_sample(&ids).map_err(|e| {
            PipelineError::Usage(format!("sample `{}`: common sample: {e}", cfg.name))
        })?
    } else {
        let mut p = ReturnPanel::new();
        for id in &ids {
            let s = raw.series(id).expect("listed series exists");
            for (t, v) in s.dates.iter().zip(&s.values) {
                p.insert(id, *t, *v).expect("keys unique in source");
            }
            p.set_family(id, raw.family(id).map(String::from));
        }
        p
    };
    if panel.is_empty() {
        return Err(PipelineError::Usage(format!(
            "sample `{}`: panel in {} is empty",
            cfg.name,
            cfg.path.display()
        )));
    }
    let market = match &cfg.market {
        Some(m) if !panel.contains(m) => {
            return Err(PipelineError::Usage(format!(
                "sample `{}`: market series `{m}` not in panel",
                cfg.name
            )))
        }
        Some(m) => Some(m.clone()),
        None => panel.contains("MKT").then(|| "MKT".to_owned()),
    };
    Ok(Sample {
        name: cfg.name.clone(),
        panel,
        market,
    })
}

pub fn load_samples(cfg: &PipelineConfig) -> Result<Vec<Sample>> {
    if cfg.samples.is_empty() {
        return Err(PipelineError::Usage("no [[samples]] configured".into()));
    }
    cfg.samples.iter().map(load_sample).collect()
}

fn write(table: &Table, path: &Path) -> Result<()> {
    table.write(path).map_err(PipelineError::Output)
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| PipelineError::OutputDir {
        path: path.into(),
        source,
    })
}

/// Everything one run produced, before it is written.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub failed_checks: Vec<String>,
    pub warnings: Warnings,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    summary: RunSummary,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a PipelineConfig, out: &Path) -> Result<Self> {
        ensure_dir(out)?;
        Ok(Self {
            cfg,
            out: out.to_path_buf(),
            summary: RunSummary::default(),
        })
    }

    fn emit(&mut self, rel: &str, table: &Table) -> Result<()> {
        let path = self.out.join(rel);
        write(table, &path)?;
        log::info!("wrote {}", path.display());
        self.summary.files.push(path);
        Ok(())
    }

    fn finish(mut self) -> Result<RunSummary> {
        let t = self.summary.warnings.table();
        self.emit("warnings.csv", &t)?;
        Ok(self.summary)
    }

    fn simulate(&mut self) -> Result<()> {
        let sim = run_simulations(&self.cfg.simulate, self.cfg.seed)?;
        self.emit("paths.csv", &sim.paths)?;
        self.emit("proposition_reports.csv", &sim.reports)?;
        self.summary.failed_checks.extend(sim.failed);
        Ok(())
    }

    fn fit(&mut self, samples: &[Sample]) -> Result<Vec<FittedSample>> {
        let mut fitted = Vec::with_capacity(samples.len());
        for s in samples {
            let f = fit_sample(s, &self.cfg.fit, &mut self.summary.warnings)?;
            let dir = &s.name;
            self.emit(&format!("{dir}/stable_fit.csv"), &f.stable_table())?;
            self.emit(&format!("{dir}/break_fit.csv"), &f.break_table())?;
            let comparison = f.comparison_table(&mut self.summary.warnings);
            self.emit(&format!("{dir}/comparison.csv"), &comparison)?;
            self.emit(&format!("{dir}/delta.csv"), &f.delta_table())?;
            self.emit(&format!("{dir}/filter_states.csv"), &f.filter_state_table())?;
            fitted.push(f);
        }
        Ok(fitted)
    }

    fn passive(&self) -> Result<Option<(ExogenousSeries, PassiveProxies)>> {
        let wants = self.cfg.regress.suites.contains(&Suite::Passive);
        match (&self.cfg.passive, wants) {
            (None, true) => Err(PipelineError::Usage(
                "regress.suites includes `passive` but no [passive] input file is configured".into(),
            )),
            (Some(p), true) => {
                let raw = io::load_exogenous(&p.path, p.unit).map_err(PipelineError::Input)?;
                if raw.is_empty() {
                    return Err(PipelineError::Usage(format!("passive series {} is empty", p.path.display())));
                }
                let proxies = passive_proxies(&raw, p)?;
                Ok(Some((raw, proxies)))
            }
            _ => Ok(None),
        }
    }

    fn regress(&mut self, samples: &[Sample], fitted: &[FittedSample]) -> Result<()> {
        let passive = self.passive()?;
        if let Some((_, proxies)) = &passive {
            self.emit("passive_proxy.csv", &proxies.table())?;
        }
        let mut all = RegressTables::default();
        for (s, f) in samples.iter().zip(fitted) {
            let use_passive = passive.as_ref().and_then(|(_, p)| {
                let cfg = self.cfg.passive.as_ref()?;
                let listed = cfg.samples.as_ref().is_none_or(|l| l.contains(&s.name));
                listed.then_some((p, cfg))
            });
            let t = regress_sample(s, f, self.cfg, use_passive, &mut self.summary.warnings)?;
            all.merge(t);
        }
        let horizons: BTreeSet<usize> = self.cfg.regress.horizons.iter().copied().collect();
        for h in horizons {
            let t = all.results.remove(&h).unwrap_or_else(RegressTables::results_table);
            self.emit(&format!("results_h{h}.csv"), &t)?;
        }
        if self.cfg.regress.suites.contains(&Suite::Sweep) {
            self.emit("inference_sweep.csv", &all.sweep)?;
        }
        if passive.is_some() {
            self.emit("passive.csv", &all.passive)?;
            self.emit("loyo.csv", &all.loyo)?;
        }
        Ok(())
    }

    fn xsec(&mut self, samples: &[Sample], fitted: &[FittedSample]) -> Result<()> {
        let factors = match &self.cfg.xsec.factors_sample {
            Some(name) => samples.iter().find(|s| &s.name == name),
            None => None,
        };
        for (s, f) in samples.iter().zip(fitted) {
            let factor_panel = factors.map(|x| &x.panel).unwrap_or(&s.panel);
            let out = xsec_sample(s, f, factor_panel, &self.cfg.xsec, &mut self.summary.warnings)?;
            for (name, table) in out.tables() {
                self.emit(&format!("{}/{name}", s.name), table)?;
            }
        }
        Ok(())
    }
}

/// `simulate`: synthetic checks of the theory.
pub fn cmd_simulate(cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let mut run = Run::new(cfg, out)?;
    run.simulate()?;
    finish_checked(run)
}

/// `fit`: both models, Δ and the comparison table per sample.
pub fn cmd_fit(cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let samples = load_samples(cfg)?;
    let mut run = Run::new(cfg, out)?;
    run.fit(&samples)?;
    run.finish()
}

/// `regress`: forward outcomes and the predictive regression suites.
pub fn cmd_regress(cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let samples = load_samples(cfg)?;
    let mut run = Run::new(cfg, out)?;
    run.passive()?;
    let fitted = run.fit(&samples)?;
    run.regress(&samples, &fitted)?;
    run.finish()
}

/// `xsec`: decomposition, IVOL tertiles, cross-sectional regressions, ranks.
pub fn cmd_xsec(cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let samples = load_samples(cfg)?;
    let mut run = Run::new(cfg, out)?;
    let fitted = run.fit(&samples)?;
    run.xsec(&samples, &fitted)?;
    run.finish()
}

/// `report`: every stage in one run.
pub fn cmd_report(cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let samples = load_samples(cfg)?;
    let mut run = Run::new(cfg, out)?;
    run.passive()?;
    run.simulate()?;
    let fitted = run.fit(&samples)?;
    run.regress(&samples, &fitted)?;
    run.xsec(&samples, &fitted)?;
    finish_checked(run)
}

fn finish_checked(run: Run<'_>) -> Result<RunSummary> {
    let summary = run.finish()?;
    if summary.failed_checks.is_empty() {
        Ok(summary)
    } else {
        Err(PipelineError::ChecksFailed(summary.failed_checks))
    }
}
