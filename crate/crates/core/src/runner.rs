//! Executes a validated scenario and writes its results: envelope dumps as
//! CSV (`xi, re_psi, im_psi, abs2`, SI, 17 significant digits), tables as
//! CSV, and a JSON summary.
//!
//! Summary schema (`summary.json`):
//!
//! ```text
//! {
//!   "experiment": "image",
//!   "quantities": { "<name>": { "si": f64, "natural": f64, "unit": "m" }, ... },
//!   "rows":       [ { "<column>": f64, ... }, ... ]      (sweep only)
//!   "warnings":   [ "<operation>: tail mass ...", ... ],
//!   "provenance": { "<name>": { "si": f64, "natural": f64 }, ... },
//!   "files":      [ "input.csv", ... ]
//! }
//! ```
//!
//! Run metadata that changes between runs (crate version, wall-clock time)
//! goes to `metadata.json`, so every other file is a pure function of the
//! scenario.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    from_table, override_key, ConfigError, Echo, Experiment, ImagingRequest, InputSpec,
    OutputFormat, ScenarioConfig,
};
use crate::dispersion::{propagate, DispersionSegment};
use crate::envelope::{
    fidelity, make_asymmetric_pair, make_gaussian, norm, skewness, variance, SampledEnvelope,
};
use crate::error::Error;
use crate::imaging::{
    aberration_sweep, estimate_magnification, ideal_image, resolution_run, run_pipeline,
    solve_for_magnification, solve_imaging, ImagingDesign,
};
use crate::lens::{apply_lens, LensSpec};
use crate::units::Dimension;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Simulation {
        context: &'static str,
        source: Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// 2 config error, 3 numerical-guard violation, 4 I/O error. Other
    /// simulation failures come from physically inconsistent parameters and
    /// count as config errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Io { .. }) => 4,
            RunError::Config(_) => 2,
            RunError::Simulation { source, .. } if source.is_numerical_guard() => 3,
            RunError::Simulation { .. } => 2,
            RunError::Io { .. } => 4,
        }
    }
}

fn ctx_err(context: &'static str) -> impl FnOnce(Error) -> RunError {
    move |source| RunError::Simulation { context, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryValue {
    pub si: f64,
    pub natural: f64,
    pub unit: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub quantities: BTreeMap<String, SummaryValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<BTreeMap<String, f64>>,
    pub warnings: Vec<String>,
    pub provenance: BTreeMap<String, Echo>,
    pub files: Vec<String>,
}

impl Summary {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.quantities.get(name).map(|q| q.si)
    }
}

/// Results held in memory before writing.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub dumps: Vec<(String, SampledEnvelope)>,
}

struct Collector<'a> {
    cfg: &'a ScenarioConfig,
    summary: Summary,
    dumps: Vec<(String, SampledEnvelope)>,
}

impl<'a> Collector<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Self {
            cfg,
            summary: Summary {
                experiment: cfg.experiment.name().to_string(),
                quantities: BTreeMap::new(),
                rows: Vec::new(),
                warnings: Vec::new(),
                provenance: cfg.provenance.clone(),
                files: Vec::new(),
            },
            dumps: Vec::new(),
        }
    }

    fn q(&mut self, name: &str, value: f64, dim: Dimension, unit: &'static str) {
        if value.is_finite() {
            self.summary.quantities.insert(
                name.to_string(),
                SummaryValue {
                    si: self.cfg.ctx.to_si(value, dim),
                    natural: value,
                    unit: if self.cfg.is_natural() && !matches!(unit, "1" | "rad") {
                        "natural"
                    } else {
                        unit
                    },
                },
            );
        }
    }

    fn plain(&mut self, name: &str, value: f64) {
        self.q(name, value, Dimension::DIMENSIONLESS, "1");
    }

    fn dump(&mut self, name: &str, env: &SampledEnvelope) {
        for w in &env.warnings {
            let line = format!("{name}: {} tail mass {:.3e}", w.operation, w.tail_mass);
            if !self.summary.warnings.contains(&line) {
                self.summary.warnings.push(line);
            }
        }
        self.dumps.push((name.to_string(), env.clone()));
    }

    fn lens_quantities(&mut self, spec: &LensSpec) {
        let design = spec.design();
        self.q("lens.gamma0", spec.gamma0, Dimension::DIMENSIONLESS, "rad");
        self.q(
            "lens.signed_gamma0",
            spec.signed_gamma0(),
            Dimension::DIMENSIONLESS,
            "rad",
        );
        self.q(
            "lens.delta_phi",
            spec.delta_phi,
            Dimension::DIMENSIONLESS,
            "rad",
        );
        self.plain("lens.walkoff_factor", spec.walkoff_factor());
        self.q("lens.a0", spec.a0, Dimension::VECTOR_POTENTIAL, "V s/m");
        self.q("lens.phi0", spec.phi0, Dimension::POTENTIAL, "V");
        self.q("lens.lambda_m", spec.lambda_m, Dimension::LENGTH, "m");
        self.q("lens.aperture", design.aperture, Dimension::LENGTH, "m");
        if let Some(f) = design.focal_length.value() {
            self.q("lens.focal_length", f, Dimension::LENGTH, "m");
        }
        if let Some(n) = design.f_number {
            self.plain("lens.f_number", n);
        }
        if let Some(n) = spec.f_number_rest_energy() {
            self.plain("lens.f_number_rest_energy", n);
        }
        if let Some(r) = design.resolution_input_scale {
            self.q("lens.resolution", r, Dimension::LENGTH, "m");
        }
    }

    fn design_quantities(&mut self, d: &ImagingDesign) {
        self.q("imaging.l1", d.l1, Dimension::LENGTH, "m");
        self.q("imaging.l2", d.l2, Dimension::LENGTH, "m");
        self.q("imaging.tau1", d.tau1, Dimension::TIME, "s");
        self.q("imaging.tau2", d.tau2, Dimension::TIME, "s");
        self.plain("imaging.magnification", d.magnification);
    }

    fn finish(self) -> RunOutput {
        RunOutput {
            summary: self.summary,
            dumps: self.dumps,
        }
    }
}

pub fn make_input(cfg: &ScenarioConfig) -> Result<SampledEnvelope, RunError> {
    match cfg.input {
        InputSpec::Gaussian {
            center,
            sigma,
            chirp,
        } => make_gaussian(&cfg.grid, &cfg.carrier, center, sigma, chirp),
        InputSpec::AsymmetricPair {
            separation,
            sigma,
            amplitude_ratio,
        } => make_asymmetric_pair(&cfg.grid, &cfg.carrier, separation, sigma, amplitude_ratio),
    }
    .map_err(ctx_err("input"))
}

fn lens_of(cfg: &ScenarioConfig) -> &LensSpec {
    cfg.lens.as_ref().expect("validated config carries a lens")
}

pub fn imaging_design(cfg: &ScenarioConfig) -> Result<ImagingDesign, RunError> {
    let spec = lens_of(cfg);
    let f = spec.focal_length();
    let design = match cfg.imaging.expect("validated config carries imaging") {
        ImagingRequest::ObjectDistance(l1) => solve_imaging(l1, f, &cfg.ctx, &cfg.carrier),
        ImagingRequest::ObjectTime(t1) => {
            solve_imaging(t1 * cfg.carrier.v_group, f, &cfg.ctx, &cfg.carrier)
        }
        ImagingRequest::Magnification(m) => solve_for_magnification(m, f, &cfg.ctx, &cfg.carrier),
    }
    .map_err(ctx_err("imaging design"))?;
    Ok(design.with_lens_transit_time(cfg.lens_transit_time))
}

pub fn run_experiment(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let mut c = Collector::new(cfg);
    let input = make_input(cfg)?;
    c.q(
        "input.rms_width",
        variance(&input).map_err(ctx_err("input"))?.sqrt(),
        Dimension::LENGTH,
        "m",
    );
    c.dump("input", &input);

    match &cfg.experiment {
        Experiment::Disperse { tau } => {
            let seg = DispersionSegment::new(*tau, &cfg.ctx, &cfg.carrier)
                .map_err(ctx_err("disperse"))?;
            let out = propagate(&input, &seg, &cfg.ctx).map_err(ctx_err("disperse"))?;
            c.q("disperse.tau", *tau, Dimension::TIME, "s");
            c.q("disperse.coeff", seg.coeff, Dimension::AREA, "m^2");
            c.q(
                "output.rms_width",
                variance(&out).map_err(ctx_err("disperse"))?.sqrt(),
                Dimension::LENGTH,
                "m",
            );
            c.plain("output.norm", norm(&out).map_err(ctx_err("disperse"))?);
            c.q(
                "output.global_phase",
                out.global_phase,
                Dimension::DIMENSIONLESS,
                "rad",
            );
            if let InputSpec::Gaussian { sigma, chirp, .. } = cfg.input {
                if chirp == 0.0 {
                    let r = seg.coeff / (sigma * sigma);
                    c.q(
                        "output.analytic_rms_width",
                        sigma * (1.0 + r * r).sqrt(),
                        Dimension::LENGTH,
                        "m",
                    );
                }
            }
            c.dump("output", &out);
        }
        Experiment::Lens => {
            let spec = lens_of(cfg);
            c.lens_quantities(spec);
            let out =
                apply_lens(&input, spec, cfg.lens_mode, cfg.aperture).map_err(ctx_err("lens"))?;
            c.plain("output.norm", norm(&out).map_err(ctx_err("lens"))?);
            c.dump("lensed", &out);
        }
        Experiment::Image => {
            let spec = lens_of(cfg);
            c.lens_quantities(spec);
            let design = imaging_design(cfg)?;
            c.design_quantities(&design);
            let out = run_pipeline(&input, &design, spec, cfg.lens_mode, cfg.aperture)
                .map_err(ctx_err("image"))?;
            let ideal = ideal_image(&input, &design).map_err(ctx_err("ideal image"))?;
            c.plain(
                "image.fidelity",
                fidelity(&out, &ideal).map_err(ctx_err("image"))?,
            );
            let est = estimate_magnification(&input, &out).map_err(ctx_err("image"))?;
            c.plain("image.estimated_magnitude", est.magnitude);
            if let Some(m) = est.value() {
                c.plain("image.estimated_magnification", m);
            }
            c.plain(
                "input.skewness",
                skewness(&input).map_err(ctx_err("image"))?,
            );
            c.plain("output.skewness", skewness(&out).map_err(ctx_err("image"))?);
            c.q(
                "output.rms_width",
                variance(&out).map_err(ctx_err("image"))?.sqrt(),
                Dimension::LENGTH,
                "m",
            );
            c.plain("output.norm", norm(&out).map_err(ctx_err("image"))?);
            c.dump("output", &out);
            c.dump("ideal", &ideal);
        }
        Experiment::Sweep { widths } => {
            let spec = lens_of(cfg);
            c.lens_quantities(spec);
            let design = imaging_design(cfg)?;
            c.design_quantities(&design);
            let points =
                aberration_sweep(spec, &design, &cfg.grid, widths).map_err(ctx_err("sweep"))?;
            let l = Dimension::LENGTH;
            for p in &points {
                let mut row = BTreeMap::new();
                row.insert("input_width".to_string(), cfg.ctx.to_si(p.input_width, l));
                row.insert("lens_width".to_string(), cfg.ctx.to_si(p.lens_width, l));
                row.insert("lens_width_km".to_string(), p.lens_width_km);
                row.insert("fidelity".to_string(), p.fidelity);
                c.summary.rows.push(row);
            }
            let first = points.first().map_or(f64::NAN, |p| p.fidelity);
            let min = points
                .iter()
                .map(|p| p.fidelity)
                .fold(f64::INFINITY, f64::min);
            c.plain("sweep.fidelity_first", first);
            c.plain("sweep.fidelity_min", min);
        }
        Experiment::Resolution { probe_fwhm } => {
            let spec = lens_of(cfg);
            c.lens_quantities(spec);
            let design = imaging_design(cfg)?;
            c.design_quantities(&design);
            let run = resolution_run(
                &cfg.grid,
                &design,
                spec,
                *probe_fwhm,
                cfg.aperture,
                cfg.lens_mode,
            )
            .map_err(ctx_err("resolution"))?;
            let r = run.report;
            let l = Dimension::LENGTH;
            c.q("resolution.probe_fwhm", r.probe_fwhm, l, "m");
            c.q("resolution.output_fwhm", r.output_fwhm, l, "m");
            c.q(
                "resolution.blur_input_referred",
                r.blur_input_referred,
                l,
                "m",
            );
            c.q("resolution.predicted", r.predicted, l, "m");
            c.plain("resolution.ratio", r.ratio);
            if let Some(a) = cfg.aperture {
                c.q("resolution.aperture", a.width(), l, "m");
            }
            c.dump("probe", &run.probe);
            c.dump("image", &run.image);
        }
    }
    Ok(c.finish())
}

/// CSV dump of an envelope in SI: `xi [m], re_psi, im_psi [m^-1/2], abs2 [1/m]`.
pub fn envelope_csv(env: &SampledEnvelope, cfg: &ScenarioConfig) -> String {
    let lx = cfg.ctx.scale.factor(Dimension::LENGTH);
    let amp = cfg.ctx.scale.amplitude();
    let mut s = String::with_capacity(env.values.len() * 100);
    s.push_str("xi,re_psi,im_psi,abs2\n");
    for (j, v) in env.values.iter().enumerate() {
        let p = v * amp;
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            env.grid.xi(j) * lx,
            p.re,
            p.im,
            p.norm_sqr()
        );
    }
    s
}

fn rows_csv(rows: &[BTreeMap<String, f64>]) -> String {
    let mut s = String::new();
    if let Some(first) = rows.first() {
        s.push_str(&first.keys().cloned().collect::<Vec<_>>().join(","));
        s.push('\n');
        for row in rows {
            let cells: Vec<String> = row.values().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes dumps and summary into `dir` and returns the final summary.
pub fn write_outputs(
    out: &RunOutput,
    cfg: &ScenarioConfig,
    dir: &Path,
    format: OutputFormat,
) -> Result<Summary, RunError> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut summary = out.summary.clone();
    if format.csv() {
        for (name, env) in &out.dumps {
            let file = format!("{name}.csv");
            write(&dir.join(&file), &envelope_csv(env, cfg))?;
            summary.files.push(file);
        }
        if !summary.rows.is_empty() {
            write(&dir.join("sweep.csv"), &rows_csv(&summary.rows))?;
            summary.files.push("sweep.csv".into());
        }
    }
    if format.json() {
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write(&dir.join("summary.json"), &(json + "\n"))?;
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let meta = serde_json::json!({
            "generator": concat!("matterwave ", env!("CARGO_PKG_VERSION")),
            "generated_unix": stamp,
        });
        write(&dir.join("metadata.json"), &(meta.to_string() + "\n"))?;
    }
    Ok(summary)
}

/// Runs the scenario and writes everything to `dir`.
pub fn run_to_dir(
    cfg: &ScenarioConfig,
    dir: &Path,
    format: OutputFormat,
) -> Result<Summary, RunError> {
    let out = run_experiment(cfg)?;
    write_outputs(&out, cfg, dir, format)
}

/// Directory name for one sweep element: `<key>=<value>` with path-hostile
/// characters replaced.
pub fn sweep_dir_name(key: &str, value: &str) -> String {
    format!("{key}={value}")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._=+-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// One run per value of `key`, in parallel; each writes to its own
/// subdirectory of `dir`. Results come back in the order of `values`.
pub fn run_sweep(
    base: &toml::Table,
    key: &str,
    values: &[String],
    dir: &Path,
    format: OutputFormat,
) -> Vec<(String, Result<Summary, RunError>)> {
    values
        .par_iter()
        .map(|v| {
            let result = (|| {
                let mut table = base.clone();
                override_key(&mut table, key, v)?;
                let cfg = from_table(table)?;
                run_to_dir(&cfg, &dir.join(sweep_dir_name(key, v)), format)
            })();
            (v.clone(), result)
        })
        .collect()
}
