//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{AnyModel, Engine, InputKind, RunConfig};
use crate::analytic::{
    all_permutations, brute_force_suite, random_factor_sv_predictive, random_factor_sv_variance, write_bench_csv,
    BenchRow, BenchSettings, BenchTask, LinearReward, ModelParameterExact, PathwayVariant, PolicyExactValue,
    RandomFactorExact,
};
use crate::error::{Error, Result};
use crate::model::{
    fit_linear_posterior, fit_nonlinear_posterior, read_trajectories_csv, simulate_batch, write_trajectories_csv,
    EnsembleFile, LinearPolicy, Parameterized, PkgModel, PosteriorEnsemble, RewardSpec, TrajectoryRecord,
};
use crate::numeric::{fmt_f64, mean, sample_variance};
use crate::rng::{self, domain};
use crate::sampling::{
    cube_points, discrepancy_score, sphere_to_permutation, write_permutations_csv, CubeSource, PermutationBatch,
    PermutationMethod, PermutationSampler,
};
use crate::shapley::{exact_shapley, shapley_estimate, ModelParameterValue, PolicyValue, RandomFactorValue, SvReport, ValueFunction, ValueMode};

/// Relative tolerance of the efficiency check on every report.
pub const EFFICIENCY_TOLERANCE: f64 = 1e-9;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn resolve(dir: &Path, flag: Option<&Path>, configured: Option<&PathBuf>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf).or_else(|| configured.map(|p| dir.join(p)))
}

/// Simulated trajectories in the ingestion format.
pub fn cmd_simulate<W: Write>(cfg: &RunConfig, batches: Option<usize>, out: W) -> Result<()> {
    let model = cfg.build_model()?;
    let policy = cfg.build_policy(&model)?;
    let reward = cfg.build_reward(&model)?;
    let m = model.as_dyn();
    let count = batches.unwrap_or(cfg.simulate.batches);
    let trajectories = simulate_batch(m, &policy, &reward, count, cfg.seed)?;
    let records: Vec<TrajectoryRecord> =
        trajectories.iter().enumerate().map(|(b, tr)| TrajectoryRecord::from_trajectory(b as u64 + 1, tr)).collect();
    write_trajectories_csv(out, &records, &m.state_labels(), &m.action_labels())
}

/// Posterior ensemble fitted to a trajectory table.
pub fn cmd_fit<W: Write>(cfg: &RunConfig, records: &[TrajectoryRecord], mut out: W) -> Result<()> {
    let file = match cfg.build_model()? {
        AnyModel::Linear(m) => {
            let count = cfg.fit.samples.unwrap_or(100);
            EnsembleFile::LinearGaussian(fit_linear_posterior(records, &m, &cfg.fit.prior, count, cfg.seed)?)
        }
        AnyModel::Kinetic(m) => {
            EnsembleFile::Kinetic(fit_nonlinear_posterior(records, &m, &cfg.fit.kinetic_prior, &cfg.fit.mcmc, cfg.seed)?)
        }
    };
    serde_json::to_writer_pretty(&mut out, &file)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_records(cfg: &RunConfig, path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let model = cfg.build_model()?;
    let m = model.as_dyn();
    read_trajectories_csv(open(path)?, m.state_dim(), m.action_dim())
}

/// Options of the `sv` subcommand beyond the configuration file.
#[derive(Debug, Clone, Default)]
pub struct SvOptions {
    pub engine: Option<Engine>,
    pub exact: bool,
    pub posterior: Option<PathBuf>,
    pub permutations_out: Option<PathBuf>,
}

/// Shapley report for the configured analysis.
pub fn cmd_sv(cfg: &RunConfig, config_dir: &Path, opts: &SvOptions) -> Result<SvReport> {
    let model = cfg.build_model()?;
    let policy = cfg.build_policy(&model)?;
    let reward = cfg.build_reward(&model)?;
    let engine = opts.engine.unwrap_or(cfg.analysis.engine);
    let posterior = resolve(config_dir, opts.posterior.as_deref(), cfg.io.posterior.as_ref());
    let ensemble = match &posterior {
        Some(p) => Some(serde_json::from_reader::<_, EnsembleFile>(std::io::BufReader::new(open(p)?))?),
        None => None,
    };
    let report = match (model, ensemble) {
        (AnyModel::Linear(m), None) => run_sv(cfg, opts, engine, PosteriorEnsemble::single(m), &policy, &reward)?,
        (AnyModel::Linear(_), Some(EnsembleFile::LinearGaussian(e))) => run_sv(cfg, opts, engine, e, &policy, &reward)?,
        (AnyModel::Kinetic(m), None) => run_sv(cfg, opts, engine, PosteriorEnsemble::single(m), &policy, &reward)?,
        (AnyModel::Kinetic(_), Some(EnsembleFile::Kinetic(e))) => run_sv(cfg, opts, engine, e, &policy, &reward)?,
        _ => return Err(Error::invalid("posterior file is for a different model family")),
    };
    let report = match &cfg.analysis.outputs {
        Some(labels) => report.select_outputs(labels)?,
        None => report,
    };
    check_efficiency(&report)?;
    Ok(report)
}

pub fn check_efficiency(report: &SvReport) -> Result<()> {
    for (j, (res, span)) in report.efficiency_residual.iter().zip(&report.mean_span).enumerate() {
        if !(*res <= EFFICIENCY_TOLERANCE * span.abs().max(1.0)) {
            return Err(Error::invalid(format!(
                "efficiency residual {res:e} for output {} exceeds tolerance",
                report.output_labels[j]
            )));
        }
    }
    Ok(())
}

trait Family: PkgModel + Parameterized + Clone + 'static {
    fn analytic(
        cfg: &RunConfig,
        exact: bool,
        ensemble: &PosteriorEnsemble<Self>,
        policy: &LinearPolicy,
        reward: &RewardSpec,
        perms: &dyn Fn(usize) -> Result<PermutationBatch>,
    ) -> Result<SvReport>;
}

impl Family for crate::model::KineticModel {
    fn analytic(
        _: &RunConfig,
        _: bool,
        _: &PosteriorEnsemble<Self>,
        _: &LinearPolicy,
        _: &RewardSpec,
        _: &dyn Fn(usize) -> Result<PermutationBatch>,
    ) -> Result<SvReport> {
        Err(Error::invalid("the analytic engine needs a linear Gaussian model"))
    }
}

impl Family for crate::model::LinearGaussianModel {
    fn analytic(
        cfg: &RunConfig,
        exact: bool,
        ensemble: &PosteriorEnsemble<Self>,
        policy: &LinearPolicy,
        reward: &RewardSpec,
        perms: &dyn Fn(usize) -> Result<PermutationBatch>,
    ) -> Result<SvReport> {
        let a = &cfg.analysis;
        let lin = LinearReward::from_spec(reward)?;
        let members = take_samples(ensemble, a.samples)?;
        match a.inputs {
            InputKind::RandomFactors => {
                if exact {
                    let vfs = members
                        .iter()
                        .map(|m| {
                            let mut vf = RandomFactorExact::new(m, policy, &lin, a.mode)?;
                            vf.lambda = a.lambda;
                            Ok(vf)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    average_reports(vfs.iter().map(|vf| exact_report(vf)).collect::<Result<Vec<_>>>()?)
                } else {
                    match a.mode {
                        ValueMode::Expectation => random_factor_sv_predictive(members, policy, &lin, a.lambda),
                        ValueMode::Variance => random_factor_sv_variance(members, policy, &lin),
                    }
                }
            }
            InputKind::PolicyParameters => {
                let vf = PolicyExactValue::new(members, policy, &lin, a.mode, PathwayVariant::Reuse)?;
                if exact {
                    exact_report(&vf)
                } else {
                    shapley_estimate(&vf, &perms(vf.num_inputs())?)
                }
            }
            InputKind::ModelParameters => {
                let sub = PosteriorEnsemble::new(ensemble.provenance.clone(), ensemble.seed, members.to_vec())?;
                let mut vf = ModelParameterExact::new(&sub, policy, &lin, a.mode)?;
                vf.pinned = ensemble.parameter_mean();
                if exact {
                    exact_report(&vf)
                } else {
                    shapley_estimate(&vf, &perms(vf.num_inputs())?)
                }
            }
        }
    }
}

fn take_samples<M>(ensemble: &PosteriorEnsemble<M>, q: Option<usize>) -> Result<&[M]> {
    let available = ensemble.members.len();
    let q = q.unwrap_or(available);
    if q == 0 || q > available {
        return Err(Error::EnsembleTooSmall { requested: q, available });
    }
    Ok(&ensemble.members[..q])
}

fn run_sv<M: Family>(
    cfg: &RunConfig,
    opts: &SvOptions,
    engine: Engine,
    ensemble: PosteriorEnsemble<M>,
    policy: &LinearPolicy,
    reward: &RewardSpec,
) -> Result<SvReport> {
    let a = &cfg.analysis;
    let exact = opts.exact;
    let perms = |size: usize| -> Result<PermutationBatch> {
        let batch = if exact {
            all_permutations(size)?
        } else {
            let mut sampler = PermutationSampler::new(a.method, rng::stream_id(cfg.seed, &[domain::PERMUTATION]));
            if let Some(cube) = a.cube {
                sampler = sampler.with_cube(cube);
            }
            sampler.sample(size, a.permutations)?
        };
        if let Some(path) = &opts.permutations_out {
            let method = if exact { "exhaustive" } else { a.method.name() };
            write_permutations_csv(create(path)?, &batch, method, cfg.seed)?;
        }
        Ok(batch)
    };
    if engine == Engine::Analytic {
        return M::analytic(cfg, exact, &ensemble, policy, reward, &perms);
    }
    let seed = cfg.seed;
    match a.inputs {
        InputKind::RandomFactors => {
            let members = take_samples(&ensemble, a.samples)?;
            let mut vf = RandomFactorValue::new(members, policy, reward, a.mode, seed)?;
            vf.lambda = a.lambda;
            vf.sizes = sizes(cfg);
            vf.plan = a.plan;
            shapley_estimate(&vf, &perms(vf.num_inputs())?)
        }
        InputKind::PolicyParameters => {
            let members = take_samples(&ensemble, a.samples)?;
            let mut vf = PolicyValue::new(members, policy, reward, a.mode, seed)?;
            vf.trajectories = a.trajectories;
            vf.plan = a.plan;
            shapley_estimate(&vf, &perms(vf.num_inputs())?)
        }
        InputKind::ModelParameters => {
            let mut vf = ModelParameterValue::new(&ensemble, policy, reward, a.mode, seed)?;
            vf.sizes = sizes(cfg);
            vf.with_replacement = a.with_replacement;
            shapley_estimate(&vf, &perms(vf.num_inputs())?)
        }
    }
}

fn sizes(cfg: &RunConfig) -> crate::shapley::McSizes {
    let a = &cfg.analysis;
    crate::shapley::McSizes { trajectories: a.trajectories, outer: a.outer, inner: a.inner }
}

/// Exact report by subset enumeration, averaged over posterior samples.
pub fn exact_report<V: ValueFunction + ?Sized>(vf: &V) -> Result<SvReport> {
    let (n, k) = (vf.num_inputs(), vf.num_outputs());
    let q = vf.num_samples();
    let mut sv = vec![vec![0.0; k]; n];
    let mut span = vec![0.0; k];
    let (mut full, mut empty) = (vec![0.0; k], vec![0.0; k]);
    for s in 0..q {
        let part = exact_shapley(vf, s)?;
        for (row, p) in sv.iter_mut().zip(&part) {
            row.iter_mut().zip(p).for_each(|(a, b)| *a += b / q as f64);
        }
        vf.evaluate(s, 0, &vec![true; n], &mut full)?;
        vf.evaluate(s, 0, &vec![false; n], &mut empty)?;
        for j in 0..k {
            span[j] += (full[j] - empty[j]) / q as f64;
        }
    }
    let mut report = SvReport::exact(vf.input_labels(), vf.output_labels(), sv, span);
    report.samples = q;
    Ok(report)
}

fn average_reports(reports: Vec<SvReport>) -> Result<SvReport> {
    let first = reports.first().ok_or(Error::EmptyEnsemble)?;
    let q = reports.len() as f64;
    let (n, k) = (first.input_labels.len(), first.output_labels.len());
    let mut sv = vec![vec![0.0; k]; n];
    let mut span = vec![0.0; k];
    for r in &reports {
        for (row, p) in sv.iter_mut().zip(&r.sv) {
            row.iter_mut().zip(p).for_each(|(a, b)| *a += b / q);
        }
        span.iter_mut().zip(&r.mean_span).for_each(|(a, b)| *a += b / q);
    }
    let mut out = SvReport::exact(first.input_labels.clone(), first.output_labels.clone(), sv, span);
    out.samples = reports.len();
    Ok(out)
}

/// Write a report as long CSV, and optionally JSON and wide CSV.
pub fn write_report(report: &SvReport, csv: &Path, json: Option<&Path>, wide: Option<&Path>) -> Result<()> {
    let mut w = create(csv)?;
    report.write_long_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = json {
        let mut w = create(p)?;
        report.write_json(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = wide {
        let mut w = create(p)?;
        report.write_wide_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Settings of the permutation-sampler study.
#[derive(Debug, Clone)]
pub struct StudySettings {
    pub dims: Vec<usize>,
    pub count: usize,
    pub methods: Vec<PermutationMethod>,
    pub replications: usize,
    pub cube: Option<CubeSource>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub dim: usize,
    pub method: PermutationMethod,
    pub cube: CubeSource,
    pub discrepancy_mean: f64,
    pub discrepancy_sd: f64,
    pub generation_seconds: f64,
    pub transform_seconds: f64,
}

/// One replication, timed serially: cube points, then sphere map and ranking.
pub fn timed_batch(method: PermutationMethod, cube: CubeSource, size: usize, count: usize, seed: u64) -> Result<(PermutationBatch, f64, f64)> {
    let Some(sphere) = method.sphere() else {
        let start = Instant::now();
        let batch = PermutationSampler::new(method, seed).sample(size, count)?;
        return Ok((batch, 0.0, start.elapsed().as_secs_f64()));
    };
    let base = if method == PermutationMethod::TfwwVrt { count / 2 } else { count };
    if method == PermutationMethod::TfwwVrt && count % 2 != 0 {
        return Err(Error::invalid("antithetic sampling needs an even count"));
    }
    let ambient = size - 1;
    let start = Instant::now();
    let points = cube_points(cube, sphere.cube_dimension(ambient), base, seed)?;
    let generation = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let mut perms = Vec::with_capacity(count);
    for c in &points {
        perms.push(sphere_to_permutation(&sphere.map(c, ambient)?));
    }
    let transform = start.elapsed().as_secs_f64();
    let batch = PermutationBatch::new(size, perms)?;
    let batch = if method == PermutationMethod::TfwwVrt { batch.with_reverses() } else { batch };
    Ok((batch, generation, transform))
}

pub fn cmd_perm_study(settings: &StudySettings) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for &dim in &settings.dims {
        if dim < 2 {
            return Err(Error::invalid("study dimensions must be at least 2"));
        }
        for &method in &settings.methods {
            let cube = settings.cube.unwrap_or(method.default_cube());
            let mut scores = Vec::with_capacity(settings.replications);
            let (mut gen, mut tr) = (0.0, 0.0);
            for rep in 0..settings.replications {
                let seed = rng::stream_id(settings.seed, &[domain::PERMUTATION, dim as u64, rep as u64]);
                let (batch, g, t) = timed_batch(method, cube, dim, settings.count, seed)?;
                scores.push(discrepancy_score(&batch));
                gen += g;
                tr += t;
            }
            let reps = settings.replications.max(1) as f64;
            rows.push(StudyRow {
                dim,
                method,
                cube,
                discrepancy_mean: mean(&scores),
                discrepancy_sd: sample_variance(&scores).sqrt(),
                generation_seconds: gen / reps,
                transform_seconds: tr / reps,
            });
        }
    }
    Ok(rows)
}

pub fn write_study_csv<W: Write>(w: W, rows: &[StudyRow], count: usize, replications: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dim",
        "method",
        "cube",
        "count",
        "replications",
        "discrepancy_mean",
        "discrepancy_sd",
        "generation_seconds",
        "transform_seconds",
    ])?;
    for r in rows {
        out.write_record([
            r.dim.to_string(),
            r.method.name().to_string(),
            match r.cube {
                CubeSource::Pseudo => "pseudo".to_string(),
                CubeSource::Sobol => "sobol".to_string(),
            },
            count.to_string(),
            replications.to_string(),
            fmt_f64(r.discrepancy_mean),
            fmt_f64(r.discrepancy_sd),
            format!("{:.6e}", r.generation_seconds),
            format!("{:.6e}", r.transform_seconds),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Paired reuse and brute-force timings; fails on any checksum mismatch.
pub fn cmd_bench<W: Write>(tasks: &[BenchTask], horizons: &[usize], settings: BenchSettings, seed: u64, out: W) -> Result<Vec<BenchRow>> {
    let rows = brute_force_suite(tasks, horizons, settings, seed)?;
    write_bench_csv(out, &rows)?;
    Ok(rows)
}
