//! Runners for each command. Every runner writes its artifacts and a
//! deterministic `results.json` into the output directory; `run_command`
//! adds `manifest.json` with the config hash, seed and wall time.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checkpoint::Checkpoint;
use super::config::{load_config, ClassifyConfig, DumpConfig, DumpKernel, GradcheckConfig, RecoverExperiment, RegressConfig};
use super::data::{load_csv_dataset, Standardizer};
use super::init::{hmk_from_inputs, hmk_from_spectrum, inducing_frequencies, kmeans, seed_frequencies, sm_from_spectrum, HmkInit};
use super::io::{io_err, write_json, write_rows, write_trace};
use super::{ExperimentError, Result};
use crate::autodiff::softplus_inv;
use crate::inference::{
    collapsed_bound_with_grad, normalize_labels, CollapsedFit, CovarianceModel, InducingFrequencies, InducingPointModel, Likelihood, Svgp,
    VffModel,
};
use crate::kernels::{eval_gsm_target, eval_lsg, eval_se, pack, random_hmk, GsmFuncs, HmkLayout, HmkParams, SmParams, Target};
use crate::optim::recover::{grid_mse, recovery_init};
use crate::optim::{gradcheck, grid_mse_with_grad, recover_kernel, train_alternating, train_collapsed, GradCheckReport, TracePoint};
use crate::spectral::{gsd_hmk, gsd_lsg, linspace, sd_se, wdf_hmk, wdf_lsg};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Recover,
    Classify,
    Regress,
    DumpSpectral,
    Gradcheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Recover => "recover",
            Command::Classify => "classify",
            Command::Regress => "regress",
            Command::DumpSpectral => "dump-spectral",
            Command::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    /// Files written, sorted.
    pub outputs: Vec<String>,
}

/// Run `cmd` with the config at `config_path`, writing into `out`.
pub fn run_command(cmd: Command, config_path: &Path, seed: u64, out: &Path) -> Result<Manifest> {
    let clock = Instant::now();
    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let bytes = match cmd {
        Command::Recover => {
            let (cfg, b) = load_config::<RecoverExperiment>(config_path)?;
            cfg.validate()?;
            prepare(out)?;
            run_recover(&cfg, seed, out)?;
            b
        }
        Command::Classify => {
            let (cfg, b) = load_config::<ClassifyConfig>(config_path)?;
            cfg.validate()?;
            let cfg = ClassifyConfig { dataset: cfg.dataset.resolved(&base), ..cfg };
            prepare(out)?;
            run_classify(&cfg, seed, out)?;
            b
        }
        Command::Regress => {
            let (cfg, b) = load_config::<RegressConfig>(config_path)?;
            cfg.validate()?;
            let cfg = RegressConfig { dataset: cfg.dataset.resolved(&base), ..cfg };
            prepare(out)?;
            run_regress(&cfg, seed, out)?;
            b
        }
        Command::DumpSpectral => {
            let (mut cfg, b) = load_config::<DumpConfig>(config_path)?;
            cfg.validate()?;
            if let DumpKernel::Checkpoint { path } = &mut cfg.kernel {
                *path = base.join(&*path);
            }
            prepare(out)?;
            run_dump(&cfg, seed, out)?;
            b
        }
        Command::Gradcheck => {
            let (cfg, b) = load_config::<GradcheckConfig>(config_path)?;
            cfg.validate()?;
            prepare(out)?;
            let r = run_gradcheck(&cfg, seed, out)?;
            write_manifest(cmd, config_path, &b, seed, out, &clock)?;
            if !r.pass {
                return Err(ExperimentError::Numerical(format!("gradient check failed: max relative error {}", r.max_rel_error)));
            }
            return Manifest::load(&out.join("manifest.json"));
        }
    };
    write_manifest(cmd, config_path, &bytes, seed, out, &clock)
}

impl Manifest {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Numerical(format!("re-reading manifest: {e}")))
    }
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

fn write_manifest(cmd: Command, config_path: &Path, bytes: &[u8], seed: u64, out: &Path, clock: &Instant) -> Result<Manifest> {
    let mut outputs = Vec::new();
    for entry in std::fs::read_dir(out).map_err(|e| io_err(out, e))? {
        let name = entry.map_err(|e| io_err(out, e))?.file_name().to_string_lossy().into_owned();
        if name != "manifest.json" {
            outputs.push(name);
        }
    }
    outputs.sort();
    let m = Manifest {
        command: cmd,
        config_path: config_path.to_path_buf(),
        config_sha256: hex::encode(Sha256::digest(bytes)),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        outputs,
    };
    write_json(&out.join("manifest.json"), &m)?;
    Ok(m)
}

fn rows_1d(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|&x| vec![x]).collect()
}

// ---------------------------------------------------------------- recover

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverResults {
    pub target: String,
    pub window: [f64; 2],
    pub grid_points: usize,
    pub components: usize,
    pub freqs: usize,
    pub restarts: usize,
    pub iters: usize,
    /// Full-grid MSE of the chosen fit.
    pub mse: f64,
    /// MSE divided by the mean squared target value.
    pub relative_mse: f64,
    pub restart_mse: Vec<f64>,
    pub best_restart: usize,
    /// Full-grid MSE of the best initialisation.
    pub initial_mse: f64,
    /// Previously published MSE for this target, for comparison only. Its
    /// grid and model sizes are unknown, so it is not a pass threshold.
    pub reference_mse: Option<f64>,
}

/// Grid for recovery: the IFBM domain is open on the left, so its grid is
/// `lo + k·(hi − lo)/n` for `k = 1..n`; other targets use both endpoints.
pub fn recovery_grid(target: &Target, window: [f64; 2], n: usize) -> Vec<f64> {
    let [lo, hi] = window;
    match target {
        Target::Ifbm { .. } => (1..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect(),
        _ => linspace(lo, hi, n),
    }
}

pub fn run_recover(cfg: &RecoverExperiment, seed: u64, out: &Path) -> Result<RecoverResults> {
    let rc = &cfg.recover;
    let window = cfg.window.unwrap_or_else(|| {
        let (a, b) = cfg.target.default_domain();
        [a, b]
    });
    let g = recovery_grid(&cfg.target, window, rc.grid_points);
    let n = g.len();
    let mut target = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            target[(i, j)] = cfg.target.eval(g[i], g[j])?;
        }
    }
    let grid = rows_1d(&g);
    let scale = target.amax().max(f64::MIN_POSITIVE);
    let inits: Vec<HmkParams> = match (&cfg.target, cfg.init_from_target) {
        (Target::Hmk { params }, true) => vec![params.clone(); rc.restarts],
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..rc.restarts).map(|_| recovery_init(&mut rng, (window[0], window[1]), rc.components, rc.freqs, scale)).collect()
        }
    };
    let initial_mse = inits.iter().map(|p| grid_mse(p, &grid, &target)).fold(f64::INFINITY, f64::min);
    let r = recover_kernel(&target, &grid, &inits, rc, seed)?;
    let (components, freqs) = (r.params.components.len(), r.params.components.first().map_or(0, |c| c.num_freqs()));

    write_json(&out.join("recovered_params.json"), &r.params)?;
    let cells = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| vec![g[i], g[j], f(i, j)]).collect()
    };
    write_rows(&out.join("kernel_true.csv"), &["x", "x2", "k"], cells(&|i, j| target[(i, j)]))?;
    write_rows(&out.join("kernel_recovered.csv"), &["x", "x2", "k"], cells(&|i, j| r.params.eval(&grid[i], &grid[j]).re))?;
    write_trace(&out.join("trace.csv"), &r.trace)?;
    let mean_sq = target.norm_squared() / (n * n) as f64;
    let res = RecoverResults {
        target: cfg.target.name().to_string(),
        window,
        grid_points: n,
        components,
        freqs,
        restarts: rc.restarts,
        iters: rc.iters,
        mse: r.mse,
        relative_mse: if mean_sq > 0.0 { r.mse / mean_sq } else { r.mse },
        restart_mse: r.restart_mse,
        best_restart: r.best_restart,
        initial_mse,
        reference_mse: match cfg.target {
            Target::Gsm { .. } => Some(0.0033),
            Target::Ifbm { .. } => Some(0.0008),
            _ => None,
        },
    };
    write_json(&out.join("results.json"), &res)?;
    Ok(res)
}

// --------------------------------------------------------------- classify

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRun {
    pub inducing_per_component: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub elbo_initial: f64,
    pub elbo_final: f64,
    pub best_restart: usize,
    /// Every predicted probability on train, test and grid lies in `[0, 1]`.
    pub probabilities_in_range: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResults {
    pub n_train: usize,
    pub n_test: usize,
    pub components: usize,
    pub freqs: usize,
    pub runs: Vec<ClassifyRun>,
}

fn accuracy(p: &DVector<f64>, labels: &[f64]) -> f64 {
    let hits = p.iter().zip(labels).filter(|(&pi, &l)| (pi > 0.5) == (l > 0.5)).count();
    hits as f64 / labels.len().max(1) as f64
}

pub fn run_classify(cfg: &ClassifyConfig, seed: u64, out: &Path) -> Result<ClassifyResults> {
    let ds = load_csv_dataset(&cfg.dataset)?;
    let xtr = ds.standardized_rows(&ds.train);
    let xte = ds.standardized_rows(&ds.test);
    let (_, ytr) = ds.rows(&ds.train);
    let (_, yte) = ds.rows(&ds.test);
    let ytr = normalize_labels(&ytr)?;
    let yte = normalize_labels(&yte)?;
    let yv = DVector::from_vec(ytr.clone());
    let init = HmkInit { lengthscale: cfg.init.lengthscale, envelope: cfg.init.envelope, variance: cfg.init.variance };

    // Decision grid over the raw bounding box with a margin.
    let grid_raw: Vec<Vec<f64>> = if ds.dim() == 2 {
        let axis = |k: usize| {
            let lo = ds.x.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
            let hi = ds.x.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.1 * (hi - lo);
            linspace(lo - pad, hi + pad, cfg.grid_points)
        };
        let (a, b) = (axis(0), axis(1));
        a.iter().flat_map(|&u| b.iter().map(move |&v| vec![u, v])).collect()
    } else {
        Vec::new()
    };
    let grid_std: Vec<Vec<f64>> = grid_raw.iter().map(|r| ds.x_stats.standardize(r)).collect();

    let mut runs = Vec::new();
    for &m in &cfg.inducing_per_component {
        let mut best: Option<(f64, usize, Svgp<VffModel>, Vec<TracePoint>)> = None;
        for r in 0..cfg.restarts {
            let stream = (m as u64) << 16 | r as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let kernel = hmk_from_inputs(&mut rng, &xtr, cfg.components, cfg.freqs, cfg.init.freq_noise, &init);
            let z = inducing_frequencies(&mut rng, &kernel, m);
            let mut q = Svgp::prior(VffModel::new(&kernel, z)?, Likelihood::Bernoulli)?;
            let mut ocfg = cfg.optimizer;
            ocfg.seed = seed.wrapping_add(stream);
            let trace = train_alternating(&mut q, &xtr, &yv, &ocfg)?;
            let acc = accuracy(&q.predict(&xtr)?.0, &ytr);
            if best.as_ref().is_none_or(|b| acc > b.0) {
                best = Some((acc, r, q, trace));
            }
        }
        let (train_acc, best_restart, q, trace) = best.expect("at least one restart");
        let ptr = q.predict(&xtr)?.0;
        let pte = q.predict(&xte)?.0;
        let mut in_range = ptr.iter().chain(pte.iter()).all(|p| (0.0..=1.0).contains(p));
        if !grid_raw.is_empty() {
            let pg = q.predict(&grid_std)?.0;
            in_range &= pg.iter().all(|p| (0.0..=1.0).contains(p));
            write_rows(
                &out.join(format!("boundary_m{m}.csv")),
                &["x1", "x2", "p"],
                grid_raw.iter().zip(pg.iter()).map(|(r, &p)| vec![r[0], r[1], p]),
            )?;
        }
        write_trace(&out.join(format!("trace_m{m}.csv")), &trace)?;
        write_json(&out.join(format!("checkpoint_m{m}.json")), &Checkpoint::from_svgp(&q, Some(ds.x_stats.clone())))?;
        runs.push(ClassifyRun {
            inducing_per_component: m,
            train_accuracy: train_acc,
            test_accuracy: accuracy(&pte, &yte),
            elbo_initial: trace[0].objective,
            elbo_final: trace[trace.len() - 1].objective,
            best_restart,
            probabilities_in_range: in_range,
        });
    }
    let res = ClassifyResults { n_train: ds.train.len(), n_test: ds.test.len(), components: cfg.components, freqs: cfg.freqs, runs };
    write_json(&out.join("results.json"), &res)?;
    Ok(res)
}

// ---------------------------------------------------------------- regress

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressReport {
    pub model: String,
    pub num_inducing: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// Mean predictive log density of the test targets.
    pub test_log_likelihood: f64,
    /// Fraction of training targets inside the central 95% predictive band.
    pub train_coverage_95: f64,
    pub bound_initial: f64,
    pub bound_final: f64,
    /// In original target units.
    pub noise_var: f64,
    pub best_restart: usize,
    /// Final bound of every restart.
    pub restart_bounds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressResults {
    pub n_train: usize,
    pub n_test: usize,
    pub models: Vec<RegressReport>,
}

struct RegressData {
    xtr: Vec<Vec<f64>>,
    xte: Vec<Vec<f64>>,
    ytr: DVector<f64>,
    ytr_raw: Vec<f64>,
    yte_raw: Vec<f64>,
    ystats: Standardizer,
    grid_raw: Vec<f64>,
    grid: Vec<Vec<f64>>,
}

struct Trained<M> {
    model: M,
    trace: Vec<TracePoint>,
    fit: CollapsedFit,
    best_restart: usize,
    restart_bounds: Vec<f64>,
}

/// Train one model per restart from `make(rng)` and keep the highest final
/// bound. Restart `r` draws from stream `r + 1` of the run seed.
fn best_of<M: CovarianceModel + Clone>(
    restarts: usize,
    seed: u64,
    d: &RegressData,
    cfg: &RegressConfig,
    mut make: impl FnMut(&mut ChaCha8Rng) -> Result<M>,
) -> Result<Trained<M>> {
    let mut best: Option<Trained<M>> = None;
    let mut bounds = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64 + 1);
        let mut model = make(&mut rng)?;
        let mut noise = cfg.noise_var;
        let trace = train_collapsed(&mut model, &mut noise, &d.xtr, &d.ytr, &cfg.adam, cfg.iters)?;
        let fit = CollapsedFit::new(&model, &d.xtr, &d.ytr, noise)?;
        bounds.push(fit.bound);
        if best.as_ref().is_none_or(|b| fit.bound > b.fit.bound) {
            best = Some(Trained { model, trace, fit, best_restart: r, restart_bounds: Vec::new() });
        }
    }
    let mut t = best.expect("at least one restart");
    t.restart_bounds = bounds;
    Ok(t)
}

fn report<M: CovarianceModel>(name: &str, t: &Trained<M>, d: &RegressData, out: &Path) -> Result<RegressReport> {
    let (fit, model) = (&t.fit, &t.model);
    let noise = fit.noise_var;
    let (my, sy) = (d.ystats.mean[0], d.ystats.scale[0]);
    let pred = |xs: &[Vec<f64>]| -> Result<(Vec<f64>, Vec<f64>)> {
        let (m, v) = fit.predict(model, xs)?;
        Ok((m.iter().map(|u| u * sy + my).collect(), v.iter().map(|u| (u + noise) * sy * sy).collect()))
    };
    let rmse = |m: &[f64], y: &[f64]| (m.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len().max(1) as f64).sqrt();
    let (mtr, vtr) = pred(&d.xtr)?;
    let (mte, vte) = pred(&d.xte)?;
    let ll = mte
        .iter()
        .zip(&vte)
        .zip(&d.yte_raw)
        .map(|((m, v), y)| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (y - m).powi(2) / (2.0 * v))
        .sum::<f64>()
        / d.yte_raw.len().max(1) as f64;
    let inside = mtr.iter().zip(&vtr).zip(&d.ytr_raw).filter(|((m, v), y)| (*y - *m).abs() <= 1.96 * v.sqrt()).count();
    let (mg, vg) = pred(&d.grid)?;
    write_rows(
        &out.join(format!("predictions_{name}.csv")),
        &["x", "mean", "lower", "upper"],
        d.grid_raw.iter().zip(mg.iter().zip(&vg)).map(|(&x, (&m, &v))| vec![x, m, m - 1.96 * v.sqrt(), m + 1.96 * v.sqrt()]),
    )?;
    write_trace(&out.join(format!("trace_{name}.csv")), &t.trace)?;
    Ok(RegressReport {
        model: name.to_string(),
        num_inducing: model.num_inducing(),
        train_rmse: rmse(&mtr, &d.ytr_raw),
        test_rmse: rmse(&mte, &d.yte_raw),
        test_log_likelihood: ll,
        train_coverage_95: inside as f64 / d.ytr_raw.len().max(1) as f64,
        bound_initial: t.trace[0].objective,
        bound_final: fit.bound,
        noise_var: noise * sy * sy,
        best_restart: t.best_restart,
        restart_bounds: t.restart_bounds.clone(),
    })
}

pub fn run_regress(cfg: &RegressConfig, seed: u64, out: &Path) -> Result<RegressResults> {
    let ds = load_csv_dataset(&cfg.dataset)?;
    let (_, ytr_raw) = ds.rows(&ds.train);
    let (_, yte_raw) = ds.rows(&ds.test);
    let ystats = Standardizer::fit(&rows_1d(&ytr_raw));
    let ytr = DVector::from_iterator(ytr_raw.len(), ytr_raw.iter().map(|&v| ystats.standardize(&[v])[0]));
    let lo = ds.x.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let hi = ds.x.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    let grid_raw = linspace(lo, hi, cfg.grid_points);
    let d = RegressData {
        xtr: ds.standardized_rows(&ds.train),
        xte: ds.standardized_rows(&ds.test),
        ytr,
        ytr_raw,
        yte_raw,
        ystats,
        grid: grid_raw.iter().map(|&x| ds.x_stats.standardize(&[x])).collect(),
        grid_raw,
    };
    let x1: Vec<f64> = d.xtr.iter().map(|r| r[0]).collect();
    let z = kmeans(&mut ChaCha8Rng::seed_from_u64(seed), &d.xtr, cfg.inducing_points.min(d.xtr.len()), 100);

    // The SE initialisation is deterministic, so it is trained once.
    let se = best_of(1, seed, &d, cfg, |_| Ok(InducingPointModel::se(1.0, cfg.se.lengthscale, z.clone())))?;
    let mut models = vec![report("se", &se, &d, out)?];

    // SM and HMK frequencies are seeded from what the SE fit leaves behind.
    let residual: Vec<f64> = (&d.ytr - se.fit.predict(&se.model, &d.xtr)?.0).iter().copied().collect();
    let spread = cfg.fmax / 200.0;
    let seeds = seed_frequencies(&x1, &residual, cfg.fmax, cfg.sm.components.max(cfg.hmk.freqs));
    let sm = best_of(cfg.restarts, seed, &d, cfg, |rng| {
        let p = sm_from_spectrum(rng, &seeds, cfg.sm.components, spread, 1.0, cfg.sm.lengthscale);
        Ok(InducingPointModel::sm(&p, z.clone()))
    })?;
    models.push(report("sm", &sm, &d, out)?);

    let init = HmkInit { lengthscale: cfg.hmk.lengthscale, envelope: cfg.hmk.envelope, variance: 1.0 };
    let hmk = best_of(cfg.restarts, seed, &d, cfg, |rng| {
        let kernel = hmk_from_spectrum(rng, &x1, &seeds, cfg.hmk.components, cfg.hmk.freqs, spread, &init);
        let inducing = inducing_frequencies(rng, &kernel, cfg.hmk.inducing_per_component);
        Ok(VffModel::new(&kernel, inducing)?)
    })?;
    models.push(report("hmk", &hmk, &d, out)?);
    let (m, s) = hmk.fit.posterior();
    let ck = Checkpoint::from_parts(
        hmk.model.kernel(),
        hmk.model.inducing().clone(),
        &m,
        &s,
        Likelihood::Gaussian { noise_var: hmk.fit.noise_var },
        Some(ds.x_stats.clone()),
    );
    write_json(&out.join("checkpoint_hmk.json"), &ck)?;

    let res = RegressResults { n_train: ds.train.len(), n_test: ds.test.len(), models };
    write_json(&out.join("results.json"), &res)?;
    Ok(res)
}

// ----------------------------------------------------------- dump-spectral

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpResults {
    pub kernel: String,
    pub points: usize,
    pub files: Vec<String>,
    /// `max |S(ω,ξ) − conj S(ξ,ω)|` over the grid; absent for stationary
    /// kernels, whose generalized density is singular.
    pub gsd_hermitian_residual: Option<f64>,
    /// `max |k(x,x') − conj k(x',x)|` over the grid.
    pub kernel_hermitian_residual: f64,
}

enum Dumped {
    Se(f64, f64),
    Lsg(crate::kernels::LsgParams),
    Hmk(HmkParams),
}

impl Dumped {
    fn kernel(&self, x: f64, x2: f64) -> Complex64 {
        match self {
            Dumped::Se(v, l) => Complex64::new(eval_se(&[x - x2], *v, *l), 0.0),
            Dumped::Lsg(p) => Complex64::new(eval_lsg(&[x], &[x2], p), 0.0),
            Dumped::Hmk(p) => p.eval(&[x], &[x2]),
        }
    }

    fn wdf(&self, x: f64, w: f64) -> f64 {
        match self {
            Dumped::Se(v, l) => sd_se(&[w], *v, *l),
            Dumped::Lsg(p) => wdf_lsg(&[x], &[w], p),
            Dumped::Hmk(p) => wdf_hmk(&[x], &[w], p),
        }
    }

    fn gsd(&self, w: f64, xi: f64) -> Result<Option<Complex64>> {
        Ok(match self {
            Dumped::Se(..) => None,
            Dumped::Lsg(p) => Some(Complex64::new(gsd_lsg(&[w], &[xi], p)?, 0.0)),
            Dumped::Hmk(p) => Some(gsd_hmk(&[w], &[xi], p)?),
        })
    }
}

pub fn run_dump(cfg: &DumpConfig, seed: u64, out: &Path) -> Result<DumpResults> {
    let mut inducing = None;
    let (name, k) = match &cfg.kernel {
        DumpKernel::Se { variance, lengthscale } => ("se", Dumped::Se(*variance, *lengthscale)),
        DumpKernel::Lsg { params } => {
            params.validate()?;
            ("lsg", Dumped::Lsg(params.clone()))
        }
        DumpKernel::Hmk { params } => {
            params.validate()?;
            ("hmk", Dumped::Hmk(params.clone()))
        }
        DumpKernel::RandomHmk { freqs, real_valued } => {
            if freqs.is_empty() || freqs.contains(&0) {
                return Err(ExperimentError::Config("random-hmk needs positive frequency counts".into()));
            }
            ("random-hmk", Dumped::Hmk(random_hmk(&mut ChaCha8Rng::seed_from_u64(seed), 1, freqs, *real_valued)))
        }
        DumpKernel::Checkpoint { path } => {
            let ck = Checkpoint::load(path)?;
            inducing = Some(ck.inducing.clone());
            ("checkpoint", Dumped::Hmk(ck.kernel))
        }
    };
    let dim = match &k {
        Dumped::Se(..) => 1,
        Dumped::Lsg(p) => p.dim(),
        Dumped::Hmk(p) => p.dim(),
    };
    if dim != 1 {
        return Err(ExperimentError::Config(format!("dump-spectral writes one-dimensional grids; kernel has dimension {dim}")));
    }
    let xs = linspace(cfg.x_range[0], cfg.x_range[1], cfg.points);
    let ws = linspace(cfg.omega_range[0], cfg.omega_range[1], cfg.points);
    let mut files = vec!["kernel.csv".to_string(), "wdf.csv".to_string()];

    let mut krows = Vec::with_capacity(xs.len() * xs.len());
    let mut kres: f64 = 0.0;
    for &a in &xs {
        for &b in &xs {
            let v = k.kernel(a, b);
            kres = kres.max((v - k.kernel(b, a).conj()).norm());
            krows.push(vec![a, b, v.re, v.im]);
        }
    }
    write_rows(&out.join("kernel.csv"), &["x", "x2", "re", "im"], krows)?;
    let wrows = xs.iter().flat_map(|&x| ws.iter().map(move |&w| (x, w))).map(|(x, w)| vec![x, w, k.wdf(x, w)]);
    write_rows(&out.join("wdf.csv"), &["x", "omega", "w"], wrows.collect::<Vec<_>>())?;

    let gsd_res = if matches!(k, Dumped::Se(..)) {
        None
    } else {
        let mut vals = vec![Complex64::new(0.0, 0.0); ws.len() * ws.len()];
        for (i, &a) in ws.iter().enumerate() {
            for (j, &b) in ws.iter().enumerate() {
                vals[i * ws.len() + j] = k.gsd(a, b)?.expect("non-stationary kernel");
            }
        }
        let n = ws.len();
        let mut res: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                res = res.max((vals[i * n + j] - vals[j * n + i].conj()).norm());
            }
        }
        let rows = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| {
            let v = vals[i * n + j];
            vec![ws[i], ws[j], v.re, v.im]
        });
        write_rows(&out.join("gsd.csv"), &["omega", "xi", "re", "im"], rows.collect::<Vec<_>>())?;
        files.push("gsd.csv".into());
        Some(res)
    };
    if let Some(z) = inducing {
        let rows = z.freqs.iter().enumerate().flat_map(|(p, f)| f.iter().map(move |w| vec![p as f64, w[0]]));
        write_rows(&out.join("inducing.csv"), &["component", "omega"], rows.collect::<Vec<_>>())?;
        files.push("inducing.csv".into());
    }
    let res =
        DumpResults { kernel: name.into(), points: cfg.points, files, gsd_hermitian_residual: gsd_res, kernel_hermitian_residual: kres };
    write_json(&out.join("results.json"), &res)?;
    Ok(res)
}

// -------------------------------------------------------------- gradcheck

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveCheck {
    pub objective: String,
    pub point: usize,
    pub parameters: usize,
    pub max_rel_error: f64,
    /// Spectral condition number of `K_uu` at this point; absent for the
    /// recovery objective, which has no inducing variables.
    pub kuu_condition: Option<f64>,
    /// Flat index, analytic and numeric value of the worst scored entry.
    pub worst: Option<(usize, f64, f64)>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckResults {
    pub checks: Vec<ObjectiveCheck>,
    pub max_rel_error: f64,
    pub pass: bool,
}

/// Largest `K_uu` condition number accepted for a check point. Central
/// differences at the fixed step lose about `ε·cond` relative accuracy.
pub const MAX_KUU_CONDITION: f64 = 1e4;
const MAX_DRAWS: usize = 1000;

fn condition<M: CovarianceModel>(model: &M) -> f64 {
    let ev = nalgebra::SymmetricEigen::new(model.kuu()).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Draw from `gen` until the model's `K_uu` is well conditioned.
fn draw_conditioned<M: CovarianceModel>(mut gen: impl FnMut() -> Result<M>) -> Result<(M, f64)> {
    for _ in 0..MAX_DRAWS {
        let m = gen()?;
        let c = condition(&m);
        if c <= MAX_KUU_CONDITION {
            return Ok((m, c));
        }
    }
    Err(ExperimentError::Numerical(format!("no gradcheck point with K_uu condition below {MAX_KUU_CONDITION} in {MAX_DRAWS} draws")))
}

fn record(checks: &mut Vec<ObjectiveCheck>, objective: &str, point: usize, cond: Option<f64>, r: &GradCheckReport) {
    checks.push(ObjectiveCheck {
        objective: objective.into(),
        point,
        parameters: r.entries.len(),
        max_rel_error: r.max_rel_error,
        kuu_condition: cond,
        worst: r.worst().map(|e| (e.index, e.analytic, e.numeric)),
        pass: r.pass,
    });
}

fn check_collapsed<M: CovarianceModel + Clone>(
    model: &M,
    xs: &[Vec<f64>],
    y: &DVector<f64>,
    noise_raw: f64,
    h: f64,
) -> Result<GradCheckReport> {
    let mut x = model.params();
    x.push(noise_raw);
    let (_, g) = collapsed_bound_with_grad(model, xs, y, noise_raw)?;
    let loss = |p: &[f64]| {
        let mut m = model.clone();
        m.set_params(&p[..p.len() - 1]);
        collapsed_bound_with_grad(&m, xs, y, p[p.len() - 1]).map_or(f64::NAN, |r| r.0)
    };
    Ok(gradcheck(loss, &x, &g, h))
}

/// Flatten model parameters, mean, lower factor and (Gaussian) noise.
fn check_elbo<M: CovarianceModel + Clone>(q: &Svgp<M>, xs: &[Vec<f64>], y: &DVector<f64>, h: f64) -> Result<GradCheckReport> {
    let (_, g) = q.elbo_with_grad(xs, y, xs.len())?;
    let np = q.model.params().len();
    let n = q.mean.len();
    let tri: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let gaussian = matches!(q.likelihood, Likelihood::Gaussian { .. });
    let mut x = q.model.params();
    x.extend(q.mean.iter());
    x.extend(tri.iter().map(|&(i, j)| q.cov_chol[(i, j)]));
    let mut gv = g.model.clone();
    gv.extend(g.mean.iter());
    gv.extend(tri.iter().map(|&(i, j)| g.chol[(i, j)]));
    if let Likelihood::Gaussian { noise_var } = q.likelihood {
        x.push(softplus_inv(noise_var));
        gv.push(g.noise_raw);
    }
    let loss = |p: &[f64]| {
        let mut r = q.clone();
        r.model.set_params(&p[..np]);
        r.mean = DVector::from_column_slice(&p[np..np + n]);
        for (t, &(i, j)) in tri.iter().enumerate() {
            r.cov_chol[(i, j)] = p[np + n + t];
        }
        if gaussian {
            r.likelihood = Likelihood::Gaussian { noise_var: crate::autodiff::softplus(p[p.len() - 1]) };
        }
        r.elbo(xs, y, xs.len()).map_or(f64::NAN, |e| e.value)
    };
    Ok(gradcheck(loss, &x, &gv, h))
}

fn perturbed_q<M: CovarianceModel, R: Rng>(rng: &mut R, model: M, lik: Likelihood) -> Result<Svgp<M>> {
    let mut q = Svgp::prior(model, lik)?;
    let n = q.mean.len();
    q.mean = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let l = q.cov_chol.clone();
    q.cov_chol = DMatrix::from_fn(n, n, |i, j| if j <= i { l[(i, j)] * rng.random_range(0.6..1.0) } else { 0.0 });
    Ok(q)
}

pub fn run_gradcheck(cfg: &GradcheckConfig, seed: u64, out: &Path) -> Result<GradcheckResults> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for k in 0..cfg.points {
        let xs: Vec<Vec<f64>> = (0..cfg.n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let y = DVector::from_iterator(cfg.n, xs.iter().map(|x| (2.5 * x[0]).cos() + 0.1 * rng.random_range(-1.0..1.0)));
        let labels = y.map(|v| if v > 0.2 { 1.0 } else { 0.0 });
        // Evenly spread frequencies and inducing points; kernels are redrawn
        // until K_uu is well conditioned so central differences resolve the
        // gradient.
        let m = cfg.inducing_per_component;
        let spread: Vec<Vec<f64>> = (0..m).map(|j| vec![0.15 + 0.9 * j as f64 / m as f64]).collect();
        let z = InducingFrequencies::new(vec![spread; cfg.components])?;
        let (vff, c_vff) =
            draw_conditioned(|| Ok(VffModel::new(&random_hmk(&mut rng, 1, &vec![cfg.freqs; cfg.components], true), z.clone())?))?;
        let mz = m.max(2);
        let zpts: Vec<Vec<f64>> = (0..mz).map(|j| vec![-1.0 + 2.0 * j as f64 / (mz - 1) as f64]).collect();
        let (se, c_se) =
            draw_conditioned(|| Ok(InducingPointModel::se(rng.random_range(0.5..2.0), rng.random_range(0.3..1.0), zpts.clone())))?;
        let noise_raw = rng.random_range(-3.0..0.0);
        record(&mut checks, "collapsed-hmk", k, Some(c_vff), &check_collapsed(&vff, &xs, &y, noise_raw, cfg.h_fd)?);
        record(&mut checks, "collapsed-se", k, Some(c_se), &check_collapsed(&se, &xs, &y, noise_raw, cfg.h_fd)?);

        let lik = Likelihood::Gaussian { noise_var: rng.random_range(0.05..0.5) };
        let q = perturbed_q(&mut rng, vff.clone(), lik)?;
        record(&mut checks, "elbo-gaussian-hmk", k, Some(c_vff), &check_elbo(&q, &xs, &y, cfg.h_fd)?);
        let q = perturbed_q(&mut rng, vff, Likelihood::Bernoulli)?;
        record(&mut checks, "elbo-bernoulli-hmk", k, Some(c_vff), &check_elbo(&q, &xs, &labels, cfg.h_fd)?);
        let q = perturbed_q(&mut rng, se, lik)?;
        record(&mut checks, "elbo-gaussian-se", k, Some(c_se), &check_elbo(&q, &xs, &y, cfg.h_fd)?);

        let q = cfg.components;
        let (sm, c_sm) = draw_conditioned(|| {
            let p = SmParams {
                weights: (0..q).map(|_| rng.random_range(0.3..1.5)).collect(),
                means: (0..q).map(|_| vec![rng.random_range(0.0..1.5)]).collect(),
                variances: (0..q).map(|_| vec![rng.random_range(0.05..0.5)]).collect(),
            };
            Ok(InducingPointModel::sm(&p, zpts.clone()))
        })?;
        record(&mut checks, "collapsed-sm", k, Some(c_sm), &check_collapsed(&sm, &xs, &y, noise_raw, cfg.h_fd)?);

        let grid: Vec<Vec<f64>> = linspace(-1.0, 1.0, 8).into_iter().map(|x| vec![x]).collect();
        let target = DMatrix::from_fn(8, 8, |i, j| eval_gsm_target(grid[i][0], grid[j][0], &GsmFuncs::default()).unwrap_or(f64::NAN));
        let init = recovery_init(&mut rng, (-1.0, 1.0), cfg.components, cfg.freqs, 1.0);
        let layout = HmkLayout::of(&init);
        let raw = pack(&init);
        let (_, g) = grid_mse_with_grad(&layout, &raw, &grid, &target);
        let r = gradcheck(|p: &[f64]| grid_mse_with_grad(&layout, p, &grid, &target).0, &raw, &g, cfg.h_fd);
        record(&mut checks, "recovery-mse", k, None, &r);
    }
    let max_rel_error = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let res = GradcheckResults { pass: checks.iter().all(|c| c.pass), max_rel_error, checks };
    write_json(&out.join("results.json"), &res)?;
    Ok(res)
}
