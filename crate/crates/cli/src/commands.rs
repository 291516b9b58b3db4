//! The five commands.  Each receives the validated config and the model it
//! names, does its work, and writes outputs under the run's directory.
//!
//! Randomness is a pure function of the seed through fixed stream numbers:
//! simulate draws from stream 0, weight initialisation from stream 1, risk
//! assessment from stream 2 and bootstrap resampling from stream 3 (the
//! training loop derives its own child streams from stream 0 internally).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nbes_core::assess::{
    block_bootstrap, bootstrap_ci, evaluate_risk, AssessError, Estimator, MapEstimator,
    OneAtATimeEstimator, OracleEstimator,
};
use nbes_core::likelihood::{gp_loglik_set, pairwise_loglik, MapProblem, DEFAULT_CUTOFF};
use nbes_core::models::{DataModel, ReplicateSet, SpatialDomain};
use nbes_core::network::{DeepSetsEstimator, PiecewiseEstimator};
use nbes_core::numerics::RngStream;
use nbes_core::training::{pretrain_chain, train, LossSpec, ReplicateDist, TrainError, TrainingRun};

use crate::config::Effective;
use crate::{AssessArgs, BootstrapArgs, CliError, EstimateArgs, SimulateArgs, TrainArgs};

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::Config(msg) => CliError::Config(msg),
        TrainError::Diverged { .. } => CliError::Training(e.to_string()),
        TrainError::Simulation { .. } | TrainError::Model(_) => CliError::Simulation(e.to_string()),
        TrainError::Network(_) | TrainError::Assess(_) => CliError::Artifact(e.to_string()),
    }
}

fn assess_err(e: AssessError) -> CliError {
    match e {
        AssessError::Invalid(msg) => CliError::Config(msg),
        AssessError::Model(e) => CliError::Simulation(e.to_string()),
        other => CliError::Artifact(other.to_string()),
    }
}

fn write_report(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Artifact(format!("writing {}: {e}", path.display())))
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("expected a number, got {s:?}")))
        })
        .collect()
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("expected a count, got {s:?}")))
        })
        .collect()
}

pub fn simulate(eff: &Effective, model: &dyn DataModel, args: &SimulateArgs) -> Result<(), CliError> {
    if args.m == 0 {
        return Err(CliError::Config("m must be at least 1".into()));
    }
    let mut rng = RngStream::new(eff.config.seed, 0);
    let theta = match &args.theta {
        Some(text) => {
            let theta = parse_f64_list(text)?;
            if theta.len() != model.parameter_count() {
                return Err(CliError::Config(format!(
                    "theta has {} values, model {} has {} parameters",
                    theta.len(),
                    model.name(),
                    model.parameter_count()
                )));
            }
            theta
        }
        None if args.from_prior => model.prior().sample(&mut rng),
        None => return Err(CliError::Config("provide --theta or --from-prior".into())),
    };
    let rs = model
        .simulate(&theta, args.m, &mut rng)
        .and_then(|rs| rs.apply_transform(model.default_transform()))
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    let path = match &args.data {
        Some(p) => eff.resolve(p),
        None => eff.data_path(),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Config(format!("creating {}: {e}", parent.display())))?;
    }
    rs.save(&path)
        .map_err(|e| CliError::Simulation(format!("writing {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    println!("n={} m={} seed={}", rs.n(), rs.m(), eff.config.seed);
    Ok(())
}

pub fn train_cmd(eff: &Effective, model: &dyn DataModel, args: &TrainArgs) -> Result<(), CliError> {
    let tc = eff
        .config
        .training
        .to_train_config(eff.config.seed)
        .map_err(CliError::Config)?;
    let n = model.replicate_dim();
    let p = model.parameter_count();
    let template = match &args.init_checkpoint {
        Some(dir) => {
            let dir = eff.resolve(dir);
            let pw = PiecewiseEstimator::load(&dir)
                .map_err(|e| CliError::Artifact(format!("loading {}: {e}", dir.display())))?;
            if pw.n() != n || pw.p() != p {
                return Err(CliError::Artifact(format!(
                    "checkpoint maps n={} to p={}, model {} needs n={n} to p={p}",
                    pw.n(),
                    pw.p(),
                    model.name()
                )));
            }
            println!("resuming from {}", dir.display());
            pw.sub(0).clone()
        }
        None => {
            let arch = &eff.config.architecture;
            DeepSetsEstimator::with_architecture(
                n,
                p,
                arch.q,
                &arch.psi_hidden,
                &arch.phi_hidden,
                arch.expert.clone(),
                &mut RngStream::new(eff.config.seed, 1),
            )
            .map_err(|e| CliError::Config(e.to_string()))?
        }
    };

    let reports = eff.reports_dir();
    let (estimator, runs): (PiecewiseEstimator, Vec<(PathBuf, TrainingRun)>) =
        match &eff.config.piecewise {
            Some(spec) => {
                let (pw, runs) =
                    pretrain_chain(template, model, &spec.sizes, &spec.changepoints, &tc)
                        .map_err(train_err)?;
                let named = runs
                    .into_iter()
                    .enumerate()
                    .map(|(k, run)| (reports.join(format!("train_stage_{:03}.csv", k + 1)), run))
                    .collect();
                (pw, named)
            }
            None => {
                let (est, run) = train(template, model, &tc).map_err(train_err)?;
                let size = match tc.replicate_dist {
                    ReplicateDist::Fixed(m) => m,
                    ReplicateDist::Uniform { hi, .. } => hi,
                };
                let pw = PiecewiseEstimator::single(est, size)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                (pw, vec![(reports.join("train_run.csv"), run)])
            }
        };

    for (path, run) in &runs {
        write_report(path, &run.to_csv())?;
        println!("run csv {}", path.display());
    }
    let ckpt = eff.checkpoint_dir();
    estimator
        .save(&ckpt)
        .map_err(|e| CliError::Artifact(format!("saving {}: {e}", ckpt.display())))?;
    println!("checkpoint {}", ckpt.display());
    let best = runs.last().expect("at least one stage").1.best_val_risk();
    println!("best validation risk {best:.16e}");
    Ok(())
}

fn parse_losses(text: &str) -> Result<Vec<LossSpec>, CliError> {
    text.split(',')
        .map(|name| match name.trim() {
            "absolute" => Ok(LossSpec::absolute()),
            "squared" => Ok(LossSpec::squared()),
            "zero_one" => Ok(LossSpec::zero_one_default()),
            other => Err(CliError::Config(format!(
                "unknown loss {other:?}; choose from absolute, squared, zero_one"
            ))),
        })
        .collect()
}

/// Names an estimator after its checkpoint directory, disambiguating
/// repeats so rows stay attributable.
fn unique_name(base: String, taken: &[String]) -> String {
    if !taken.contains(&base) {
        return base;
    }
    let mut k = 2;
    loop {
        let candidate = format!("{base}#{k}");
        if !taken.contains(&candidate) {
            return candidate;
        }
        k += 1;
    }
}

fn map_bounds(model: &dyn DataModel) -> Result<Vec<(f64, f64)>, CliError> {
    let bounds: Vec<(f64, f64)> = model.prior().marginals().iter().map(|m| m.bounds()).collect();
    if bounds.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
        return Err(CliError::Config(
            "map baselines need a bounded prior to box the search".into(),
        ));
    }
    Ok(bounds)
}

/// The spatial domain a map or pmap baseline optimises over, rebuilt from
/// the same spec fields the model itself was built from.
fn baseline_domain(eff: &Effective) -> SpatialDomain {
    let [nx, ny] = eff.config.model.grid.unwrap_or([8, 8]);
    SpatialDomain::unit_grid(nx, ny)
}

fn build_baseline(
    name: &str,
    model: &dyn DataModel,
    eff: &Effective,
) -> Result<Box<dyn Estimator>, CliError> {
    let model_id = eff.config.model.id.as_str();
    let prior = model.prior().clone();
    match name {
        "oracle" | "one_at_a_time" => {
            let closed_form = ["uniform_theta", "normal_variance", "linear_regression"];
            if !closed_form.contains(&model_id) {
                return Err(CliError::Config(format!(
                    "baseline {name} needs a closed-form estimator; {model_id} has none"
                )));
            }
            if name == "oracle" {
                Ok(Box::new(OracleEstimator::new(prior)))
            } else {
                Ok(Box::new(OneAtATimeEstimator::new(prior)))
            }
        }
        "map" => {
            let bounds = map_bounds(model)?;
            let log_prior = move |th: &[f64]| prior.log_pdf(th);
            let domain = baseline_domain(eff);
            let problem = match model_id {
                "gp" => MapProblem::new(
                    move |th: &[f64], rs: &ReplicateSet| gp_loglik_set(th, rs, &domain),
                    log_prior,
                    bounds,
                ),
                "gp_known_smoothness" => {
                    let nu = eff.config.model.nu.unwrap_or(1.0);
                    MapProblem::new(
                        move |th: &[f64], rs: &ReplicateSet| {
                            gp_loglik_set(&[th[0], th[1], nu], rs, &domain)
                        },
                        log_prior,
                        bounds,
                    )
                }
                other => {
                    return Err(CliError::Config(format!(
                        "baseline map applies to Gaussian process models, not {other}"
                    )))
                }
            }
            .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Box::new(MapEstimator::new(problem)))
        }
        "pmap" => {
            if model_id != "schlather" {
                return Err(CliError::Config(format!(
                    "baseline pmap applies to the schlather model, not {model_id}"
                )));
            }
            let bounds = map_bounds(model)?;
            let domain = baseline_domain(eff);
            let problem = MapProblem::new(
                move |th: &[f64], rs: &ReplicateSet| {
                    pairwise_loglik(th, rs, &domain, DEFAULT_CUTOFF)
                },
                move |th: &[f64]| prior.log_pdf(th),
                bounds,
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Box::new(MapEstimator::new(problem)))
        }
        other => Err(CliError::Config(format!(
            "unknown baseline {other:?}; choose from oracle, one_at_a_time, map, pmap"
        ))),
    }
}

pub fn assess(eff: &Effective, model: &dyn DataModel, args: &AssessArgs) -> Result<(), CliError> {
    let m_grid = parse_usize_list(&args.m_grid)?;
    let losses = parse_losses(&args.losses)?;

    let mut names: Vec<String> = Vec::new();
    let mut estimators: Vec<Box<dyn Estimator>> = Vec::new();
    for dir in &args.checkpoints {
        let path = eff.resolve(dir);
        let pw = PiecewiseEstimator::load(&path)
            .map_err(|e| CliError::Artifact(format!("loading {}: {e}", path.display())))?;
        if pw.n() != model.replicate_dim() || pw.p() != model.parameter_count() {
            return Err(CliError::Artifact(format!(
                "checkpoint {} maps n={} to p={}, model {} needs n={} to p={}",
                path.display(),
                pw.n(),
                pw.p(),
                model.name(),
                model.replicate_dim(),
                model.parameter_count()
            )));
        }
        let base = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "checkpoint".into());
        names.push(unique_name(base, &names));
        estimators.push(Box::new(pw));
    }
    for baseline in &args.baseline {
        names.push(unique_name(baseline.clone(), &names));
        estimators.push(build_baseline(baseline, model, eff)?);
    }

    let pairs: Vec<(&str, &dyn Estimator)> = names
        .iter()
        .map(String::as_str)
        .zip(estimators.iter().map(Box::as_ref))
        .collect();
    let report = evaluate_risk(
        &pairs,
        model,
        model.prior(),
        &m_grid,
        args.k_test,
        args.sets_per_draw,
        &losses,
        &mut RngStream::new(eff.config.seed, 2),
    )
    .map_err(assess_err)?;

    let csv = report.to_csv();
    let path = eff.reports_dir().join("risk.csv");
    write_report(&path, &csv)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(())
}

/// Loads a checkpoint and a data file and cross-checks them against the
/// configured model before any estimation.
fn load_pair(
    eff: &Effective,
    model: &dyn DataModel,
    checkpoint: &Path,
    data: &Path,
) -> Result<(PiecewiseEstimator, ReplicateSet), CliError> {
    let ckpt_path = eff.resolve(checkpoint);
    let pw = PiecewiseEstimator::load(&ckpt_path)
        .map_err(|e| CliError::Artifact(format!("loading {}: {e}", ckpt_path.display())))?;
    let data_path = eff.resolve(data);
    let rs = ReplicateSet::load(&data_path)
        .map_err(|e| CliError::Artifact(format!("loading {}: {e}", data_path.display())))?;
    if rs.n() != pw.n() {
        return Err(CliError::Artifact(format!(
            "data replicates have {} values, checkpoint reads {}",
            rs.n(),
            pw.n()
        )));
    }
    if pw.p() != model.parameter_count() {
        return Err(CliError::Artifact(format!(
            "checkpoint outputs {} parameters, model {} has {}",
            pw.p(),
            model.name(),
            model.parameter_count()
        )));
    }
    if rs.model_id() != model.model_id() {
        return Err(CliError::Artifact(format!(
            "data carries model id {}, config names {} (id {})",
            rs.model_id(),
            model.name(),
            model.model_id()
        )));
    }
    if rs.transform_tag() != model.default_transform() {
        return Err(CliError::Artifact(format!(
            "data transform {:?} does not match the model default {:?}",
            rs.transform_tag(),
            model.default_transform()
        )));
    }
    Ok((pw, rs))
}

pub fn estimate(eff: &Effective, model: &dyn DataModel, args: &EstimateArgs) -> Result<(), CliError> {
    let (pw, rs) = load_pair(eff, model, &args.checkpoint, &args.data)?;
    let start = Instant::now();
    let estimate = Estimator::estimate(&pw, &rs).map_err(assess_err)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut csv = String::from("param,estimate\n");
    for (name, value) in model.parameter_names().iter().zip(&estimate) {
        csv.push_str(&format!("{name},{value:.16e}\n"));
    }
    let path = eff.reports_dir().join("estimates.csv");
    write_report(&path, &csv)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    println!("wall time {seconds:.6} s");
    Ok(())
}

fn read_block_labels(path: &Path, m: usize) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Artifact(format!("reading {}: {e}", path.display())))?;
    let labels: Vec<usize> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<usize>()
                .map_err(|_| CliError::Config(format!("block label {l:?} is not an integer")))
        })
        .collect::<Result<_, _>>()?;
    if labels.len() != m {
        return Err(CliError::Artifact(format!(
            "{} block labels for {} replicates",
            labels.len(),
            m
        )));
    }
    Ok(labels)
}

pub fn bootstrap(eff: &Effective, model: &dyn DataModel, args: &BootstrapArgs) -> Result<(), CliError> {
    if args.resamples < 2 {
        return Err(CliError::Config(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    let levels = parse_f64_list(&args.levels)?;
    let [lo, hi] = levels[..] else {
        return Err(CliError::Config(format!(
            "levels expects two probabilities, got {}",
            levels.len()
        )));
    };
    let (pw, rs) = load_pair(eff, model, &args.checkpoint, &args.data)?;
    let labels = match &args.blocks {
        Some(path) => read_block_labels(&eff.resolve(path), rs.m())?,
        None => (0..rs.m()).collect(),
    };
    let mut rng = RngStream::new(eff.config.seed, 3);
    let pseudo = block_bootstrap(&rs, &labels, args.resamples, &mut rng).map_err(assess_err)?;
    let point = Estimator::estimate(&pw, &rs).map_err(assess_err)?;
    let start = Instant::now();
    let result = bootstrap_ci(&pw, &pseudo, (lo, hi)).map_err(assess_err)?;
    let seconds = start.elapsed().as_secs_f64();
    let names: Vec<&str> = model.parameter_names().to_vec();
    let csv = result.to_csv(&names, &point).map_err(assess_err)?;
    let path = eff.reports_dir().join("bootstrap.csv");
    write_report(&path, &csv)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    println!(
        "wall time {seconds:.6} s for {} resamples",
        result.resamples()
    );
    Ok(())
}
