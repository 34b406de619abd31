use std::io::Write;
use std::path::{Path, PathBuf};

use disentangle_core::gradcheck::{self, GradCheckConfig, GradCheckReport};
use disentangle_core::metrics::{self, MetricsReport, SwapResult};
use disentangle_core::numerics::BackwardFault;
use disentangle_core::synthgen::make_dataset;
use disentangle_core::trainer::train_loop;
use disentangle_core::{Dataset, DisentangleModel, Error, TrainHistory};

use crate::config::RunConfig;
use crate::{exit, CliError};

// Console output is best effort; a closed stdout must not change results.
macro_rules! say {
    ($w:expr, $($arg:tt)*) => {
        let _ = writeln!($w, $($arg)*);
    };
}

/// Exit code for a failure while reading an input file.
fn load_error(what: &str, path: &Path, e: Error) -> CliError {
    let code = match e {
        Error::Io { .. } => exit::BAD_ARGS,
        Error::SpecMismatch => exit::DATA_MISMATCH,
        _ => exit::FORMAT,
    };
    CliError::new(code, format!("{what} {}: {e}", path.display()))
}

/// Exit code for a failure while computing.
fn run_error(e: Error) -> CliError {
    let code = match e {
        Error::SpecMismatch | Error::Empty(_) => exit::DATA_MISMATCH,
        Error::Invalid { .. } | Error::IndexOutOfRange { .. } => exit::BAD_ARGS,
        Error::Io { .. } => exit::BAD_ARGS,
        _ => exit::CHECK_FAILED,
    };
    CliError::new(code, e.to_string())
}

fn write_error(path: &Path, e: Error) -> CliError {
    CliError::new(exit::BAD_ARGS, format!("cannot write {}: {e}", path.display()))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(|e| load_error("dataset", path, e))
}

pub fn load_model(path: &Path) -> Result<DisentangleModel, CliError> {
    DisentangleModel::load(path).map_err(|e| load_error("model", path, e))
}

pub fn gen_data(cfg: &RunConfig, out_path: &Path, out: &mut dyn Write) -> Result<Dataset, CliError> {
    let policy = cfg.mask_policy()?;
    let d = make_dataset(cfg.data.n_samples, policy, cfg.seed).map_err(run_error)?;
    d.save(out_path).map_err(|e| write_error(out_path, e))?;
    say!(out, "wrote {} samples to {}", d.len(), out_path.display());
    let counts = d.visibility_counts();
    for (f, c) in d.factors.iter().zip(&counts) {
        say!(out, "  {:<9} visible {c}", f.name);
    }
    Ok(d)
}

pub fn train(
    cfg: &RunConfig,
    data: &[PathBuf],
    model_out: &Path,
    history_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(DisentangleModel, TrainHistory), CliError> {
    let datasets = data.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>, _>>()?;
    let first = datasets
        .first()
        .ok_or_else(|| CliError::new(exit::BAD_ARGS, "at least one --data file is required"))?;
    if let Some(k) = datasets.iter().position(|d| d.factors != first.factors) {
        return Err(CliError::new(
            exit::DATA_MISMATCH,
            format!("{} has a different factor spec than {}", data[k].display(), data[0].display()),
        ));
    }
    if cfg.train.lambda.len() != first.n_factors() {
        return Err(CliError::new(
            exit::DATA_MISMATCH,
            format!("config has {} lambda entries, data has {} factors", cfg.train.lambda.len(), first.n_factors()),
        ));
    }
    let mut model = DisentangleModel::init(&first.factors, cfg.model.clone(), cfg.seed).map_err(run_error)?;
    let history = train_loop(&mut model, &datasets, &cfg.train).map_err(run_error)?;
    model.save(model_out).map_err(|e| write_error(model_out, e))?;
    if let Some(h) = history_out {
        history.save(h).map_err(|e| write_error(h, e))?;
    }
    say!(out, "trained {} rounds on {} dataset(s); model -> {}", history.len(), datasets.len(), model_out.display());
    if let Some(last) = history.last() {
        for (i, b) in last.factors.iter().enumerate() {
            let adv: Vec<String> = b.l_adv.iter().map(|(j, v)| format!("L_{i}{j}={v:.4}")).collect();
            let cert = b.certainty.map(|c| format!(" certainty={c:.4}")).unwrap_or_default();
            say!(out, "  factor {i}: L_rec={:.4} {}{cert}", b.l_rec, adv.join(" "));
        }
    }
    Ok((model, history))
}

pub fn eval(
    cfg: &RunConfig,
    model_path: &Path,
    train_path: &Path,
    test_path: &Path,
    report_out: &Path,
    out: &mut dyn Write,
) -> Result<MetricsReport, CliError> {
    let model = load_model(model_path)?;
    let train = load_dataset(train_path)?;
    let test = load_dataset(test_path)?;
    for (d, p) in [(&train, train_path), (&test, test_path)] {
        if d.factors != model.factors {
            return Err(CliError::new(
                exit::DATA_MISMATCH,
                format!("{} does not match the model's factor spec", p.display()),
            ));
        }
    }
    let report = metrics::evaluate(&model, &train, &test, &cfg.eval, cfg.echo(), cfg.seed).map_err(run_error)?;
    report.emit(report_out).map_err(|e| write_error(report_out, e))?;
    print_report(&model, &report, out);
    Ok(report)
}

fn print_report(model: &DisentangleModel, r: &MetricsReport, out: &mut dyn Write) {
    let names: Vec<&str> = model.factors.iter().map(|f| f.name.as_str()).collect();
    say!(out, "probe accuracy (row: latent, column: factor)");
    say!(out, "{:>10} {}", "", names.iter().map(|n| format!("{n:>9}")).collect::<String>());
    for (i, row) in r.probe_matrix.0.iter().enumerate() {
        say!(out, "{:>10} {}", format!("z_{}", names[i]), row.iter().map(|v| format!("{v:>9.3}")).collect::<String>());
    }
    say!(out, "chance   {:?}", r.chance.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    for (i, name) in names.iter().enumerate() {
        say!(
            out,
            "{name:<9} leakage {:+.3}  recon L1 {:.4}  swap swapped {:.3} carried {:.3} all {:.3}",
            r.leakage[i],
            r.recon_l1[i],
            r.swap_swapped[i],
            r.swap_carried[i],
            r.swap_agreement[&format!("factor_{i}")].as_f64().unwrap_or(f64::NAN)
        );
    }
}

pub fn swap(
    model_path: &Path,
    data_path: &Path,
    factor: usize,
    a: usize,
    b: usize,
    dump: Option<&Path>,
    out: &mut dyn Write,
) -> Result<SwapResult, CliError> {
    let model = load_model(model_path)?;
    let data = load_dataset(data_path)?;
    if data.factors != model.factors {
        return Err(CliError::new(exit::DATA_MISMATCH, "dataset does not match the model's factor spec"));
    }
    if factor >= model.n_factors() {
        return Err(CliError::new(
            exit::BAD_ARGS,
            format!("--factor {factor} out of range (model has {} factors)", model.n_factors()),
        ));
    }
    for (flag, idx) in [("--a", a), ("--b", b)] {
        if idx >= data.len() {
            return Err(CliError::new(
                exit::BAD_ARGS,
                format!("{flag} {idx} out of range (dataset has {} samples)", data.len()),
            ));
        }
    }
    let (sa, sb) = (&data.samples[a], &data.samples[b]);
    let r = metrics::swap_synthesis(&model, factor, sa, sb).map_err(run_error)?;
    say!(out, "source a[{a}] labels {:?}", sa.labels.classes());
    say!(out, "target b[{b}] labels {:?}", sb.labels.classes());
    say!(out, "{:<9} {:>8} {:>8} {:>6}", "factor", "expected", "oracle", "agree");
    for (j, f) in model.factors.iter().enumerate() {
        let tag = if j == factor { " (swapped)" } else { "" };
        say!(
            out,
            "{:<9} {:>8} {:>8} {:>6}{tag}",
            f.name,
            r.expected.class(j),
            r.oracle.class(j),
            r.factor_agrees(j)
        );
    }
    say!(out, "all factors agree: {}", r.agrees());
    if let Some(p) = dump {
        let v = serde_json::json!({
            "factor": factor,
            "a": a,
            "b": b,
            "expected": r.expected.classes(),
            "oracle": r.oracle.classes(),
            "features": r.x_hat,
        });
        std::fs::write(p, serde_json::to_string(&v).expect("plain data") + "\n")
            .map_err(|e| CliError::new(exit::BAD_ARGS, format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(r)
}

pub fn grad_check(seed: u64, fault: Option<BackwardFault>, out: &mut dyn Write) -> Result<GradCheckReport, CliError> {
    let cfg = GradCheckConfig {
        seed,
        fault,
        ..GradCheckConfig::default()
    };
    let report = gradcheck::grad_check(&cfg).map_err(run_error)?;
    for f in &report.families {
        say!(
            out,
            "{:<10} checked {:>3}  redrawn {:>2}  max rel error {:.3e}  at {}  {}",
            f.family,
            f.checked,
            f.redrawn,
            f.worst_rel_error,
            f.worst_param,
            if f.passed { "ok" } else { "FAIL" }
        );
    }
    let worst = report
        .families
        .iter()
        .max_by(|x, y| x.worst_rel_error.total_cmp(&y.worst_rel_error))
        .expect("four families");
    say!(out, "max relative error {:.3e} (tolerance {:.0e})", worst.worst_rel_error, cfg.tolerance);
    if report.passed() {
        Ok(report)
    } else {
        let bad = report.families.iter().find(|f| !f.passed).expect("some family failed");
        Err(CliError::new(
            exit::CHECK_FAILED,
            format!(
                "gradient check failed: {} family, worst slot {} (rel error {:.3e})",
                bad.family, bad.worst_param, bad.worst_rel_error
            ),
        ))
    }
}
