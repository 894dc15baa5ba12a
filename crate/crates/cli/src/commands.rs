//! Subcommand implementations. Every command writes its artifacts and a
//! `report.txt` into the output directory and echoes the report to stdout.

use crate::config::{config_err, JobConfig, ReportFormat};
use anyhow::Context;
use canon_core::acceptance;
use canon_core::factor::{factor_via_transform_with, FactorOptions};
use canon_core::inverse::inverse_spectral_report;
use canon_core::io::{
    read_file, read_halfline, read_hamiltonian, write_file, write_halfline, write_hamiltonian,
    write_matrix, write_samples, write_weight, Report,
};
use canon_core::spectral::{szego_k_hamiltonian, weyl_function_with};
use canon_core::{
    a2_classical, a2_ell1, decompose_l1_l2, f_mu_apply, herglotz_b_residual, isometry_residual,
    j_energy_residual, norm_l1_plus_l2, spectral_density, szego_k, transfer_matrix, DensityOptions,
    HalfLineFunction, Hamiltonian, SampledWeight, TimeFunction, WeylOptions, C64,
};
use std::path::{Path, PathBuf};

/// Parses `re,im` or `re`.
pub fn parse_complex(s: &str) -> anyhow::Result<C64> {
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| config_err(format!("`{s}` is not a complex number re,im")))
    };
    match s.split_once(',') {
        Some((re, im)) => Ok(C64::new(num(re)?, num(im)?)),
        None => Ok(C64::new(num(s)?, 0.0)),
    }
}

pub struct Job {
    pub cfg: JobConfig,
}

impl Job {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output.join(name)
    }

    fn prepare(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.cfg.output)
            .map_err(canon_core::Error::from)
            .with_context(|| format!("creating {}", self.cfg.output.display()))
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.out(name);
        write_file(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `report.txt` and returns the text for stdout.
    fn finish(&self, mut report: Report) -> anyhow::Result<String> {
        let mut head = Report::new();
        head.push("command", &self.cfg.command);
        head.entries.append(&mut report.entries);
        let text = match self.cfg.format {
            ReportFormat::Kv => head.to_string(),
            ReportFormat::Tsv => {
                let keys: Vec<&str> = head.entries.iter().map(|(k, _)| k.as_str()).collect();
                let vals: Vec<&str> = head.entries.iter().map(|(_, v)| v.as_str()).collect();
                format!("{}\n{}\n", keys.join("\t"), vals.join("\t"))
            }
        };
        self.write("report.txt", &text)?;
        Ok(text)
    }
}

fn load_hamiltonian(path: &Path) -> anyhow::Result<Hamiltonian> {
    read_hamiltonian(&read_file(path)?).with_context(|| format!("reading {}", path.display()))
}

fn load_halfline(path: &Path) -> anyhow::Result<HalfLineFunction> {
    read_halfline(&read_file(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Evaluation points from repeated `--z`; defaults to `i`.
fn points(zs: &[String]) -> anyhow::Result<Vec<C64>> {
    if zs.is_empty() {
        return Ok(vec![C64::new(0.0, 1.0)]);
    }
    zs.iter().map(|s| parse_complex(s)).collect()
}

/// Density of the spectral measure of a Hamiltonian on `points` nodes in `[-x_max, x_max]`.
pub fn forward(job: &Job, hamiltonian: &Path, x_max: f64, count: usize) -> anyhow::Result<String> {
    if count < 2 || !(x_max > 0.0) {
        return Err(config_err("forward needs --points >= 2 and --x-max > 0"));
    }
    let h = load_hamiltonian(hamiltonian)?;
    job.prepare()?;
    let xs: Vec<f64> = (0..count)
        .map(|i| -x_max + 2.0 * x_max * i as f64 / (count - 1) as f64)
        .collect();
    let ds = xs
        .iter()
        .map(|&x| spectral_density(&h, x, job.cfg.eps_density))
        .collect::<Result<Vec<_>, _>>()?;
    job.write(
        "density.txt",
        &write_weight(&SampledWeight::new(xs, ds.clone())?),
    )?;
    let z = C64::new(0.0, 1.0);
    let end = transfer_matrix(&h, h.end(), z)?;
    let mut r = Report::new();
    r.push("cells", h.grid().cells())
        .push("end", h.end())
        .push("unimodular", h.is_unimodular())
        .push("points", count)
        .push("eps_density", job.cfg.eps_density)
        .push(
            "density_min",
            ds.iter().cloned().fold(f64::INFINITY, f64::min),
        )
        .push("density_max", ds.iter().cloned().fold(0.0, f64::max))
        .push("transfer_det_error", (end.det() - 1.0).norm())
        .push("j_energy_residual", j_energy_residual(&h, h.end(), z)?)
        .push("herglotz_b_residual", herglotz_b_residual(&h, 1e4)?);
    job.finish(r)
}

pub fn weyl(job: &Job, hamiltonian: &Path, zs: &[String], held: bool) -> anyhow::Result<String> {
    let h = load_hamiltonian(hamiltonian)?;
    let zs = points(zs)?;
    job.prepare()?;
    let mut opts = WeylOptions::with_tol(job.cfg.tol_weyl);
    if held {
        opts = opts.held();
    }
    let mut rows = Vec::with_capacity(zs.len());
    let mut worst = 0.0f64;
    for &z in &zs {
        let v = weyl_function_with(&h, z, &opts)?;
        worst = worst.max(v.diameter);
        rows.push((z, v.m));
    }
    job.write("weyl.txt", &write_samples(&rows))?;
    let mut r = Report::new();
    r.push("points", zs.len())
        .push("tol_weyl", job.cfg.tol_weyl)
        .push("tail_held", held)
        .push("max_disk_diameter", worst);
    job.finish(r)
}

pub fn szego(job: &Job, zs: &[String], hamiltonian: Option<&Path>) -> anyhow::Result<String> {
    let zs = points(zs)?;
    let values: Vec<f64> = match hamiltonian {
        Some(p) => {
            let h = load_hamiltonian(p)?;
            let opts = DensityOptions::default();
            zs.iter()
                .map(|&z| szego_k_hamiltonian(&h, z, &opts))
                .collect::<Result<_, _>>()?
        }
        None => {
            let mu = job.cfg.measure()?;
            zs.iter()
                .map(|&z| szego_k(&mu, z))
                .collect::<Result<_, _>>()?
        }
    };
    job.prepare()?;
    let rows: Vec<(C64, C64)> = zs
        .iter()
        .zip(&values)
        .map(|(&z, &k)| (z, C64::new(k, 0.0)))
        .collect();
    job.write("szego.txt", &write_samples(&rows))?;
    let mut r = Report::new();
    r.push("points", zs.len())
        .push(
            "source",
            if hamiltonian.is_some() {
                "hamiltonian"
            } else {
                "weight"
            },
        )
        .push(
            "k_min",
            values.iter().cloned().fold(f64::INFINITY, f64::min),
        )
        .push(
            "k_max",
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
    job.finish(r)
}

pub fn a2(job: &Job, function: &Path, levels: u32) -> anyhow::Result<String> {
    let f = load_halfline(function)?;
    job.prepare()?;
    let mut r = Report::new();
    r.push("levels", levels)
        .push("a2_classical", a2_classical(&f, levels)?)
        .push("a2_ell1", a2_ell1(&f)?);
    job.finish(r)
}

pub fn decompose(job: &Job, function: &Path) -> anyhow::Result<String> {
    let f = load_halfline(function)?;
    let (f1, f2) = decompose_l1_l2(&f)?;
    job.prepare()?;
    job.write("f1.txt", &write_halfline(&f1))?;
    job.write("f2.txt", &write_halfline(&f2))?;
    let exact = f
        .values()
        .iter()
        .zip(f1.values())
        .zip(f2.values())
        .all(|((&v, &a), &b)| a + b == v);
    let mut r = Report::new();
    r.push("norm_l1_plus_l2", norm_l1_plus_l2(&f)?)
        .push("l1_norm_f1", f1.l1_norm())
        .push("l2_norm_f2", f2.l2_norm())
        .push("exact", exact);
    job.finish(r)
}

pub fn invert(job: &Job) -> anyhow::Result<String> {
    let mu = job.cfg.measure()?;
    let (h, rep) = inverse_spectral_report(&mu, job.cfg.r, job.cfg.n)?;
    job.prepare()?;
    job.write("hamiltonian.txt", &write_hamiltonian(&h))?;
    let mut r = Report::new();
    r.push("r", job.cfg.r)
        .push("n", job.cfg.n)
        .push("h", job.cfg.h)
        .push("cond_estimate", rep.cond_estimate)
        .push("ill_conditioned", rep.ill_conditioned)
        .push("min_a", rep.min_a)
        .push("max_a", rep.max_a);
    job.finish(r)
}

pub fn transform(
    job: &Job,
    hamiltonian: &Path,
    function: &Path,
    zs: &[String],
) -> anyhow::Result<String> {
    let h = load_hamiltonian(hamiltonian)?;
    let f = load_halfline(function)?;
    if f.tail().is_some_and(|t| t != 0.0) {
        return Err(canon_core::Error::Domain(
            "transform needs a compactly supported function (tail 0)".into(),
        )
        .into());
    }
    let tf = TimeFunction::piecewise(f.grid().clone(), f.values().to_vec())?;
    let zs = points(zs)?;
    let values = f_mu_apply(&h, &tf, &zs)?;
    job.prepare()?;
    let rows: Vec<(C64, C64)> = zs.iter().copied().zip(values).collect();
    job.write("transform.txt", &write_samples(&rows))?;
    let mut r = Report::new();
    r.push("points", zs.len()).push("norm_sq", tf.norm_sq(&h)?);
    if job.cfg.weight.is_some() {
        let mu = job.cfg.measure()?;
        r.push("x_truncation", job.cfg.x_truncation).push(
            "isometry_residual",
            isometry_residual(&h, &mu, &tf, 2.0 * h.end(), job.cfg.x_truncation)?,
        );
    }
    job.finish(r)
}

pub fn factorize(job: &Job, oversample: usize) -> anyhow::Result<String> {
    let mu = job.cfg.measure()?;
    let opts = FactorOptions {
        x_max: job.cfg.x_truncation,
        oversample,
        ..Default::default()
    };
    let fac = factor_via_transform_with(&mu, job.cfg.r, job.cfg.n, opts)?;
    job.prepare()?;
    job.write("A.csv", &write_matrix(&fac.a))?;
    job.write("L.csv", &write_matrix(&fac.l))?;
    let rep = &fac.report;
    let mut r = Report::new();
    r.push("r", job.cfg.r)
        .push("n", job.cfg.n)
        .push("h", job.cfg.h)
        .push("x_truncation", job.cfg.x_truncation)
        .push("residual", rep.residual)
        .push("leakage", rep.leakage)
        .push("discarded_lower", rep.discarded_lower)
        .push("cond", rep.cond)
        .push("cholesky_distance", rep.cholesky_distance)
        .push("orthogonality_defect", rep.orthogonality_defect)
        .push("min_diagonal", rep.min_diagonal)
        .push("eigen_min", rep.eigen_bounds.0)
        .push("eigen_max", rep.eigen_bounds.1)
        .push("symbol_min", rep.symbol_bounds.0)
        .push("symbol_max", rep.symbol_bounds.1);
    job.finish(r)
}

/// Runs acceptance criteria; returns the report text and whether all passed.
pub fn verify(job: &Job, ids: &[usize]) -> anyhow::Result<(String, bool)> {
    let ids: Vec<usize> = if ids.is_empty() {
        (1..=acceptance::NAMES.len()).collect()
    } else {
        ids.to_vec()
    };
    if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > acceptance::NAMES.len()) {
        return Err(config_err(format!(
            "no criterion {bad} (1..={})",
            acceptance::NAMES.len()
        )));
    }
    job.prepare()?;
    let mut r = Report::new();
    let mut all = true;
    for id in ids {
        let o = acceptance::run(id, job.cfg.seed);
        eprintln!("{o}");
        all &= o.passed;
        r.push(
            &format!("criterion_{id}"),
            if o.passed { "pass" } else { "fail" },
        );
        r.push(
            &format!("criterion_{id}_detail"),
            o.detail.replace('\n', " "),
        );
    }
    r.push("seed", job.cfg.seed).push("all_passed", all);
    Ok((job.finish(r)?, all))
}
