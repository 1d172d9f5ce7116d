use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slepian_core::prolate::Parity;
use slepian_core::reconstruct::uniform_grid;
use slepian_core::{
    build_basis, channel_eigenvalues, default_spectrum, gsvd, run_checks, truncation_order, Experiment, GreenSamples,
    KernelSpec, SamplingGrid, Variant,
};

use crate::config::{Format, RunConfig};
use crate::svg::{Plot, Series};
use crate::table::{Cell, Table};

fn common_meta(t: &mut Table, spec: &KernelSpec) {
    t.meta("statistics", spec.statistics.to_string())
        .meta("c", spec.c)
        .meta("beta", spec.beta)
        .meta("omega_max", spec.omega_max)
        .meta("shannon_number", spec.shannon);
}

fn emit(table: &Table, cfg: &RunConfig) -> Result<()> {
    match &cfg.out {
        Some(path) => write_file(table, cfg.format, path),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(cfg.format, &mut lock)
        }
    }
}

fn write_file(table: &Table, format: Format, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    table.write(format, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn spectrum_table(cfg: &RunConfig) -> Result<Table> {
    let spec = cfg.spec()?;
    let order = truncation_order(&spec);
    let n_modes = cfg.n_modes.unwrap_or(order + 20);
    let basis = build_basis(spec.c, n_modes, Variant::Laplace)?;
    let cutoff = basis.legendre_cutoff;
    let cs = Arc::new(channel_eigenvalues(&basis)?);
    let g = gsvd(&spec, &cs)?;
    let mut rank = vec![0; cs.len()];
    for (r, &n) in cs.magnitude_order.iter().enumerate() {
        rank[n] = r;
    }
    let top = cs.mu[cs.magnitude_order[0]].abs();

    let mut t = Table::new(
        "spectrum",
        vec![
            "n",
            "chi",
            "mu",
            "magnitude_rank",
            "relative_magnitude",
            "singular_value",
            "shannon_index",
        ],
    );
    common_meta(&mut t, &spec);
    t.meta("truncation_order", order)
        .meta("legendre_cutoff", cutoff)
        .meta("n_modes", n_modes);
    for (n, mode) in cs.basis.modes().iter().enumerate() {
        t.push(vec![
            n.into(),
            mode.chi.into(),
            cs.mu[n].into(),
            rank[n].into(),
            (cs.mu[n].abs() / top).into(),
            g.triples[n].s.into(),
            (n == order).into(),
        ]);
    }
    Ok(t)
}

pub fn basis_table(cfg: &RunConfig) -> Result<Table> {
    let spec = cfg.spec()?;
    let n_modes = cfg.n_modes.unwrap_or(truncation_order(&spec) + 10);
    let basis = build_basis(spec.c, n_modes, Variant::Laplace)?;
    let mut t = Table::new("basis", vec!["n", "parity", "m", "coefficient"]);
    common_meta(&mut t, &spec);
    t.meta("legendre_cutoff", basis.legendre_cutoff)
        .meta("n_modes", n_modes);
    for (n, mode) in basis.modes().iter().enumerate() {
        let parity = match mode.parity {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        for (m, &d) in mode.coeffs.coeffs.iter().enumerate() {
            if m % 2 == n % 2 {
                t.push(vec![n.into(), parity.into(), m.into(), d.into()]);
            }
        }
    }
    Ok(t)
}

pub fn nodes_table(cfg: &RunConfig) -> Result<Table> {
    let spec = cfg.spec()?;
    let order = cfg.order.unwrap_or_else(|| truncation_order(&spec));
    let basis = build_basis(spec.c, order + 5, Variant::Laplace)?;
    let grid = SamplingGrid::build(&spec, &basis, order)?;
    let mode = &basis.modes()[order];
    let mut t = Table::new("nodes", vec!["i", "x", "tau", "weight", "residual"]);
    common_meta(&mut t, &spec);
    t.meta("order", order).meta("degree", grid.degree);
    for i in 0..grid.n {
        let x = grid.nodes[i];
        t.push(vec![
            i.into(),
            x.into(),
            grid.tau[i].into(),
            grid.weights[i].into(),
            mode.eval(x).abs().into(),
        ]);
    }
    Ok(t)
}

pub fn check_table(cfg: &RunConfig) -> Result<(Table, bool)> {
    let spec = cfg.spec()?;
    let report = run_checks(&spec)?;
    let mut t = Table::new("check", vec!["name", "measured", "tolerance", "passed"]);
    common_meta(&mut t, &spec);
    t.meta("all_passed", report.all_passed());
    for c in &report.checks {
        t.push(vec![
            c.name.as_str().into(),
            c.measured.into(),
            c.tolerance.into(),
            c.passed.into(),
        ]);
    }
    Ok((t, report.all_passed()))
}

pub fn run_simple(table: Table, cfg: &RunConfig) -> Result<()> {
    emit(&table, cfg)
}

pub fn run_check(cfg: &RunConfig) -> Result<bool> {
    let (table, ok) = check_table(cfg)?;
    emit(&table, cfg)?;
    let passed = table.rows.iter().filter(|r| r[3] == Cell::Bool(true)).count();
    eprintln!("{passed}/{} checks passed", table.rows.len());
    Ok(ok)
}

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub svg: bool,
    /// Uniform noise amplitude on the observations, relative to `max |G|`.
    pub noise: f64,
    pub n_dense: usize,
}

pub struct DemoPanels {
    pub spectrum: Table,
    pub green: Table,
    pub error: Table,
}

fn add_noise(obs: &mut GreenSamples, amplitude: f64, rng: &mut ChaCha8Rng) {
    if amplitude > 0.0 {
        for v in &mut obs.values {
            *v += amplitude * rng.gen_range(-1.0..=1.0);
        }
    }
}

pub fn demo_panels(cfg: &RunConfig, opts: &DemoOptions) -> Result<DemoPanels> {
    let spec = cfg.spec()?;
    if !(opts.noise >= 0.0 && opts.noise.is_finite()) {
        bail!("--noise must be a non-negative number");
    }
    if opts.n_dense < 2 {
        bail!("--n-dense must be at least 2");
    }
    let model = default_spectrum();
    let order = cfg.order.unwrap_or_else(|| truncation_order(&spec));
    let n_modes = cfg.n_modes.unwrap_or(40);
    let exp = Experiment::new(&spec, &model, opts.n_dense, n_modes)?;
    let peak = exp.dense.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let amplitude = opts.noise * peak;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut a = Table::new("demo-spectrum", vec!["y", "omega", "a"]);
    common_meta(&mut a, &spec);
    for y in uniform_grid(401) {
        a.push(vec![y.into(), spec.y_to_omega(y).into(), model.eval(y).into()]);
    }

    let mut b = Table::new("demo-green", vec!["kind", "x", "tau", "g"]);
    common_meta(&mut b, &spec);
    b.meta("order", order)
        .meta("n_dense", opts.n_dense)
        .meta("noise", opts.noise)
        .meta("seed", cfg.seed as usize);
    for (&x, &g) in exp.dense.xs.iter().zip(&exp.dense.values) {
        b.push(vec!["dense".into(), x.into(), spec.x_to_tau(x).into(), g.into()]);
    }

    let mut e = Table::new(
        "demo-error",
        vec![
            "m",
            "n_fit",
            "rel_error_l2",
            "rel_error_linf",
            "compression",
            "condition",
        ],
    );
    common_meta(&mut e, &spec);
    e.meta("n_dense", opts.n_dense)
        .meta("noise", opts.noise)
        .meta("seed", cfg.seed as usize);
    let last = 20.max(order + 7);
    for m in 4..=last {
        let mut obs = exp.observations(m)?;
        add_noise(&mut obs, amplitude, &mut rng);
        if m == order {
            for (&x, &g) in obs.xs.iter().zip(&obs.values) {
                b.push(vec!["node".into(), x.into(), spec.x_to_tau(x).into(), g.into()]);
            }
        }
        let (_, r) = exp.reconstruct_from(&obs)?;
        e.push(vec![
            r.m.into(),
            r.n_fit.into(),
            r.rel_error_l2.into(),
            r.rel_error_linf.into(),
            r.compression.into(),
            r.condition.into(),
        ]);
    }
    if order > last || order < 4 {
        let mut obs = exp.observations(order)?;
        add_noise(&mut obs, amplitude, &mut rng);
        for (&x, &g) in obs.xs.iter().zip(&obs.values) {
            b.push(vec!["node".into(), x.into(), spec.x_to_tau(x).into(), g.into()]);
        }
    }
    Ok(DemoPanels {
        spectrum: a,
        green: b,
        error: e,
    })
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    let i = t.columns.iter().position(|c| *c == name).expect("known column");
    t.rows
        .iter()
        .map(|r| match r[i] {
            Cell::Float(v) => v,
            Cell::Int(v) => v as f64,
            _ => f64::NAN,
        })
        .collect()
}

fn svgs(p: &DemoPanels) -> [(&'static str, String); 3] {
    let y = column(&p.spectrum, "y");
    let a = column(&p.spectrum, "a");
    let spectrum = Plot {
        title: "Spectral function",
        x_label: "y = omega / omega_max",
        y_label: "A(y)",
        log_y: false,
        series: vec![Series {
            label: "A",
            points: y.into_iter().zip(a).collect(),
            color: "black",
            markers: false,
        }],
    };

    let x = column(&p.green, "x");
    let g = column(&p.green, "g");
    let kind_col = p.green.columns.iter().position(|c| *c == "kind").expect("kind column");
    let (mut dense, mut nodes) = (Vec::new(), Vec::new());
    for (i, row) in p.green.rows.iter().enumerate() {
        if row[kind_col] == Cell::Text("node".into()) {
            nodes.push((x[i], g[i]));
        } else {
            dense.push((x[i], g[i]));
        }
    }
    let green = Plot {
        title: "Imaginary-time data",
        x_label: "x = 2 tau / beta - 1",
        y_label: "G(x)",
        log_y: true,
        series: vec![
            Series {
                label: "dense",
                points: dense,
                color: "black",
                markers: false,
            },
            Series {
                label: "nodes",
                points: nodes,
                color: "crimson",
                markers: true,
            },
        ],
    };

    let m = column(&p.error, "m");
    let err = column(&p.error, "rel_error_l2");
    let error = Plot {
        title: "Relative reconstruction error",
        x_label: "M",
        y_label: "relative l2 error",
        log_y: true,
        series: vec![Series {
            label: "l2",
            points: m.into_iter().zip(err).collect(),
            color: "navy",
            markers: true,
        }],
    };
    [
        ("panel_a_spectrum.svg", spectrum.render()),
        ("panel_b_green.svg", green.render()),
        ("panel_c_error.svg", error.render()),
    ]
}

pub fn run_demo(cfg: &RunConfig, opts: &DemoOptions) -> Result<Vec<PathBuf>> {
    let panels = demo_panels(cfg, opts)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("demo"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let ext = cfg.format.extension();
    let mut written = Vec::new();
    for (name, table) in [
        ("panel_a_spectrum", &panels.spectrum),
        ("panel_b_green", &panels.green),
        ("panel_c_error", &panels.error),
    ] {
        let path = dir.join(format!("{name}.{ext}"));
        write_file(table, cfg.format, &path)?;
        written.push(path);
    }
    if opts.svg {
        for (name, body) in svgs(&panels) {
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}
