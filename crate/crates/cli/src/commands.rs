//! Command implementations: each one computes its results, prints a short
//! console summary and emits the CSV/JSON outputs.

use serde::Serialize;

use cvteleport::gaussian::QuadraturePair;
use cvteleport::interaction::{
    apply_detection_efficiency, coupling_ratios, mode_envelopes, readout_coefficients,
    readout_moments, reconstruct_state, CouplingRatios, InteractionCoefficients, PhysicalParams,
};
use cvteleport::montecarlo::{
    run_sequence, run_teleportation_with, variance_vs_gain, window_means, FeedbackMode,
    GainScan, RunStatistics,
};
use cvteleport::qnd::{flat_pulse_fidelity, sliced_cascade, PulseShape, QndCascade};
use cvteleport::teleport::{
    average_fidelity, average_fidelity_from_moments, average_fidelity_quadrature,
    classical_benchmark, gain_for_transfer, optimize_gain, optimize_qnd_pulses_for,
    teleport_coefficients, teleported_moments, FeedbackSplit, TeleportationCoefficients,
};

use crate::config::{ConfigError, ExperimentConfig, GainSpec, WaveformSpec};
use crate::output::{emit, Cell, Table};

/// Command failure with its process exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Invalid configuration (exit 2).
    Config(ConfigError),
    /// Consistency suite failed (exit 1).
    Selfcheck(usize),
    /// Runtime failure (exit 1).
    Runtime(String),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(format!("io error: {e}"))
    }
}

impl From<cvteleport::Error> for CmdError {
    fn from(e: cvteleport::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

pub type CmdResult = Result<(), CmdError>;

/// Resolve the effective gain: an explicit transfer ratio wins, then the
/// gain spec (optimizing at the configured alphabet width when `optimal`).
fn resolve_gain(cfg: &ExperimentConfig, params: &PhysicalParams) -> Result<f64, CmdError> {
    if let Some(tr) = cfg.transfer {
        return Ok(gain_for_transfer(params, tr)?);
    }
    match cfg.gain {
        GainSpec::Fixed(g) => Ok(g),
        GainSpec::Optimal => Ok(optimize_gain(params, cfg.nbar)?.0),
    }
}

#[derive(Serialize)]
struct PulseCoeffs {
    duration_s: f64,
    kappa: f64,
    c_y: f64,
    c_q: f64,
    c_n: f64,
}

fn pulse_row(label: &str, t: f64, c: &InteractionCoefficients) -> Vec<Cell> {
    vec![label.into(), t.into(), c.kappa.into(), c.c_y.into(), c.c_q.into(), c.c_n.into()]
}

pub fn coeffs(cfg: &ExperimentConfig) -> CmdResult {
    let readout = cfg.readout_params()?;
    let teleport = cfg.teleport_params()?;
    let cr = readout_coefficients(&readout)?;
    let ct = readout_coefficients(&teleport)?;
    let coupling = coupling_ratios(cfg.z)?;

    #[derive(Serialize)]
    struct Results {
        coupling: CouplingRatios,
        coupling_ratio: f64,
        readout: PulseCoeffs,
        teleport: PulseCoeffs,
        kappa: f64,
        c_y: f64,
        c_q: f64,
        c_n: f64,
    }
    let results = Results {
        coupling,
        coupling_ratio: coupling.ratio(),
        readout: PulseCoeffs {
            duration_s: readout.pulse_duration,
            kappa: cr.kappa,
            c_y: cr.c_y,
            c_q: cr.c_q,
            c_n: cr.c_n,
        },
        teleport: PulseCoeffs {
            duration_s: teleport.pulse_duration,
            kappa: ct.kappa,
            c_y: ct.c_y,
            c_q: ct.c_q,
            c_n: ct.c_n,
        },
        // top-level copy of the readout-pulse set
        kappa: cr.kappa,
        c_y: cr.c_y,
        c_q: cr.c_q,
        c_n: cr.c_n,
    };

    let mut table = Table::new(&["pulse", "duration_s", "kappa", "c_y", "c_q", "c_n"]);
    table.push(pulse_row("readout", readout.pulse_duration, &cr));
    table.push(pulse_row("teleport", teleport.pulse_duration, &ct));
    emit("coeffs", cfg, Some(&table), &results)?;
    println!(
        "coeffs: mu/nu = {:.4}; readout pulse kappa = {:.4}, c_y = {:.4}, c_q = {:.4}, c_n = {:.4}",
        coupling.ratio(),
        cr.kappa,
        cr.c_y,
        cr.c_q,
        cr.c_n
    );
    Ok(())
}

pub fn teleport(cfg: &ExperimentConfig) -> CmdResult {
    let params = cfg.teleport_params()?;
    let g = resolve_gain(cfg, &params)?;
    let c = teleport_coefficients(&params, g);
    let input = QuadraturePair::new(cfg.input_x, cfg.input_p);
    let state = teleported_moments(input, &params, g);
    let fidelity = average_fidelity(&params, g, cfg.nbar)?;

    #[derive(Serialize)]
    struct Results {
        gain: f64,
        coefficients: TeleportationCoefficients,
        variance: f64,
        transfer: f64,
        mean_x: f64,
        mean_p: f64,
        nbar: f64,
        f_avg: f64,
        f_classical: f64,
    }
    let results = Results {
        gain: g,
        coefficients: c,
        variance: state.var_x,
        transfer: state.transfer,
        mean_x: state.mean.x,
        mean_p: state.mean.p,
        nbar: cfg.nbar,
        f_avg: fidelity,
        f_classical: classical_benchmark(cfg.nbar)?,
    };
    let mut table = Table::new(&[
        "gain", "c_b", "c_a", "c_nb", "c_na", "c_y", "c_q", "variance", "transfer", "f_avg",
    ]);
    table.push(vec![
        g.into(),
        c.c_b.into(),
        c.c_a.into(),
        c.c_nb.into(),
        c.c_na.into(),
        c.c_y.into(),
        c.c_q.into(),
        state.var_x.into(),
        state.transfer.into(),
        fidelity.into(),
    ]);
    emit("teleport", cfg, Some(&table), &results)?;
    println!(
        "teleport: gain {:.4} -> variance {:.4}, transfer {:.4}, F(nbar={}) = {:.4}",
        g, state.var_x, state.transfer, cfg.nbar, fidelity
    );
    Ok(())
}

pub fn fidelity_sweep(cfg: &ExperimentConfig) -> CmdResult {
    let params = cfg.teleport_params()?;
    #[derive(Serialize)]
    struct Row {
        nbar: f64,
        f_avg: f64,
        g_opt: f64,
        f_classical: f64,
    }
    let mut rows = Vec::new();
    for &nbar in &cfg.nbar_grid {
        let (g, f) = match cfg.gain {
            GainSpec::Optimal => optimize_gain(&params, nbar)?,
            GainSpec::Fixed(g) => (g, average_fidelity(&params, g, nbar)?),
        };
        rows.push(Row { nbar, f_avg: f, g_opt: g, f_classical: classical_benchmark(nbar)? });
    }
    let mut table = Table::new(&["nbar", "f_avg", "g_opt", "f_classical"]);
    for r in &rows {
        table.push(vec![r.nbar.into(), r.f_avg.into(), r.g_opt.into(), r.f_classical.into()]);
    }
    emit("fidelity-sweep", cfg, Some(&table), &rows)?;
    let above = rows.iter().filter(|r| r.f_avg >= r.f_classical).count();
    println!(
        "fidelity-sweep: {} points, {} at or above the classical benchmark",
        rows.len(),
        above
    );
    Ok(())
}

pub fn gain_opt(cfg: &ExperimentConfig) -> CmdResult {
    let params = cfg.teleport_params()?;
    #[derive(Serialize)]
    struct Row {
        nbar: f64,
        g_star: f64,
        f_star: f64,
        f_classical: f64,
    }
    let mut rows = Vec::new();
    for &nbar in &cfg.nbar_grid {
        let (g, f) = optimize_gain(&params, nbar)?;
        rows.push(Row { nbar, g_star: g, f_star: f, f_classical: classical_benchmark(nbar)? });
    }
    let mut table = Table::new(&["nbar", "g_star", "f_star", "f_classical"]);
    for r in &rows {
        table.push(vec![r.nbar.into(), r.g_star.into(), r.f_star.into(), r.f_classical.into()]);
    }
    emit("gain-opt", cfg, Some(&table), &rows)?;
    if let Some(r) = rows.first() {
        println!("gain-opt: nbar {} -> g* = {:.5}, F* = {:.5}", r.nbar, r.g_star, r.f_star);
    }
    Ok(())
}

pub fn qnd_opt(cfg: &ExperimentConfig) -> CmdResult {
    if cfg.gamma_extra != 0.0 {
        return Err(ConfigError {
            field: "gamma_extra".into(),
            message: format!(
                "the QND pulse-shape optimization requires the lossless regime (gamma_extra = 0), got {}",
                cfg.gamma_extra
            ),
        }
        .into());
    }
    let params = cfg.teleport_params()?;
    let coupling = params.gamma_s * params.pulse_duration * params.z * params.z;
    #[derive(Serialize)]
    struct Row {
        nbar: f64,
        exponent_b: f64,
        exponent_a: f64,
        g_star: f64,
        f_qnd: f64,
        f_flat: f64,
    }
    let mut rows = Vec::new();
    for &nbar in &cfg.nbar_grid {
        let opt = optimize_qnd_pulses_for(&params, nbar)?;
        rows.push(Row {
            nbar,
            exponent_b: opt.shape.exponent_b,
            exponent_a: opt.shape.exponent_a,
            g_star: opt.gain,
            f_qnd: opt.fidelity,
            f_flat: opt.flat_fidelity,
        });
    }
    #[derive(Serialize)]
    struct Results {
        coupling: f64,
        rows: Vec<Row>,
    }
    let mut table =
        Table::new(&["nbar", "exponent_b", "exponent_a", "g_star", "f_qnd", "f_flat"]);
    for r in &rows {
        table.push(vec![
            r.nbar.into(),
            r.exponent_b.into(),
            r.exponent_a.into(),
            r.g_star.into(),
            r.f_qnd.into(),
            r.f_flat.into(),
        ]);
    }
    let first = rows.first().map(|r| (r.nbar, r.f_qnd, r.f_flat));
    emit("qnd-opt", cfg, Some(&table), &Results { coupling, rows })?;
    if let Some((nbar, f, flat)) = first {
        println!("qnd-opt: coupling {coupling:.4}; nbar {nbar} -> F = {f:.5} (flat {flat:.5})");
    }
    Ok(())
}

pub fn mc_run(cfg: &ExperimentConfig, dump_records: bool) -> CmdResult {
    if cfg.n_runs < 2 {
        return Err(ConfigError { field: "n_runs".into(), message: "need at least 2 runs".into() }
            .into());
    }
    let params = cfg.teleport_params()?;
    let readout = cfg.readout_params()?;
    let g = resolve_gain(cfg, &params)?;
    let input = QuadraturePair::new(cfg.input_x, cfg.input_p);
    let (records, stats) = run_teleportation_with(
        &params,
        &readout,
        FeedbackMode::Rf,
        g,
        input,
        cfg.n_runs,
        cfg.seed,
        0,
    )?;
    let analytic = teleported_moments(input, &params, g);

    #[derive(Serialize)]
    struct Results {
        gain: f64,
        stats: RunStatistics,
        analytic_variance: f64,
        analytic_transfer: f64,
        analytic_mean_x: f64,
        analytic_mean_p: f64,
    }
    let results = Results {
        gain: g,
        stats,
        analytic_variance: analytic.var_x,
        analytic_transfer: analytic.transfer,
        analytic_mean_x: analytic.mean.x,
        analytic_mean_p: analytic.mean.p,
    };
    let mut table = Table::new(&[
        "n_runs", "gain", "mean_x", "mean_p", "var_x", "var_p", "stderr_var", "analytic_var",
    ]);
    table.push(vec![
        (stats.n_runs as u64).into(),
        g.into(),
        stats.mean.x.into(),
        stats.mean.p.into(),
        stats.var_x.into(),
        stats.var_p.into(),
        stats.stderr_var.into(),
        analytic.var_x.into(),
    ]);
    emit("mc-run", cfg, Some(&table), &results)?;
    if dump_records && cfg.format.wants_csv() {
        let mut rec_table = Table::new(&[
            "run", "bell_c", "bell_s", "teleported_x", "teleported_p", "verified_x", "verified_p",
        ]);
        for (i, r) in records.iter().enumerate() {
            rec_table.push(vec![
                (i as u64).into(),
                r.bell_outcome.0.into(),
                r.bell_outcome.1.into(),
                r.teleported.x.into(),
                r.teleported.p.into(),
                r.verified.x.into(),
                r.verified.p.into(),
            ]);
        }
        std::fs::create_dir_all(&cfg.out)?;
        std::fs::write(cfg.out.join("mc-run-records.csv"), rec_table.to_csv())?;
    }
    println!(
        "mc-run: {} runs at gain {:.4}: var ({:.4}, {:.4}) vs analytic {:.4}",
        stats.n_runs, g, stats.var_x, stats.var_p, analytic.var_x
    );
    Ok(())
}

/// Input set used for the variance-versus-gain scan: the vacuum, displaced
/// states of amplitude 5 at phases 0, pi/4 and pi/2, and amplitude 25.
fn scan_inputs() -> Vec<QuadraturePair> {
    let r = 0.5f64.sqrt();
    vec![
        QuadraturePair::ORIGIN,
        QuadraturePair::new(5.0, 0.0),
        QuadraturePair::new(5.0 * r, 5.0 * r),
        QuadraturePair::new(0.0, 5.0),
        QuadraturePair::new(25.0, 0.0),
    ]
}

pub fn variance_vs_gain_cmd(cfg: &ExperimentConfig) -> CmdResult {
    let params = cfg.teleport_params()?;
    let inputs = scan_inputs();
    let scan: GainScan =
        variance_vs_gain(&params, &cfg.gains_grid, &inputs, cfg.n_runs, cfg.seed)?;
    let mut table = Table::new(&[
        "gain", "input_x", "input_p", "n_runs", "mean_x", "mean_p", "var_x", "var_p", "stderr_var",
    ]);
    for (gi, &g) in scan.gains.iter().enumerate() {
        for (ii, input) in scan.input_means.iter().enumerate() {
            let s = &scan.stats[gi][ii];
            table.push(vec![
                g.into(),
                input.x.into(),
                input.p.into(),
                (s.n_runs as u64).into(),
                s.mean.x.into(),
                s.mean.p.into(),
                s.var_x.into(),
                s.var_p.into(),
                s.stderr_var.into(),
            ]);
        }
    }
    emit("variance-vs-gain", cfg, Some(&table), &scan)?;
    println!(
        "variance-vs-gain: {} gains x {} inputs ({}), fit residual {:.3e}, argmin {:.4}",
        scan.gains.len(),
        scan.input_means.len(),
        if scan.analytic { "analytic" } else { "sampled" },
        scan.fit.max_residual,
        scan.fit.argmin
    );
    Ok(())
}

pub fn sequence(cfg: &ExperimentConfig) -> CmdResult {
    let params = cfg.teleport_params()?;
    let g = resolve_gain(cfg, &params)?;
    let waveform: Vec<QuadraturePair> = match &cfg.waveform {
        WaveformSpec::Lookalike => {
            cvteleport::montecarlo::lookalike_waveform(cfg.n_cycles, cfg.amplitude, cfg.cycle_rate)
        }
        WaveformSpec::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::Runtime(format!("waveform file: {e}")))?;
            let mut points = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (x, p) = line.split_once(',').ok_or_else(|| {
                    CmdError::Runtime(format!("waveform line {}: expected `x,p`", lineno + 1))
                })?;
                let parse = |v: &str| {
                    v.trim().parse::<f64>().map_err(|_| {
                        CmdError::Runtime(format!("waveform line {}: bad number", lineno + 1))
                    })
                };
                points.push(QuadraturePair::new(parse(x)?, parse(p)?));
            }
            points
        }
    };
    let trace = run_sequence(&params, g, &waveform, cfg.cycle_rate, cfg.seed)?;
    let transfer = teleport_coefficients(&params, g).c_a;

    let in_windows = window_means(&trace.verified_input, cfg.window);
    let tele_windows = window_means(&trace.verified_teleported, cfg.window);
    #[derive(Serialize)]
    struct WindowRow {
        window: usize,
        input_x: f64,
        input_p: f64,
        teleported_x: f64,
        teleported_p: f64,
    }
    let windows: Vec<WindowRow> = in_windows
        .iter()
        .zip(&tele_windows)
        .enumerate()
        .map(|(i, (a, b))| WindowRow {
            window: i,
            input_x: a.x,
            input_p: a.p,
            teleported_x: b.x,
            teleported_p: b.p,
        })
        .collect();

    #[derive(Serialize)]
    struct Results {
        gain: f64,
        transfer: f64,
        n_cycles: usize,
        cycle_rate: f64,
        total_time_s: f64,
        window: usize,
        windows: Vec<WindowRow>,
    }
    let results = Results {
        gain: g,
        transfer,
        n_cycles: trace.len(),
        cycle_rate: cfg.cycle_rate,
        total_time_s: *trace.timestamps.last().unwrap_or(&0.0),
        window: cfg.window,
        windows,
    };

    let mut table = Table::new(&[
        "t_s", "applied_x", "applied_p", "input_x", "input_p", "teleported_x", "teleported_p",
    ]);
    for i in 0..trace.len() {
        table.push(vec![
            trace.timestamps[i].into(),
            trace.applied_waveform[i].x.into(),
            trace.applied_waveform[i].p.into(),
            trace.verified_input[i].x.into(),
            trace.verified_input[i].p.into(),
            trace.verified_teleported[i].x.into(),
            trace.verified_teleported[i].p.into(),
        ]);
    }
    emit("sequence", cfg, Some(&table), &results)?;
    println!(
        "sequence: {} cycles at {} Hz ({:.1} s), gain {:.4}, transfer {:.4}",
        trace.len(),
        cfg.cycle_rate,
        results.total_time_s,
        g,
        transfer
    );
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    println!("{} {name}: {detail}", if passed { "ok  " } else { "FAIL" });
    Check { name, passed, detail }
}

/// Dual-path consistency suite: closed forms against quadrature, analytics
/// against Monte Carlo, cascade against the sliced oracle.
pub fn selfcheck(cfg: &ExperimentConfig) -> CmdResult {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let random_params = |rng: &mut rand_chacha::ChaCha8Rng| -> PhysicalParams {
        PhysicalParams::new(
            rng.random_range(30.0..150.0),
            rng.random_range(0.0..60.0),
            rng.random_range(1.3..4.0),
            rng.random_range(1e-3..5e-3),
        )
        .expect("ranges are valid")
    };
    let mut checks: Vec<Check> = Vec::new();

    // coupling-ratio identity
    {
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let z: f64 = rng.random_range(1.000001..100.0);
            let r = coupling_ratios(z).unwrap();
            worst = worst.max((r.mu * r.mu - r.nu * r.nu - 1.0).abs());
        }
        checks.push(check("coupling-identity", worst < 1e-10, format!("max |mu^2-nu^2-1| = {worst:.2e}")));
    }

    // readout envelope normalizations: closed form vs quadrature
    {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let p = random_params(&mut rng);
            let (fy, fq, fn_) = mode_envelopes(&p).unwrap();
            worst = worst
                .max(fy.normalization_deviation())
                .max(fq.normalization_deviation())
                .max(fn_.normalization_deviation());
        }
        checks.push(check("envelope-normalizations", worst < 1e-9, format!("max rel dev = {worst:.2e}")));
    }

    // barred normalizations
    {
        let mut worst = 0.0f64;
        for _ in 0..30 {
            let p = random_params(&mut rng);
            let g: f64 = rng.random_range(0.0..2.0);
            worst = worst.max(FeedbackSplit::new(&p).normalization_deviation(g));
        }
        checks.push(check("barred-normalizations", worst < 1e-9, format!("max rel dev = {worst:.2e}")));
    }

    // reconstruction round trip through the efficiency model
    {
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let p = random_params(&mut rng);
            let c = readout_coefficients(&p).unwrap();
            if c.kappa == 0.0 {
                continue;
            }
            let mean = QuadraturePair::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let vars = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
            let eta: f64 = rng.random_range(0.2..1.0);
            let lm = readout_moments(mean, vars, &c, p.noise_multiplier).unwrap();
            let meas = apply_detection_efficiency(&lm, eta).unwrap();
            let (got_mean, got_var) = reconstruct_state(&meas, &c, p.noise_multiplier, eta).unwrap();
            worst = worst
                .max((got_mean.x - mean.x).abs() / (1.0 + mean.x.abs()))
                .max((got_mean.p - mean.p).abs() / (1.0 + mean.p.abs()))
                .max((got_var.0 - vars.0).abs() / (1.0 + vars.0))
                .max((got_var.1 - vars.1).abs() / (1.0 + vars.1));
        }
        checks.push(check("readout-reconstruction", worst < 1e-10, format!("max rel dev = {worst:.2e}")));
    }

    // closed-form average fidelity vs alphabet integration
    {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let g: f64 = rng.random_range(0.0..1.6);
            let nbar: f64 = rng.random_range(0.0..10.0);
            let s = teleported_moments(QuadraturePair::ORIGIN, &p, g);
            let closed = average_fidelity_from_moments(s.var_x, s.var_p, s.transfer, nbar).unwrap();
            let integ = average_fidelity_quadrature(s.var_x, s.var_p, s.transfer, nbar).unwrap();
            worst = worst.max((closed - integ).abs());
        }
        checks.push(check("fidelity-quadrature", worst < 1e-6, format!("max abs dev = {worst:.2e}")));
    }

    // Monte Carlo vs analytic variance
    {
        let n = 100_000;
        let readout_default = cvteleport::interaction::DEFAULT_READOUT_PULSE;
        let mut worst_sigma = 0.0f64;
        for i in 0..3 {
            let p = random_params(&mut rng);
            let g: f64 = rng.random_range(0.0..1.5);
            let readout = p.with_pulse_duration(readout_default).unwrap();
            let (_, stats) = run_teleportation_with(
                &p,
                &readout,
                FeedbackMode::Rf,
                g,
                QuadraturePair::ORIGIN,
                n,
                cfg.seed.wrapping_add(i),
                0,
            )
            .unwrap();
            let analytic = teleported_moments(QuadraturePair::ORIGIN, &p, g).var_x;
            let se = analytic * (2.0 / (n as f64 - 1.0)).sqrt();
            worst_sigma = worst_sigma
                .max((stats.var_x - analytic).abs() / se)
                .max((stats.var_p - analytic).abs() / se);
        }
        checks.push(check(
            "montecarlo-analytic",
            worst_sigma < 3.0,
            format!("max deviation = {worst_sigma:.2} sigma"),
        ));
    }

    // QND cascade vs time-sliced oracle
    {
        let coupling = 1.3797;
        let mut worst = 0.0f64;
        for (shape, g) in [
            (PulseShape::FLAT, 0.8),
            (PulseShape { exponent_b: -1.2, exponent_a: 0.3 }, 0.5),
        ] {
            let cascade = QndCascade::new(coupling, shape).unwrap();
            let sliced = sliced_cascade(coupling, shape, g, 10_000).unwrap();
            let a = cascade.coefficients(g);
            worst = worst
                .max((a.c_b - sliced.c_b).abs())
                .max((a.c_a - sliced.c_a).abs())
                .max((cascade.variance(g) - sliced.variance()).abs());
        }
        checks.push(check("qnd-sliced-oracle", worst < 5e-4, format!("max abs dev = {worst:.2e}")));
    }

    // QND flat fallback vs single-pass assembly
    {
        let z = 2.5;
        let gamma_s_t = 1.3797 / (z * z);
        let cascade = QndCascade::new(1.3797, PulseShape::FLAT).unwrap();
        let mut worst = 0.0f64;
        for nbar in [0.0, 1.0, 5.0] {
            let (g, f) = cascade.optimal_gain(nbar).unwrap();
            let reference = flat_pulse_fidelity(z, gamma_s_t, g, nbar).unwrap();
            worst = worst.max((f - reference).abs());
        }
        checks.push(check("qnd-flat-fallback", worst < 1e-9, format!("max abs dev = {worst:.2e}")));
    }

    // classical benchmark endpoints
    {
        let exact = classical_benchmark(0.0).unwrap() == 1.0
            && classical_benchmark(1.0).unwrap() == 2.0 / 3.0
            && classical_benchmark(7.0).unwrap() == 8.0 / 15.0;
        checks.push(check("benchmark-endpoints", exact, "exact rational values".into()));
    }

    let failures = checks.iter().filter(|c| !c.passed).count();
    emit("selfcheck", cfg, None, &checks)?;
    println!("selfcheck: {} checks, {} failed", checks.len(), failures);
    if failures > 0 {
        return Err(CmdError::Selfcheck(failures));
    }
    Ok(())
}
