mod matrix_io;
mod plot;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mimome::gsvd::{gsvd, GsvdResult};
use mimome::regimes::{high_snr_capacity, masked_mimo_gap, masked_mimo_rate};
use mimome::scaling::{
    asymptotic_sigma_max, frontier_points, min_eavesdropper_ratio, monte_carlo_sigma_max,
    optimal_allocation, zero_cap_region,
};
use mimome::secrecy_capacity::{solve_saddle, solve_saddle_with, verify_saddle};
use mimome::{CMatrix, ChannelPair, Power, SolveOptions, Tolerance};
use serde_json::json;

use matrix_io::{read_matrix, write_matrix};
use plot::Figure;
use report::{csv, num, nums, InputDigest, Report};

/// Secrecy capacity of the multi-antenna Gaussian wiretap channel.
#[derive(Parser, Debug)]
#[command(name = "mimome", version, about)]
struct Cli {
    /// Relative singular-value cutoff for numerical rank.
    #[arg(long, global = true, default_value_t = Tolerance::default().rank_rel)]
    tol_rank: f64,
    /// Absolute convergence threshold in bits.
    #[arg(long, global = true, default_value_t = Tolerance::default().conv_abs)]
    tol_conv: f64,
    /// Margin keeping the noise cross-covariance inside the unit ball.
    #[arg(long, global = true, default_value_t = Tolerance::default().psd_margin)]
    psd_margin: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for report.json and any data files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the optimal K, Phi and Theta as matrix files (needs --out).
    #[arg(long, global = true)]
    emit_covariances: bool,
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for parallel trials.
    #[arg(long, global = true, env = "MIMOME_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct ChannelArgs {
    /// Receiver channel matrix file (.json, or .csv with a+bi entries).
    #[arg(long)]
    hr: PathBuf,
    /// Eavesdropper channel matrix file.
    #[arg(long)]
    he: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the min-max problem and verify the saddle point.
    Capacity {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        power: f64,
        /// Random feasible points used to probe the saddle inequalities.
        #[arg(long, default_value_t = 64)]
        probes: usize,
        /// Cap on outer solver iterations.
        #[arg(long, default_value_t = SolveOptions::default().max_outer)]
        max_outer: usize,
    },
    /// Generalized singular value decomposition of (Hr, He).
    Gsvd {
        #[command(flatten)]
        ch: ChannelArgs,
        /// Re-verify the factorization and exit nonzero on a violation.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 1e-9)]
        check_tol: f64,
    },
    /// High-SNR capacity from the generalized singular values.
    HighSnr {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        power: f64,
    },
    /// Masked-MIMO rate, or a power sweep against the capacity.
    Masked {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long, required_unless_present = "sweep")]
        power: Option<f64>,
        /// Power range `LO..HI`, e.g. `1e2..1e6`, sampled log-uniformly.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, default_value_t = 1)]
        per_decade: usize,
    },
    /// Many-antenna scaling laws.
    Scaling {
        #[command(subcommand)]
        cmd: ScalingCommand,
    },
    /// Solve, then report optimality residuals; nonzero exit when they exceed --max-resid.
    Verify {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        power: f64,
        #[arg(long, default_value_t = 256)]
        probes: usize,
        /// Largest accepted saddle-inequality violation, in bits.
        #[arg(long, default_value_t = 1e-6)]
        max_resid: f64,
    },
}

#[derive(Subcommand, Debug)]
enum ScalingCommand {
    /// Boundary of the zero-capacity region.
    Frontier {
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Also write an SVG rendering (needs --out).
        #[arg(long)]
        svg: bool,
    },
    /// Optimal antenna allocation and the minimum eavesdropper-antenna curve.
    Allocation {
        #[arg(long, default_value_t = 299)]
        points: usize,
        #[arg(long)]
        svg: bool,
    },
    /// Monte Carlo largest generalized singular value.
    Mc {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        nr: usize,
        #[arg(long)]
        ne: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Ok,
    NotConverged,
    CheckFailed,
}

impl Outcome {
    fn worst(self, other: Outcome) -> Outcome {
        match (self, other) {
            (Outcome::CheckFailed, _) | (_, Outcome::CheckFailed) => Outcome::CheckFailed,
            (Outcome::NotConverged, _) | (_, Outcome::NotConverged) => Outcome::NotConverged,
            _ => Outcome::Ok,
        }
    }

    fn code(self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::NotConverged => 2,
            Outcome::CheckFailed => 3,
        }
    }
}

enum Artifact {
    Matrix(String, CMatrix),
    Text { name: String, body: String, primary: bool },
}

struct Run {
    report: Report,
    outcome: Outcome,
    artifacts: Vec<Artifact>,
}

impl Run {
    fn new(report: Report) -> Self {
        Run { report, outcome: Outcome::Ok, artifacts: Vec::new() }
    }

    fn fail(&mut self, o: Outcome, status: &str) {
        self.outcome = self.outcome.worst(o);
        self.report.status = status.into();
    }
}

struct Ctx {
    tol: Tolerance,
    seed: u64,
    out: Option<PathBuf>,
    emit_covariances: bool,
}

impl Ctx {
    fn report(&self, name: &str) -> Report {
        Report::new(name, self.tol, self.seed)
    }

    fn need_out(&self, what: &str) -> Result<()> {
        if self.out.is_none() {
            bail!("{what} needs --out DIR");
        }
        Ok(())
    }
}

fn load_channel(a: &ChannelArgs, report: &mut Report) -> Result<ChannelPair> {
    let (hr, hr_bytes) = read_matrix(&a.hr)?;
    let (he, he_bytes) = read_matrix(&a.he)?;
    report.inputs.push(InputDigest::new("hr", &a.hr, &hr_bytes));
    report.inputs.push(InputDigest::new("he", &a.he, &he_bytes));
    let ch = ChannelPair::new(hr, he)?;
    report.set("nt", ch.nt());
    report.set("nr", ch.nr());
    report.set("ne", ch.ne());
    Ok(ch)
}

fn cmd_capacity(ctx: &Ctx, a: &ChannelArgs, power: f64, probes: usize, max_outer: usize) -> Result<Run> {
    if ctx.emit_covariances {
        ctx.need_out("--emit-covariances")?;
    }
    let mut r = ctx.report("capacity");
    let ch = load_channel(a, &mut r)?;
    let opts = SolveOptions { max_outer, ..SolveOptions::default() };
    let sp = solve_saddle_with(&ch, Power::new(power)?, &ctx.tol, &opts)?;
    let kkt = verify_saddle(&ch, &sp, probes, ctx.seed, &ctx.tol)?;
    r.set_num("power", power);
    r.set_num("capacity_bits", sp.capacity_bits);
    r.set_num("gap_bits", sp.gap_bits);
    r.set_num("rate_plus_bits", sp.rate_plus_bits);
    r.set_num("rate_minus_bits", sp.rate_minus_bits);
    r.set_num("fw_gap_bits", sp.fw_gap_bits);
    r.set_num("degraded_resid", kkt.degraded_resid);
    r.set_num("saddle_resid_bits", kkt.saddle_resid);
    r.set("zero_cap", kkt.zero_cap);
    r.set("zero_capacity_shortcut", sp.zero_capacity_shortcut);
    r.set("converged", sp.converged);
    r.set("outer_iterations", sp.iterations);
    r.set("inner_iterations", sp.inner_iterations);
    r.set("probes", probes);
    r.set("max_outer", max_outer);
    r.unit("degraded_resid", "relative Frobenius norm");
    let mut run = Run::new(r);
    if !(sp.gap_bits <= ctx.tol.conv_abs) {
        run.fail(Outcome::NotConverged, "not_converged");
    }
    if ctx.emit_covariances {
        run.artifacts.push(Artifact::Matrix("k.json".into(), sp.k.clone()));
        run.artifacts.push(Artifact::Matrix("phi.json".into(), sp.phi.matrix().clone()));
        run.artifacts.push(Artifact::Matrix("theta.json".into(), sp.theta.clone()));
    }
    Ok(run)
}

fn unitarity_defect(u: &CMatrix) -> f64 {
    (u.adjoint() * u - CMatrix::identity(u.ncols(), u.ncols())).norm()
}

fn gsvd_violations(ch: &ChannelPair, g: &GsvdResult, tol: f64) -> Vec<String> {
    let mut v = Vec::new();
    let res = g.reconstruction_residual(ch);
    if !(res <= tol) {
        v.push(format!("reconstruction residual {res:e}"));
    }
    for (name, u) in [("psi_r", &g.psi_r), ("psi_e", &g.psi_e), ("psi_t", &g.psi_t)] {
        let d = unitarity_defect(u);
        if !(d <= tol * (u.ncols().max(1) as f64)) {
            v.push(format!("{name} unitarity defect {d:e}"));
        }
    }
    let om = &g.omega;
    let upper: f64 = (0..om.nrows())
        .flat_map(|i| (i + 1..om.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| om[(i, j)].norm_sqr())
        .sum::<f64>()
        .sqrt();
    if !(upper <= tol * om.norm().max(1.0)) {
        v.push(format!("omega upper triangle norm {upper:e}"));
    }
    if g.sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        v.push("non-positive or non-finite generalized singular value".into());
    }
    if g.sigma.windows(2).any(|w| w[0] > w[1]) {
        v.push("generalized singular values are not ascending".into());
    }
    let d = g.dims;
    if d.k > g.nt || d.p + d.s > g.nr || d.k < d.p + d.s {
        v.push(format!("inconsistent dimensions k={} p={} s={}", d.k, d.p, d.s));
    }
    v
}

fn cmd_gsvd(ctx: &Ctx, a: &ChannelArgs, check: bool, check_tol: f64) -> Result<Run> {
    let mut r = ctx.report("gsvd");
    let ch = load_channel(a, &mut r)?;
    let g = gsvd(&ch, &ctx.tol);
    r.set("sigma", nums(&g.sigma));
    r.set("dr", nums(&g.dr));
    r.set("de", nums(&g.de));
    r.set(
        "dims",
        json!({ "k": g.dims.k, "p": g.dims.p, "s": g.dims.s, "e": g.dims.e_dim(), "n": g.dims.n_dim(ch.nt()) }),
    );
    r.set_num("sigma_max", g.sigma_max());
    r.set_num("reconstruction_residual", g.reconstruction_residual(&ch));
    r.set("rank_ambiguous", g.rank_ambiguous);
    r.unit("sigma", "dimensionless");
    r.unit("reconstruction_residual", "relative Frobenius norm");
    let violations = if check { gsvd_violations(&ch, &g, check_tol) } else { Vec::new() };
    if check {
        r.set_num("check_tol", check_tol);
        r.set("violations", violations.clone());
    }
    let mut run = Run::new(r);
    if !violations.is_empty() {
        run.fail(Outcome::CheckFailed, "check_failed");
    }
    if ctx.out.is_some() {
        for (name, m) in [("psi_r", &g.psi_r), ("psi_e", &g.psi_e), ("psi_t", &g.psi_t), ("omega", &g.omega)] {
            if m.nrows() > 0 && m.ncols() > 0 {
                run.artifacts.push(Artifact::Matrix(format!("{name}.json"), m.clone()));
            }
        }
    }
    Ok(run)
}

fn cmd_high_snr(ctx: &Ctx, a: &ChannelArgs, power: f64) -> Result<Run> {
    let mut r = ctx.report("high-snr");
    let ch = load_channel(a, &mut r)?;
    let b = high_snr_capacity(&ch, Power::new(power)?, &ctx.tol);
    r.set_num("power", power);
    r.set_num("high_snr_bits", b.total_bits);
    r.set_num("c0_bits", b.c0_bits);
    r.set_num("gsv_sum_bits", b.gsv_sum_bits);
    r.set("case", format!("{:?}", b.case));
    r.set("c0_degenerate", b.c0_degenerate);
    r.set("dims", json!({ "k": b.dims.k, "p": b.dims.p, "s": b.dims.s }));
    Ok(Run::new(r))
}

fn parse_sweep(s: &str) -> Result<(f64, f64)> {
    let s = s.trim().trim_start_matches("P=");
    let (lo, hi) = s.split_once("..").ok_or_else(|| anyhow!("sweep must look like LO..HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().with_context(|| format!("sweep start {lo:?}"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("sweep end {hi:?}"))?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        bail!("sweep needs 0 < LO <= HI < inf, got {lo}..{hi}");
    }
    Ok((lo, hi))
}

fn sweep_powers(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let per = per_decade.max(1) as f64;
    let n = ((hi / lo).log10() * per + 1e-9).floor() as usize;
    (0..=n).map(|i| lo * 10f64.powf(i as f64 / per)).collect()
}

fn cmd_masked(ctx: &Ctx, a: &ChannelArgs, power: Option<f64>, sweep: Option<&str>, per_decade: usize) -> Result<Run> {
    let mut r = ctx.report("masked");
    let ch = load_channel(a, &mut r)?;
    let gap = masked_mimo_gap(&ch, &ctx.tol)?;
    r.set_num("masked_high_snr_loss_bits", gap);
    let mut outcome = Outcome::Ok;
    let mut artifacts = Vec::new();
    if let Some(p) = power {
        let m = masked_mimo_rate(&ch, Power::new(p)?, &ctx.tol)?;
        r.set_num("power", p);
        r.set_num("masked_rate_bits", m.rate_bits);
        r.set_num("cross_check_bits", m.cross_check_bits);
        r.set_num("cross_check_delta_bits", m.delta_bits);
    }
    if let Some(s) = sweep {
        let (lo, hi) = parse_sweep(s)?;
        let mut rows = Vec::new();
        for p in sweep_powers(lo, hi, per_decade) {
            let pw = Power::new(p)?;
            let sp = solve_saddle(&ch, pw, &ctx.tol)?;
            let m = masked_mimo_rate(&ch, pw, &ctx.tol)?;
            let h = high_snr_capacity(&ch, pw, &ctx.tol);
            if !(sp.gap_bits <= ctx.tol.conv_abs) {
                outcome = Outcome::NotConverged;
            }
            rows.push(vec![p, sp.capacity_bits, m.rate_bits, h.total_bits, sp.gap_bits]);
        }
        let header = ["power_linear", "capacity_bits", "masked_rate_bits", "high_snr_bits", "capacity_gap_bits"];
        r.set(
            "sweep",
            rows.iter()
                .map(|row| header.iter().zip(row).map(|(k, &x)| (k.to_string(), num(x))).collect())
                .map(serde_json::Value::Object)
                .collect::<Vec<_>>(),
        );
        artifacts.push(Artifact::Text { name: "masked_sweep.csv".into(), body: csv(&header, &rows), primary: true });
    }
    let mut run = Run::new(r);
    run.artifacts = artifacts;
    if outcome != Outcome::Ok {
        run.fail(outcome, "not_converged");
    }
    Ok(run)
}

fn cmd_frontier(ctx: &Ctx, points: usize, svg: bool) -> Result<Run> {
    if svg {
        ctx.need_out("--svg")?;
    }
    if points < 2 {
        bail!("domain error: frontier needs at least 2 points");
    }
    let mut r = ctx.report("scaling frontier");
    let pts = frontier_points(points);
    r.set("points", points);
    r.set("first", nums(&[pts[0].0, pts[0].1]));
    r.set("last", nums(&[pts[points - 1].0, pts[points - 1].1]));
    r.unit("beta", "Nt / Ne");
    r.unit("gamma", "Nr / Ne");
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(b, g)| vec![b, g]).collect();
    let mut run = Run::new(r);
    run.artifacts.push(Artifact::Text {
        name: "frontier.csv".into(),
        body: csv(&["beta_nt_per_ne", "gamma_nr_per_ne"], &rows),
        primary: true,
    });
    if svg {
        let fig = Figure {
            title: "Zero-capacity frontier",
            x_label: "beta = Nt / Ne",
            y_label: "gamma = Nr / Ne",
            points: &pts,
            marker: Some(optimal_allocation()),
        };
        run.artifacts.push(Artifact::Text { name: "frontier.svg".into(), body: fig.to_svg(), primary: false });
    }
    Ok(run)
}

fn cmd_allocation(ctx: &Ctx, points: usize, svg: bool) -> Result<Run> {
    if svg {
        ctx.need_out("--svg")?;
    }
    let mut r = ctx.report("scaling allocation");
    let (beta, gamma) = optimal_allocation();
    r.set_num("beta", beta);
    r.set_num("gamma", gamma);
    r.set_num("objective", beta + gamma);
    r.set_num("ratio_at_two_thirds", min_eavesdropper_ratio(2.0 / 3.0)?);
    r.set_num("ratio_at_half", min_eavesdropper_ratio(0.5)?);
    r.unit("beta", "Nt / Ne");
    r.unit("gamma", "Nr / Ne");
    r.unit("ratio", "Ne / (Nt + Nr)");
    let curve = (1..=points)
        .map(|i| {
            let tau = i as f64 / (points + 1) as f64;
            Ok((tau, min_eavesdropper_ratio(tau)?))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(&(t, v)) = curve.iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
        r.set_num("curve_peak_tx_fraction", t);
        r.set_num("curve_peak_ratio", v);
    }
    let rows: Vec<Vec<f64>> = curve.iter().map(|&(t, v)| vec![t, v]).collect();
    let mut run = Run::new(r);
    run.artifacts.push(Artifact::Text {
        name: "allocation.csv".into(),
        body: csv(&["tx_fraction_nt_per_total", "min_ne_per_total"], &rows),
        primary: true,
    });
    if svg {
        let fig = Figure {
            title: "Minimum eavesdropper antennas",
            x_label: "Nt / (Nt + Nr)",
            y_label: "Ne / (Nt + Nr)",
            points: &curve,
            marker: Some((2.0 / 3.0, min_eavesdropper_ratio(2.0 / 3.0)?)),
        };
        run.artifacts.push(Artifact::Text { name: "allocation.svg".into(), body: fig.to_svg(), primary: false });
    }
    Ok(run)
}

fn cmd_mc(ctx: &Ctx, nt: usize, nr: usize, ne: usize, trials: usize) -> Result<Run> {
    let mut r = ctx.report("scaling mc");
    let s = monte_carlo_sigma_max(nt, nr, ne, trials, ctx.seed, &ctx.tol)?;
    r.set("nt", s.nt);
    r.set("nr", s.nr);
    r.set("ne", s.ne);
    r.set("trials", s.trials);
    r.set("empirical_sigma_max_mean", s.empirical_sigma_max_mean.map_or(serde_json::Value::Null, num));
    r.set("empirical_sigma_max_sd", s.empirical_sigma_max_sd.map_or(serde_json::Value::Null, num));
    r.set_num("zero_cap_fraction", s.zero_cap_fraction);
    r.set_num("infinite_fraction", s.infinite_fraction);
    let (beta, gamma) = (nt as f64 / ne as f64, nr as f64 / ne as f64);
    r.set_num("beta", beta);
    r.set_num("gamma", gamma);
    if let Ok(a) = asymptotic_sigma_max(beta, gamma) {
        r.set_num("asymptotic_sigma_max", a);
    }
    r.set("in_zero_region", zero_cap_region(beta, gamma));
    Ok(Run::new(r))
}

fn cmd_verify(ctx: &Ctx, a: &ChannelArgs, power: f64, probes: usize, max_resid: f64) -> Result<Run> {
    let mut r = ctx.report("verify");
    let ch = load_channel(a, &mut r)?;
    let sp = solve_saddle(&ch, Power::new(power)?, &ctx.tol)?;
    let kkt = verify_saddle(&ch, &sp, probes, ctx.seed, &ctx.tol)?;
    r.set_num("power", power);
    r.set_num("capacity_bits", sp.capacity_bits);
    r.set_num("gap_bits", sp.gap_bits);
    r.set_num("saddle_resid_bits", kkt.saddle_resid);
    r.set_num("degraded_resid", kkt.degraded_resid);
    r.set_num("rate_gap_bits", kkt.gap_bits);
    r.set("zero_cap", kkt.zero_cap);
    r.set("probes", kkt.probes);
    r.set_num("max_resid", max_resid);
    let mut run = Run::new(r);
    if !(sp.gap_bits <= ctx.tol.conv_abs) {
        run.fail(Outcome::NotConverged, "not_converged");
    }
    if !(kkt.saddle_resid <= max_resid) {
        run.fail(Outcome::CheckFailed, "check_failed");
    }
    Ok(run)
}

fn dispatch(cli: &Cli, ctx: &Ctx) -> Result<Run> {
    match &cli.cmd {
        Command::Capacity { ch, power, probes, max_outer } => cmd_capacity(ctx, ch, *power, *probes, *max_outer),
        Command::Gsvd { ch, check, check_tol } => cmd_gsvd(ctx, ch, *check, *check_tol),
        Command::HighSnr { ch, power } => cmd_high_snr(ctx, ch, *power),
        Command::Masked { ch, power, sweep, per_decade } => {
            cmd_masked(ctx, ch, *power, sweep.as_deref(), *per_decade)
        }
        Command::Scaling { cmd } => match cmd {
            ScalingCommand::Frontier { points, svg } => cmd_frontier(ctx, *points, *svg),
            ScalingCommand::Allocation { points, svg } => cmd_allocation(ctx, *points, *svg),
            ScalingCommand::Mc { nt, nr, ne, trials } => cmd_mc(ctx, *nt, *nr, *ne, *trials),
        },
        Command::Verify { ch, power, probes, max_resid } => cmd_verify(ctx, ch, *power, *probes, *max_resid),
    }
}

fn finish(cli: &Cli, mut run: Run, started: Instant) -> Result<Outcome> {
    let mut stdout_csv = None;
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for a in &run.artifacts {
        match (a, &cli.out) {
            (Artifact::Matrix(name, m), Some(dir)) => {
                let p = dir.join(name);
                write_matrix(&p, m)?;
                run.report.files.push(p);
            }
            (Artifact::Text { name, body, .. }, Some(dir)) => {
                let p = dir.join(name);
                fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
                run.report.files.push(p);
            }
            (Artifact::Text { body, primary: true, .. }, None) => stdout_csv = Some(body.clone()),
            _ => {}
        }
    }
    run.report.wall_time_s = started.elapsed().as_secs_f64();
    if let Some(dir) = &cli.out {
        let p = dir.join("report.json");
        run.report.files.push(p);
        run.report.write(dir)?;
    }
    if cli.json {
        println!("{}", run.report.to_json());
    } else {
        print!("{}", run.report.to_text());
        if let Some(body) = stdout_csv {
            print!("\n{body}");
        }
    }
    Ok(run.outcome)
}

fn setup_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome> {
    let started = Instant::now();
    setup_threads(cli.threads)?;
    let ctx = Ctx {
        tol: Tolerance::new(cli.tol_rank, cli.tol_conv, cli.psd_margin)?,
        seed: cli.seed,
        out: cli.out.clone(),
        emit_covariances: cli.emit_covariances,
    };
    let run = dispatch(cli, &ctx)?;
    finish(cli, run, started)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => ExitCode::from(o.code()),
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "status": "error", "error": format!("{e:#}") }));
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
