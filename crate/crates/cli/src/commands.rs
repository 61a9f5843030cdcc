//! Subcommand implementations.

use crate::args::{AnalyzeArgs, DilemmaArgs, GrowthArgs, SimulateArgs, SweepArgs};
use crate::config::{
    load_file, model_err, parse_composition_str, parse_strategy_str, resolve, FileConfig,
    Resolved, SectionView,
};
use crate::csvio::Table;
use crate::CliError;
use bribemine_core::*;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

fn load(common: &crate::args::CommonArgs) -> Result<FileConfig, CliError> {
    match &common.config {
        Some(p) => load_file(p),
        None => Ok(FileConfig::default()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Numerical(format!("stdout: {e}")))
        }
    }
}

fn model_rewards(
    r: &Resolved,
    decision: Decision,
) -> Result<bssm::RewardOutcome, CliError> {
    let out = match r.model {
        MiningModel::Bssm => bssm::rewards(&r.params, decision, &r.options),
        MiningModel::Bsm => bsm::rewards(&r.params, decision, &r.options),
    };
    out.map_err(model_err)
}

fn model_threshold(r: &Resolved) -> Result<f64, CliError> {
    let out = match r.model {
        MiningModel::Bssm => bssm::epsilon_threshold(&r.params, &r.options),
        MiningModel::Bsm => bsm::epsilon_threshold(&r.params, &r.options),
    };
    out.map_err(model_err)
}

fn params_line(p: &StrategyParams) -> String {
    let betas: Vec<String> = p.betas.iter().map(|b| b.to_string()).collect();
    format!(
        "params: alpha={} rho={} gamma={} epsilon={} betas=[{}]",
        p.alpha,
        p.rho,
        p.gamma,
        p.epsilon,
        betas.join(",")
    )
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let file = load(&args.common)?;
    let section = SectionView {
        model: file.analyze.model.as_deref(),
        method: file.analyze.method.as_deref(),
        depth: file.analyze.depth,
        tol: file.analyze.tol,
    };
    let r = resolve(&args.common, &file, section, None)?;
    let acc = model_rewards(&r, Decision::Accept)?;
    let den = model_rewards(&r, Decision::Deny)?;
    let eps_star = model_threshold(&r)?;
    let growth = chain_growth_rates(&r.params).map_err(model_err)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "model: {}  method: {}  depth: {}  tol: {:e}",
        r.model, r.options.method, r.options.depth, r.options.tol
    );
    let _ = writeln!(s, "{}", params_line(&r.params));
    let _ = writeln!(s);

    match r.model {
        MiningModel::Bssm => {
            for d in [Decision::Accept, Decision::Deny] {
                let w = bssm::winning_probs(&r.params, d, r.options.method).map_err(model_err)?;
                let _ = writeln!(
                    s,
                    "winning probs ({d}): p_private={:.9} p_public={:.9} p0o={:.9} p0b={:.9} p0a={:.9}",
                    w.p_private, w.p_public, w.p0o, w.p0b, w.p0a
                );
            }
        }
        MiningModel::Bsm => {
            for d in [Decision::Accept, Decision::Deny] {
                let w = bsm::winning_probs(&r.params, d, r.options.method).map_err(model_err)?;
                let _ = writeln!(
                    s,
                    "winning probs ({d}): p_private={:.9} p_public={:.9} p0o={:.9} p0b={:.9}",
                    w.p_private, w.p_public, w.p0o, w.p0b
                );
            }
        }
    }
    let _ = writeln!(
        s,
        "stationary: residual={:.3e} reward_tail_bound={:.3e}",
        acc.residual.max(den.residual),
        acc.tail_bound
    );
    let _ = writeln!(s);

    let actors = actor_names(&r.params);
    let _ = writeln!(s, "rewards per event (coinbase = 1):");
    let _ = writeln!(s, "{:<12} {:>14} {:>14}", "component", "accept", "deny");
    let acc_v = flat(&acc.rewards);
    let den_v = flat(&den.rewards);
    for (i, name) in actors.iter().enumerate() {
        let _ = writeln!(s, "{:<12} {:>14.9} {:>14.9}", name, acc_v[i], den_v[i]);
    }
    let _ = writeln!(
        s,
        "{:<12} {:>14.9} {:>14.9}",
        "bribe", acc.rewards.bribe_paid, den.rewards.bribe_paid
    );
    let _ = writeln!(
        s,
        "{:<12} {:>14.9} {:>14.9}",
        "total",
        acc.rewards.total(),
        den.rewards.total()
    );
    let _ = writeln!(
        s,
        "{:<12} {:>14.9} {:>14.9}",
        "pre-bribe-a", acc.adversary_pre_bribe, den.adversary_pre_bribe
    );
    let _ = writeln!(s);

    let sh_acc = normalize_relative(&acc.rewards).map_err(model_err)?;
    let sh_den = normalize_relative(&den.rewards).map_err(model_err)?;
    let _ = writeln!(s, "normalized shares:");
    for (i, name) in actors.iter().enumerate() {
        let _ = writeln!(s, "{:<12} {:>14.9} {:>14.9}", name, sh_acc[i], sh_den[i]);
    }
    let _ = writeln!(s);

    let beta = r.params.beta_total();
    let _ = writeln!(s, "metrics:");
    let _ = writeln!(s, "eps_star                  {eps_star:.9}");
    let _ = writeln!(
        s,
        "rer_a_accept_vs_deny      {:.9}",
        rer(sh_acc[0], sh_den[0]).map_err(model_err)?
    );
    let _ = writeln!(
        s,
        "rer_a_accept_vs_honest    {:.9}",
        rer(sh_acc[0], r.params.alpha).map_err(model_err)?
    );
    if beta > 0.0 {
        let _ = writeln!(
            s,
            "rer_b_accept_vs_deny      {:.9}",
            rer(sh_acc[2], sh_den[2]).map_err(model_err)?
        );
        let _ = writeln!(
            s,
            "rer_b_accept_vs_honest    {:.9}",
            rer(sh_acc[2], beta).map_err(model_err)?
        );
        let _ = writeln!(
            s,
            "rer_b_deny_vs_honest      {:.9}",
            rer(sh_den[2], beta).map_err(model_err)?
        );
    }
    let _ = writeln!(
        s,
        "growth: gr_sm={} gr_ssm={} gr_bssm={}",
        growth.gr_sm, growth.gr_ssm, growth.gr_bssm
    );
    emit(args.common.out.as_deref(), &s)
}

fn actor_names(p: &StrategyParams) -> Vec<String> {
    let mut v = vec!["adversary".to_string(), "other".to_string()];
    for i in 0..p.n_targets() {
        v.push(format!("target{}", i + 1));
    }
    v
}

fn flat(rv: &RewardVector) -> Vec<f64> {
    let mut v = vec![rv.reward_adversary, rv.reward_other];
    v.extend(&rv.reward_targets);
    v
}

/// One sweep axis.
#[derive(Debug, Clone)]
struct Axis {
    name: String,
    values: Vec<f64>,
}

fn parse_axis(spec: &str) -> Result<Axis, CliError> {
    let (name, rest) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("axis '{spec}' is not name=start:stop:steps")))?;
    let name = name.trim().to_ascii_lowercase();
    if !["alpha", "rho", "gamma", "epsilon", "beta"].contains(&name.as_str()) {
        return Err(CliError::Config(format!(
            "unknown sweep axis '{name}' (alpha|rho|gamma|epsilon|beta)"
        )));
    }
    let parts: Vec<&str> = rest.split(':').collect();
    let values = match parts.as_slice() {
        [single] => vec![single
            .parse::<f64>()
            .map_err(|e| CliError::Config(format!("axis '{spec}': {e}")))?],
        [start, stop, steps] => {
            let a: f64 = start
                .parse()
                .map_err(|e| CliError::Config(format!("axis '{spec}': {e}")))?;
            let b: f64 = stop
                .parse()
                .map_err(|e| CliError::Config(format!("axis '{spec}': {e}")))?;
            let n: usize = steps
                .parse()
                .map_err(|e| CliError::Config(format!("axis '{spec}': {e}")))?;
            if n == 0 {
                return Err(CliError::Config(format!("axis '{spec}': steps must be >= 1")));
            }
            if n == 1 {
                vec![a]
            } else {
                (0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
        _ => {
            return Err(CliError::Config(format!(
                "axis '{spec}' is not name=start:stop:steps"
            )))
        }
    };
    Ok(Axis { name, values })
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut file = load(&args.common)?;
    let axis_specs: Vec<String> = if !args.axes.is_empty() {
        args.axes.clone()
    } else {
        file.sweep.axes.clone().unwrap_or_default()
    };
    if axis_specs.is_empty() || axis_specs.len() > 3 {
        return Err(CliError::Config(
            "sweep needs 1 to 3 --sweep axes (name=start:stop:steps)".into(),
        ));
    }
    let axes: Vec<Axis> = axis_specs
        .iter()
        .map(|s| parse_axis(s))
        .collect::<Result<_, _>>()?;

    // Swept parameters need no base value; the grid supplies every cell.
    for a in &axes {
        match a.name.as_str() {
            "alpha" if args.common.alpha.is_none() && file.params.alpha.is_none() => {
                file.params.alpha = Some(0.25);
            }
            "beta" if args.common.beta.is_none() && file.params.betas.is_none() => {
                file.params.betas = Some(vec![0.1]);
            }
            _ => {}
        }
    }

    let section = SectionView {
        model: file.sweep.model.as_deref(),
        method: file.sweep.method.as_deref(),
        depth: file.sweep.depth,
        tol: file.sweep.tol,
    };
    let r = resolve(&args.common, &file, section, None)?;
    for a in &axes {
        if r.fixed_by_flag.contains(&a.name.as_str()) {
            return Err(CliError::Config(format!(
                "axis '{}' is also fixed by a command-line flag",
                a.name
            )));
        }
    }
    let mut names: Vec<&str> = axes.iter().map(|a| a.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != axes.len() {
        return Err(CliError::Config("duplicate sweep axes".into()));
    }

    let mut columns: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    columns.extend(
        [
            "ra_accept",
            "ro_accept",
            "rb_accept",
            "ra_deny",
            "ro_deny",
            "rb_deny",
            "share_a_accept",
            "share_b_accept",
            "share_a_deny",
            "share_b_deny",
            "rer_a_accept_vs_deny",
            "rer_o_accept_vs_deny",
            "rer_b_accept_vs_deny",
            "rer_a_accept_vs_honest",
            "rer_b_accept_vs_honest",
            "rer_a_deny_vs_honest",
            "rer_b_deny_vs_honest",
            "eps_star",
            "gr_sm",
            "gr_ssm",
            "gr_bssm",
            "tail_bound",
        ]
        .map(String::from),
    );

    // Materialize the grid in lexicographic axis order and validate upfront:
    // the result may not have holes.
    let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(combos.len() * axis.values.len());
        for prefix in &combos {
            for v in &axis.values {
                let mut row = prefix.clone();
                row.push(*v);
                next.push(row);
            }
        }
        combos = next;
    }
    let apply = |base: &StrategyParams, combo: &[f64]| -> Result<StrategyParams, CliError> {
        let mut q = base.clone();
        for (axis, v) in axes.iter().zip(combo) {
            match axis.name.as_str() {
                "alpha" => q.alpha = *v,
                "rho" => q.rho = *v,
                "gamma" => q.gamma = *v,
                "epsilon" => q.epsilon = *v,
                "beta" => q.betas = vec![*v],
                _ => unreachable!(),
            }
        }
        q.validate().map_err(|e| {
            CliError::Config(format!("sweep cell {:?} invalid: {e}", combo))
        })?;
        Ok(q)
    };
    let mut bases = Vec::with_capacity(combos.len());
    for combo in &combos {
        bases.push(apply(&r.params, combo)?);
    }
    if bases.iter().any(|p| p.n_targets() == 0) {
        return Err(CliError::Config(
            "sweep needs a target: give --beta or a beta axis".into(),
        ));
    }

    let mut rows = Vec::with_capacity(bases.len());
    for (combo, p) in combos.iter().zip(&bases) {
        let rr = Resolved {
            params: p.clone(),
            ..r.clone()
        };
        let acc = model_rewards(&rr, Decision::Accept)?;
        let den = model_rewards(&rr, Decision::Deny)?;
        let eps_star = model_threshold(&rr)?;
        let g = chain_growth_rates(p).map_err(model_err)?;
        let sa = normalize_relative(&acc.rewards).map_err(model_err)?;
        let sd = normalize_relative(&den.rewards).map_err(model_err)?;
        let beta = p.beta_total();
        let mut row = combo.clone();
        row.extend_from_slice(&[
            acc.rewards.reward_adversary,
            acc.rewards.reward_other,
            acc.rewards.reward_target_total(),
            den.rewards.reward_adversary,
            den.rewards.reward_other,
            den.rewards.reward_target_total(),
            sa[0],
            sa[2],
            sd[0],
            sd[2],
            (sa[0] - sd[0]) / sd[0],
            (sa[1] - sd[1]) / sd[1],
            (sa[2] - sd[2]) / sd[2],
            (sa[0] - p.alpha) / p.alpha,
            (sa[2] - beta) / beta,
            (sd[0] - p.alpha) / p.alpha,
            (sd[2] - beta) / beta,
            eps_star,
            g.gr_sm,
            g.gr_ssm,
            g.gr_bssm,
            acc.tail_bound,
        ]);
        rows.push(row);
    }
    let table = Table { columns, rows };
    let mut buf = Vec::new();
    table
        .write_csv(&mut buf)
        .map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    emit(
        args.common.out.as_deref(),
        std::str::from_utf8(&buf).expect("csv is utf-8"),
    )
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<(), CliError> {
    let file = load(&args.common)?;
    let section = SectionView {
        model: file.simulate.model.as_deref(),
        method: file.simulate.method.as_deref(),
        depth: file.simulate.depth,
        tol: file.simulate.tol,
    };
    let r = resolve(&args.common, &file, section, Some(&file.simulate))?;
    let strategy = match (&args.strategy, file.simulate.strategy.as_deref()) {
        (Some(s), _) => *s,
        (None, Some(s)) => parse_strategy_str(s)?,
        (None, None) => match r.model {
            MiningModel::Bssm => Strategy::Bssm,
            MiningModel::Bsm => Strategy::Bsm,
        },
    };
    let bribery = matches!(strategy, Strategy::Bssm | Strategy::Bsm);
    let cfg = SimConfig {
        params: r.params.clone(),
        strategy,
        accept_flags: if bribery { r.accept.clone() } else { Vec::new() },
        rounds: r.rounds,
        seed: r.seed,
    };
    let stats = if let Some(path) = &args.trace {
        let mut f = std::fs::File::create(path)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        simulate_traced(&cfg, &mut f).map_err(model_err)?
    } else {
        simulate(&cfg).map_err(model_err)?
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        "strategy: {strategy}  rounds: {}  seed: {}  rng: {}",
        cfg.rounds, cfg.seed, stats.rng_algorithm
    );
    let _ = writeln!(s, "{}", params_line(&r.params));
    if bribery {
        let flags: Vec<String> = cfg.accept_flags.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "accept: {}", flags.join(","));
    }
    for w in &stats.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s);
    let actors = actor_names(&r.params);
    let settled = stats.settled();
    let _ = writeln!(s, "{:<12} {:>14} {:>16}", "actor", "settled", "reward/event");
    for (i, name) in actors.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<12} {:>14} {:>16.9}",
            name, settled[i], stats.per_actor_reward[i]
        );
    }
    let _ = writeln!(
        s,
        "main_chain_length={} total_events={} public_extensions={} bribes={:.6}",
        stats.main_chain_length, stats.total_events, stats.public_extensions, stats.bribes_transferred
    );
    if stats.stage_resolutions.total > 0 {
        let _ = writeln!(
            s,
            "fork resolutions: stage={} private_win_rate={:.6}; from_deep={} rate={:.6}",
            stats.stage_resolutions.total,
            stats.stage_resolutions.rate(),
            stats.deep_resolutions.total,
            if stats.deep_resolutions.total > 0 {
                stats.deep_resolutions.rate()
            } else {
                f64::NAN
            }
        );
    }
    let mut visits: Vec<(&String, &u64)> = stats.state_visit_counts.iter().collect();
    visits.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let head: Vec<String> = visits
        .iter()
        .take(10)
        .map(|(k, v)| format!("{k}:{v}"))
        .collect();
    let _ = writeln!(s, "state visits (top): {}", head.join(" "));

    if bribery {
        let analytic = match r.model {
            MiningModel::Bssm => {
                bssm::rewards_profile(&r.params, &cfg.accept_flags, &r.options)
                    .map_err(model_err)?
            }
            MiningModel::Bsm => {
                bsm::rewards_profile(&r.params, &cfg.accept_flags, &r.options)
                    .map_err(model_err)?
            }
        };
        {
            let report =
                compare_closed_form(&cfg, &stats, &analytic.rewards).map_err(model_err)?;
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "closed-form deviation ({} method):",
                r.options.method
            );
            let _ = writeln!(
                s,
                "{:<12} {:>13} {:>13} {:>11} {:>10} {:>8}",
                "component", "analytic", "simulated", "abs", "rel", "sigma"
            );
            for c in &report.components {
                let _ = writeln!(
                    s,
                    "{:<12} {:>13.9} {:>13.9} {:>11.3e} {:>10.3e} {:>8.2}",
                    c.component, c.analytic, c.simulated, c.abs_dev, c.rel_dev, c.sigmas
                );
            }
            let _ = writeln!(
                s,
                "max sigma: {:.2} [{}]",
                report.max_sigmas,
                if report.beyond_three_sigma {
                    "BEYOND 3 SIGMA"
                } else {
                    "within 3 sigma"
                }
            );
        }
    }

    if let Some(out) = &args.common.out {
        // Wide one-row CSV with the headline statistics.
        let mut columns = vec![
            "rounds".to_string(),
            "seed".to_string(),
            "main_chain_length".to_string(),
            "public_extensions".to_string(),
            "bribes".to_string(),
        ];
        let mut row = vec![
            cfg.rounds as f64,
            cfg.seed as f64,
            stats.main_chain_length as f64,
            stats.public_extensions as f64,
            stats.bribes_transferred,
        ];
        for (i, name) in actors.iter().enumerate() {
            columns.push(format!("settled_{name}"));
            row.push(settled[i] as f64);
            columns.push(format!("reward_{name}"));
            row.push(stats.per_actor_reward[i]);
        }
        let table = Table {
            columns,
            rows: vec![row],
        };
        let mut buf = Vec::new();
        table
            .write_csv(&mut buf)
            .map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
        std::fs::write(out, &buf)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", out.display())))?;
    }
    print!("{s}");
    Ok(())
}

pub fn dilemma(args: &DilemmaArgs) -> Result<(), CliError> {
    let file = load(&args.common)?;
    let section = SectionView {
        model: file.dilemma.model.as_deref(),
        method: file.dilemma.method.as_deref(),
        depth: file.dilemma.depth,
        tol: file.dilemma.tol,
    };
    let mut r = resolve(&args.common, &file, section, None)?;
    // Dilemma tables default to the reference reward system with
    // per-target folding; both are overridable.
    if args.common.method.is_none() && file.dilemma.method.is_none() {
        r.options.method = RewardMethod::Reference;
    }
    let composition = match (&args.composition, file.dilemma.composition.as_deref()) {
        (Some(c), _) => *c,
        (None, Some(s)) => parse_composition_str(s)?,
        (None, None) => Composition::Folded,
    };
    if r.params.n_targets() == 0 {
        return Err(CliError::Config(
            "dilemma needs at least one target (--beta)".into(),
        ));
    }
    let matrix =
        payoff_matrix(&r.params, r.model, &r.options, composition).map_err(model_err)?;
    let nash = find_pure_nash(&matrix);
    let report = detect_dilemma(&matrix);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "model: {}  method: {}  composition: {}",
        r.model, r.options.method, composition
    );
    let _ = writeln!(s, "{}", params_line(&r.params));
    let _ = writeln!(s);
    let mut header = format!("{:<24}", "profile");
    for i in 0..matrix.n_targets {
        let _ = write!(header, " {:>14}", format!("target{}_rer%", i + 1));
    }
    let _ = write!(header, " {:>12} {:>6}", "adv_share", "nash");
    let _ = writeln!(s, "{header}");
    for cell in &matrix.cells {
        let mut line = format!("{:<24}", cell.profile.to_string());
        for rer in &cell.target_rers {
            let _ = write!(line, " {:>14.4}", rer * 100.0);
        }
        let is_nash = nash.contains(&cell.profile);
        let _ = write!(
            line,
            " {:>12.6} {:>6}",
            cell.shares[0],
            if is_nash { "*" } else { "" }
        );
        let _ = writeln!(s, "{}", line.trim_end());
    }
    let _ = writeln!(s);
    let nash_list: Vec<String> = nash.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(s, "pure nash equilibria: {}", nash_list.join(" | "));
    let _ = writeln!(
        s,
        "dilemma: {}",
        if report.dilemma {
            "yes (all-accept is an equilibrium and every target earns less there than at all-deny)"
        } else {
            "no"
        }
    );
    let winning: Vec<String> = report
        .winning_at_all_accept
        .iter()
        .enumerate()
        .map(|(i, w)| format!("target{}={}", i + 1, if *w { "yes" } else { "no" }))
        .collect();
    let _ = writeln!(s, "winning condition at all-accept: {}", winning.join(" "));
    emit(args.common.out.as_deref(), &s)
}

pub fn growth(args: &GrowthArgs) -> Result<(), CliError> {
    let file = load(&args.common)?;
    let section = SectionView {
        model: file.growth.model.as_deref(),
        method: file.growth.method.as_deref(),
        depth: file.growth.depth,
        tol: file.growth.tol,
    };
    let r = resolve(&args.common, &file, section, None)?;
    let g = chain_growth_rates(&r.params).map_err(model_err)?;
    let mut s = String::new();
    let _ = writeln!(s, "{}", params_line(&r.params));
    let _ = writeln!(s, "gr_sm   = {}", g.gr_sm);
    let _ = writeln!(s, "gr_ssm  = {}", g.gr_ssm);
    let _ = writeln!(s, "gr_bssm = {}", g.gr_bssm);
    let _ = writeln!(
        s,
        "gr_bssm - gr_sm = {} (= rho * alpha = {})",
        g.gr_bssm - g.gr_sm,
        r.params.rho * r.params.alpha
    );
    emit(args.common.out.as_deref(), &s)
}
