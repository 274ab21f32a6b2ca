//! Verdict logic: criteria computed from the serialized table and metadata
//! alone, so stored runs can be re-judged without any solver work.

use crate::error::{Error, Result};
use crate::verify::report::{
    fit_loglog_rate, Criterion, ExperimentId, FittedRate, Metadata, Table,
};

pub fn judge(
    id: ExperimentId,
    table: &Table,
    meta: &Metadata,
) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    match id {
        ExperimentId::E1Adjoint => judge_e1(table),
        ExperimentId::E2Ibp => judge_e2(table),
        ExperimentId::E3GradValue => judge_e3(table),
        ExperimentId::E4TimeDeriv => judge_e4(table),
        ExperimentId::E5Joint => judge_e5(table),
        ExperimentId::E6Stability => judge_e6(table),
        ExperimentId::E7Growth => judge_e7(table),
        ExperimentId::E8Neighborhood => judge_e8(table),
        ExperimentId::E9LsL1 => judge_e9(table),
        ExperimentId::E10Bellman => judge_e10(table, meta),
    }
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite keys"));
    v.dedup();
    v
}

fn select(table: &Table, key: &str, val: f64) -> Result<Table> {
    let keys = table.col(key)?;
    let rows = table
        .rows
        .iter()
        .zip(&keys)
        .filter(|(_, k)| **k == val)
        .map(|(r, _)| r.clone())
        .collect();
    Ok(Table {
        columns: table.columns.clone(),
        rows,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v[v.len() / 2]
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// E1: central finite differences of J against the adjoint pairing must
/// converge at second order. Samples whose error sits at the rounding floor
/// for every step size count as machine-exact (rate 2 by convention).
fn judge_e1(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let mut rates = Vec::new();
    for s in distinct(&table.col("sample")?) {
        let sub = select(table, "sample", s)?;
        let eps = sub.col("eps")?;
        let err = sub.col("abs_err")?;
        let refv = sub.col("pairing")?;
        let floor = 1e-12 * (1.0 + max_of(&refv).abs());
        let pts: (Vec<f64>, Vec<f64>) = eps
            .iter()
            .zip(&err)
            .filter(|(_, e)| **e > floor)
            .map(|(a, b)| (*a, *b))
            .unzip();
        let name = format!("sample_{}", s as usize);
        if pts.0.len() < 3 {
            rates.push(FittedRate {
                name,
                slope: 2.0,
                ci_low: 2.0,
                ci_high: 2.0,
                points: 0,
            });
        } else {
            rates.push(fit_loglog_rate(&name, &pts.0, &pts.1));
        }
    }
    let min_rate = min_of(&rates.iter().map(|r| r.slope).collect::<Vec<_>>());
    let criteria = vec![Criterion::ge("fd_rate_min", min_rate, 1.9)];
    Ok((rates, criteria))
}

/// E2: both sides of the duality identity agree to 1e-10 relative.
fn judge_e2(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let mism = table.col("rel_mismatch")?;
    Ok((
        Vec::new(),
        vec![Criterion::le("max_rel_mismatch", max_of(&mism), 1e-10)],
    ))
}

/// E3: the value-function remainder is quadratic in the perturbation and the
/// secant slope at the smallest scale matches the adjoint pairing.
fn judge_e3(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let mut rates = Vec::new();
    let mut criteria = Vec::new();
    let mut secant_worst = 0.0f64;
    for tau in distinct(&table.col("tau_index")?) {
        let at_tau = select(table, "tau_index", tau)?;
        let mut slopes = Vec::new();
        for dir in distinct(&at_tau.col("dir")?) {
            let sub = select(&at_tau, "dir", dir)?;
            let scale = sub.col("scale")?;
            let rem: Vec<f64> = sub.col("remainder")?.iter().map(|r| r.abs()).collect();
            let fit = fit_loglog_rate(
                &format!("tau{}_dir{}", tau as usize, dir as usize),
                &scale,
                &rem,
            );
            slopes.push(fit.slope);
            rates.push(fit);

            // secant against the gradient pairing at the smallest scale
            let idx = scale
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
                .map(|(i, _)| i)
                .expect("nonempty");
            let row = &sub.rows[idx];
            let (s, vp, v0, dslope) = (
                sub.col("scale")?[idx],
                row[sub.columns.iter().position(|c| c == "v_pert").unwrap()],
                row[sub.columns.iter().position(|c| c == "v_base").unwrap()],
                row[sub.columns.iter().position(|c| c == "dir_slope").unwrap()],
            );
            let secant = (vp - v0) / s;
            let rel = (secant - dslope).abs() / dslope.abs().max(1e-300);
            secant_worst = secant_worst.max(rel);
        }
        criteria.push(Criterion::ge(
            &format!("median_slope_tau{}", tau as usize),
            median(slopes),
            1.8,
        ));
    }
    criteria.push(Criterion::le("secant_rel_err_max", secant_worst, 0.05));
    Ok((rates, criteria))
}

/// Second-level Richardson extrapolation of quotients at h, 2h, 4h.
fn richardson(h: &[f64], d: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = h.iter().cloned().zip(d.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let (d1, d2, d4) = (pairs[0].1, pairs[1].1, pairs[2].1);
    let r1a = 2.0 * d1 - d2;
    let r1b = 2.0 * d2 - d4;
    (4.0 * r1a - r1b) / 3.0
}

/// E4: extrapolated one-sided quotients of the value in time match the
/// envelope formula within 2%, and the raw quotient error is at least first
/// order in h.
fn judge_e4(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let mut rates = Vec::new();
    let mut criteria = Vec::new();
    for (side, name) in [(1.0, "right"), (-1.0, "left")] {
        let sub = select(table, "side", side)?;
        if sub.rows.len() < 3 {
            return Err(Error::Format(format!("E4 table missing {name} rows")));
        }
        let h = sub.col("h")?;
        let q = sub.col("quotient")?;
        let formula = sub.col("formula")?[0];
        let extrap = richardson(&h, &q);
        let rel = (extrap - formula).abs() / formula.abs().max(1e-300);
        criteria.push(Criterion::le(&format!("{name}_rel_err"), rel, 0.02));
        let errs: Vec<f64> = q.iter().map(|d| (d - formula).abs()).collect();
        let fit = fit_loglog_rate(&format!("{name}_order"), &h, &errs);
        criteria.push(Criterion::ge(&format!("{name}_order"), fit.slope, 0.9));
        rates.push(fit);
    }
    Ok((rates, criteria))
}

/// E5: the joint remainder ratio over (h, eta) shrinks by at least 10x from
/// the largest to the smallest sampled scale.
fn judge_e5(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let joint = select(table, "kind", 2.0)?;
    if joint.rows.is_empty() {
        return Err(Error::Format("E5 table has no joint rows".into()));
    }
    let mut sized: Vec<(f64, f64)> = joint
        .col("h")?
        .iter()
        .zip(joint.col("eta_scale")?)
        .zip(joint.col("ratio")?)
        .map(|((h, s), r)| (h + s, r))
        .collect();
    sized.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    let first = sized.first().expect("nonempty").1;
    let last = sized.last().expect("nonempty").1;
    let decay = last / first.max(1e-300);
    let scales: Vec<f64> = sized.iter().map(|p| p.0).collect();
    let ratios: Vec<f64> = sized.iter().map(|p| p.1).collect();
    let fit = fit_loglog_rate("joint_ratio_rate", &scales, &ratios);
    Ok((
        vec![fit],
        vec![Criterion::le("joint_ratio_decay", decay, 0.1)],
    ))
}

/// E6: the stability ratio stays bounded: no growth trend as the
/// perturbation shrinks, no outlier beyond 3x the median, and the empirical
/// constant moves less than 30% under one grid refinement.
fn judge_e6(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let coarse = select(table, "phase", 0.0)?;
    let fine = select(table, "phase", 1.0)?;
    let ratios = coarse.col("ratio")?;
    let kappa_c = max_of(&ratios);
    let med = median(ratios.clone());
    // growth rate of the empirical max ratio as the perturbation shrinks
    // (positive = blow-up); fitted on log(max ratio per scale) against
    // log(1/scale)
    let mut inv = Vec::new();
    let mut per_scale_max = Vec::new();
    for s in distinct(&coarse.col("scale")?) {
        let at_scale = select(&coarse, "scale", s)?;
        inv.push(1.0 / s);
        per_scale_max.push(max_of(&at_scale.col("ratio")?));
    }
    let fit = fit_loglog_rate("ratio_growth_trend", &inv, &per_scale_max);
    let mut criteria = vec![
        Criterion::le("ratio_growth_trend", fit.slope, 0.1),
        Criterion::le("max_over_median", kappa_c / med.max(1e-300), 3.0),
    ];
    let mut rates = vec![fit];
    if !fine.rows.is_empty() {
        let kappa_f = max_of(&fine.col("ratio")?);
        let drift = (kappa_f - kappa_c).abs() / kappa_c.max(1e-300);
        criteria.push(Criterion::le("refinement_drift", drift, 0.3));
        rates.push(FittedRate {
            name: "kappa_hat".into(),
            slope: kappa_c,
            ci_low: kappa_c.min(kappa_f),
            ci_high: kappa_c.max(kappa_f),
            points: coarse.rows.len() + fine.rows.len(),
        });
    }
    Ok((rates, criteria))
}

const E7_DELTA_QUANTILES: [f64; 4] = [1.0, 0.75, 0.5, 0.25];

/// E7: empirical growth constants stay positive at every restriction level,
/// propagate forward in time, and reproduce the exact affine identity.
fn judge_e7(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let base = select(table, "kind", 0.0)?;
    let zn = base.col("znorm")?;
    let r2 = base.col("ratio2")?;
    let mut sorted_zn = zn.clone();
    sorted_zn.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut criteria = Vec::new();
    let mut c2_levels = Vec::new();
    for q in E7_DELTA_QUANTILES {
        let idx = ((sorted_zn.len() as f64 * q).ceil() as usize).clamp(1, sorted_zn.len()) - 1;
        let delta = sorted_zn[idx];
        let inf = min_of(
            &zn.iter()
                .zip(&r2)
                .filter(|(z, _)| **z <= delta)
                .map(|(_, r)| *r)
                .collect::<Vec<_>>(),
        );
        c2_levels.push(inf);
    }
    let c2_base = c2_levels[0];
    criteria.push(Criterion::ge("c2_min_over_deltas", min_of(&c2_levels), 0.0));
    let viol = c2_levels
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    criteria.push(Criterion::le(
        "c2_delta_monotonicity_violation",
        viol,
        1e-12,
    ));

    for (kind, name) in [(1.0, "tau_quarter"), (2.0, "tau_half")] {
        let sub = select(table, "kind", kind)?;
        if sub.rows.is_empty() {
            continue;
        }
        let c2_tau = min_of(&sub.col("ratio2")?);
        criteria.push(Criterion::ge(
            &format!("c2_{name}_over_base"),
            c2_tau / c2_base.max(1e-300),
            0.5,
        ));
    }

    let linear = select(table, "kind", 3.0)?;
    if !linear.rows.is_empty() {
        let fv = linear.col("first_var")?;
        let znl = linear.col("znorm")?;
        let r1 = linear.col("ratio1")?;
        let worst = fv
            .iter()
            .zip(&znl)
            .zip(&r1)
            .map(|((f, z), r)| (r - (0.5 + f / (z * z))).abs())
            .fold(0.0f64, f64::max);
        criteria.push(Criterion::le("affine_ratio_identity_err", worst, 1e-9));
        criteria.push(Criterion::ge("affine_ratio_min", min_of(&r1), 0.5 - 1e-9));
    }

    let rates = vec![FittedRate {
        name: "c2_hat".into(),
        slope: c2_base,
        ci_low: min_of(&r2),
        ci_high: median(r2.clone()),
        points: base.rows.len(),
    }];
    Ok((rates, criteria))
}

/// E8: growth constants measured at re-optimized neighbours stay within a
/// factor two of the base constant; the control-growth exponent is reported.
fn judge_e8(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let base = select(table, "kind", 0.0)?;
    let pert = select(table, "kind", 1.0)?;
    let growth = select(table, "kind", 2.0)?;
    let c2_base = min_of(&base.col("y")?);
    let mut worst_ratio = f64::INFINITY;
    for idx in distinct(&pert.col("idx")?) {
        let sub = select(&pert, "idx", idx)?;
        let c2 = min_of(&sub.col("y")?);
        worst_ratio = worst_ratio.min(c2 / c2_base.max(1e-300));
    }
    let mut rates = Vec::new();
    if !growth.rows.is_empty() {
        let dist = growth.col("x")?;
        let jgap = growth.col("y")?;
        let mut fit = fit_loglog_rate("control_growth_exponent", &dist, &jgap);
        fit.name = "control_growth_exponent".into();
        rates.push(fit);
    }
    Ok((
        rates,
        vec![Criterion::ge(
            "perturbed_c2_over_base_min",
            worst_ratio,
            0.5,
        )],
    ))
}

/// E9: the L^s/L^1 ratio supremum at s = 2 is stable across the initial
/// time, across one refinement, and under the concentrating spike family.
fn judge_e9(table: &Table) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let s2 = |t: &Table| -> Result<Vec<f64>> {
        Ok(t.col("p")?
            .iter()
            .zip(t.col("ratio")?)
            .filter(|(p, _)| **p == 2.0)
            .map(|(_, r)| r)
            .collect())
    };
    let coarse = select(table, "phase", 0.0)?;
    let taus = distinct(&coarse.col("tau_index")?);
    if taus.len() < 2 {
        return Err(Error::Format("E9 needs two tau values".into()));
    }
    let sup0 = max_of(&s2(&select(&coarse, "tau_index", taus[0])?)?);
    let sup1 = max_of(&s2(&select(&coarse, "tau_index", taus[1])?)?);
    let tau_drift = (sup1 / sup0.max(1e-300) - 1.0).abs();

    let fine = select(table, "phase", 1.0)?;
    let sup_f = max_of(&s2(&fine)?);
    let sup_c = max_of(&s2(&coarse)?);
    let refine_drift = (sup_f / sup_c.max(1e-300) - 1.0).abs();

    let spike = select(table, "phase", 2.0)?;
    let konst = select(table, "phase", 3.0)?;
    let spike_sup = max_of(&s2(&spike)?);
    let const_ratio = max_of(&s2(&konst)?);

    Ok((
        Vec::new(),
        vec![
            Criterion::le("tau_drift", tau_drift, 0.2),
            Criterion::le("refinement_drift", refine_drift, 0.2),
            Criterion::le("spike_over_const", spike_sup / const_ratio.max(1e-300), 2.0),
        ],
    ))
}

/// E10: dynamic-programming residuals at interior times stay below ten gap
/// tolerances.
fn judge_e10(table: &Table, meta: &Metadata) -> Result<(Vec<FittedRate>, Vec<Criterion>)> {
    let bell = table.col("bellman_residual")?;
    let reopt = table.col("reopt_residual")?;
    let tol = 10.0 * meta.gap_tol;
    Ok((
        Vec::new(),
        vec![
            Criterion::le("max_bellman_residual", max_of(&bell), tol),
            Criterion::le("max_reopt_residual", max_of(&reopt), tol),
        ],
    ))
}
