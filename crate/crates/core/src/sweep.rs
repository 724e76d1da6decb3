//! Per-prime sweeps of the brute-force averages, through-origin fits and
//! side-by-side comparison with the main term, with CSV input and output.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::arith::primes_up_to;
use crate::curves::{tally_structures_with, StructureTally, TallyOptions};
use crate::densities::FInftyNorm;
use crate::error::{domain, Error, Result};
use crate::groups::{Formula, Stat};
use crate::theorem::{main_term, KFactor, MainTermOptions};

/// Default upper end of a sweep.
pub const DEFAULT_SWEEP_MAX: u64 = 503;

/// Upper end of the full sweep.
pub const FULL_SWEEP_MAX: u64 = 2423;

pub const SWEEP_HEADER: [&str; 7] = [
    "x",
    "p",
    "avg_s_corrected",
    "avg_s_printed",
    "avg_c_corrected",
    "avg_tauN",
    "running_mean_s",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub x: u64,
    pub p: u64,
    pub avg_s_corrected: f64,
    pub avg_s_printed: f64,
    pub avg_c_corrected: f64,
    pub avg_tau_n: f64,
    /// Mean of `avg_s_corrected` over the primes up to x.
    pub running_mean_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub x_max: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            x_max: DEFAULT_SWEEP_MAX,
            threads: 0,
            seed: 0,
        }
    }
}

fn row_stats(tally: &StructureTally) -> [f64; 4] {
    [
        tally.average(Stat::S, Formula::Corrected),
        tally.average(Stat::S, Formula::Printed),
        tally.average(Stat::C, Formula::Corrected),
        tally.average(Stat::TauN, Formula::Corrected),
    ]
}

/// One row per prime 5 ≤ p ≤ x_max, in ascending order.
pub fn run_sweep(opts: SweepOptions) -> Result<Vec<SweepRow>> {
    let primes: Vec<u64> = primes_up_to(opts.x_max)
        .into_iter()
        .filter(|&p| p >= 5)
        .collect();
    let tally_opts = TallyOptions {
        seed: opts.seed,
        ..TallyOptions::default()
    };
    let compute = || -> Result<Vec<[f64; 4]>> {
        primes
            .par_iter()
            .map(|&p| Ok(row_stats(&tally_structures_with(p, tally_opts)?)))
            .collect()
    };
    let stats = if opts.threads == 0 {
        compute()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| domain!("cannot start {} threads: {e}", opts.threads))?
            .install(compute)?
    };
    let mut rows = Vec::with_capacity(primes.len());
    let mut running = 0.0;
    for (i, (&p, s)) in primes.iter().zip(&stats).enumerate() {
        running += s[0];
        rows.push(SweepRow {
            x: p,
            p,
            avg_s_corrected: s[0],
            avg_s_printed: s[1],
            avg_c_corrected: s[2],
            avg_tau_n: s[3],
            running_mean_s: running / (i + 1) as f64,
        });
    }
    Ok(rows)
}

/// Plain decimal with `digits` significant digits.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new leading digit, e.g. 9.99… → 10.0.
    let rounded: f64 = s.parse().unwrap_or(v);
    if rounded != 0.0 && rounded.abs().log10().floor() as i64 > magnitude && decimals > 0 {
        let d = decimals - 1;
        return format!("{v:.d$}");
    }
    s
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    domain!("CSV error: {e}")
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.x.to_string(),
            r.p.to_string(),
            format_sig(r.avg_s_corrected, 12),
            format_sig(r.avg_s_printed, 12),
            format_sig(r.avg_c_corrected, 12),
            format_sig(r.avg_tau_n, 12),
            format_sig(r.running_mean_s, 12),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)?;
    Ok(())
}

/// Reads `(x, column)` pairs from a CSV with an `x` column.
pub fn read_column<R: Read>(input: R, column: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            domain!(
                "column {name:?} not found (have: {})",
                headers.iter().collect::<Vec<_>>().join(",")
            )
        })
    };
    let (xi, yi) = (find("x")?, find(column)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| domain!("unparsable value in row {:?}", rec))
        };
        out.push((parse(xi)?, parse(yi)?));
    }
    Ok(out)
}

/// Least squares y = C·log x with no intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginFit {
    pub slope: f64,
    pub residual_rms: f64,
    pub n: usize,
}

pub fn fit_through_origin(points: &[(f64, f64)]) -> Result<OriginFit> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        if !(x > 1.0) {
            return Err(domain!("fit needs x > 1, got {x}"));
        }
        let l = x.ln();
        sxy += y * l;
        sxx += l * l;
    }
    if points.is_empty() {
        return Err(domain!("no rows to fit"));
    }
    let slope = sxy / sxx;
    let ss: f64 = points
        .iter()
        .map(|&(x, y)| (y - slope * x.ln()).powi(2))
        .sum();
    Ok(OriginFit {
        slope,
        residual_rms: (ss / points.len() as f64).sqrt(),
        n: points.len(),
    })
}

/// The four main-term configurations, in CSV column order.
pub const CONFIGS: [(KFactor, FInftyNorm); 4] = [
    (KFactor::AUnit, FInftyNorm::Paper),
    (KFactor::AUnit, FInftyNorm::Half),
    (KFactor::BInverse, FInftyNorm::Paper),
    (KFactor::BInverse, FInftyNorm::Half),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub p: u64,
    pub brute: f64,
    /// Main terms in [`CONFIGS`] order.
    pub model: [f64; 4],
}

impl CompareRow {
    pub fn rel_err(&self, i: usize) -> f64 {
        (self.model[i] - self.brute).abs() / self.brute
    }
}

pub fn compare_header() -> Vec<String> {
    let mut h = vec!["p".to_string(), "brute".to_string()];
    for prefix in ["main_term", "rel_err"] {
        for (k, n) in CONFIGS {
            h.push(format!("{prefix}_{k}_{n}"));
        }
    }
    h
}

pub fn compare(primes: &[u64], stat: Stat, formula: Formula, seed: u64) -> Result<Vec<CompareRow>> {
    primes
        .par_iter()
        .map(|&p| {
            let tally = tally_structures_with(
                p,
                TallyOptions {
                    seed,
                    ..TallyOptions::default()
                },
            )?;
            let brute = tally.average(stat, formula);
            let mut model = [0.0; 4];
            for (slot, (k_factor, norm)) in model.iter_mut().zip(CONFIGS) {
                *slot = main_term(
                    p,
                    stat,
                    MainTermOptions {
                        k_factor,
                        norm,
                        include_p_factor: false,
                    },
                )?;
            }
            Ok(CompareRow { p, brute, model })
        })
        .collect()
}

pub fn write_compare_csv<W: Write>(rows: &[CompareRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(compare_header()).map_err(csv_error)?;
    for r in rows {
        let mut rec = vec![r.p.to_string(), format_sig(r.brute, 12)];
        rec.extend(r.model.iter().map(|&m| format_sig(m, 12)));
        rec.extend((0..4).map(|i| format_sig(r.rel_err(i), 12)));
        w.write_record(rec).map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)?;
    Ok(())
}

/// A gnuplot script plotting the sweep CSV at `csv_path` with the fitted line.
pub fn gnuplot_script(csv_path: &str, slope: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead left top\n\
         set xlabel 'x'\n\
         set ylabel 'average number of subgroups'\n\
         plot '{csv_path}' using 1:7 with points pt 7 ps 0.4 lc rgb 'black', \\\n\
         \x20    {} * log(x) with lines lc rgb 'gray' title 'fit'\n",
        format_sig(slope, 6)
    )
}
