use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::bsts::{ImpactResult, ImpactSummary};
use crate::crime_data::CrimeCategory;
use crate::error::{invalid, Error, Result};
use crate::firth::significance_stars;

use super::batch::RegressionModel;

const IMPACT_HEADER: [&str; 13] = [
    "crime",
    "community_id",
    "seed",
    "actual_cum",
    "predicted_cum_mean",
    "predicted_cum_lower",
    "predicted_cum_upper",
    "rce",
    "rce_lower",
    "rce_upper",
    "p_value",
    "cr",
    "degenerate",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Validation(format!("writing CSV: {}", e.error())))?
        .flush()
        .map_err(|e| Error::Validation(format!("writing CSV: {e}")))
}

pub fn write_impact_csv<W: Write>(results: &[ImpactResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(IMPACT_HEADER)?;
    for r in results {
        let s = &r.summary;
        w.write_record([
            r.category.name().to_string(),
            r.community_id.to_string(),
            r.seed.to_string(),
            s.actual_cum.to_string(),
            s.predicted_cum_mean.to_string(),
            s.predicted_cum_ci.0.to_string(),
            s.predicted_cum_ci.1.to_string(),
            opt(s.rce),
            opt(s.rce_ci.map(|c| c.0)),
            opt(s.rce_ci.map(|c| c.1)),
            s.p_value.to_string(),
            (s.cr as u8).to_string(),
            (s.degenerate as u8).to_string(),
        ])?;
    }
    flush(w)
}

pub fn read_impact_csv<R: Read>(reader: R) -> Result<Vec<ImpactResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(IMPACT_HEADER) {
        return Err(invalid(format!(
            "impact CSV header must be {}",
            IMPACT_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let bad = |j: usize| invalid(format!("impact CSV line {line}: bad {} '{}'", IMPACT_HEADER[j], field(j)));
        let num = |j: usize| field(j).parse::<f64>().map_err(|_| bad(j));
        let maybe = |j: usize| -> Result<Option<f64>> {
            if field(j).is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        let flag = |j: usize| match field(j) {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(j)),
        };
        let rce_lower = maybe(8)?;
        let rce_upper = maybe(9)?;
        out.push(ImpactResult {
            category: field(0).parse::<CrimeCategory>().map_err(|_| bad(0))?,
            community_id: field(1).parse().map_err(|_| bad(1))?,
            seed: field(2).parse().map_err(|_| bad(2))?,
            summary: ImpactSummary {
                actual_cum: field(3).parse().map_err(|_| bad(3))?,
                predicted_cum_mean: num(4)?,
                predicted_cum_ci: (num(5)?, num(6)?),
                rce: maybe(7)?,
                rce_ci: rce_lower.zip(rce_upper),
                p_value: num(10)?,
                cr: flag(11)?,
                degenerate: flag(12)?,
            },
        });
    }
    Ok(out)
}

const REGRESSION_HEADER: [&str; 16] = [
    "dimension",
    "crime",
    "term",
    "coef",
    "se",
    "odds_ratio",
    "or_se",
    "z",
    "p_value",
    "stars",
    "ame",
    "chi2",
    "model_df",
    "model_p",
    "n",
    "status",
];

/// Long format: one row per coefficient, one row per skipped model.
pub fn write_regressions_csv<W: Write>(models: &[RegressionModel], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REGRESSION_HEADER)?;
    for m in models {
        let dim = m.dimension.name();
        let crime = m.crime.name();
        match &m.fit {
            None => {
                let reason = m.skipped.as_deref().unwrap_or("skipped");
                let mut row = vec![dim.to_string(), crime.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 13));
                row.push(format!("skipped: {reason}"));
                w.write_record(&row)?;
            }
            Some(f) => {
                let status = if f.converged { "ok" } else { "not_converged" };
                for j in 0..f.p() {
                    w.write_record([
                        dim.to_string(),
                        crime.to_string(),
                        f.column_names[j].clone(),
                        f.beta[j].to_string(),
                        f.se[j].to_string(),
                        f.odds_ratios[j].to_string(),
                        f.or_se[j].to_string(),
                        f.wald_z[j].to_string(),
                        f.wald_p[j].to_string(),
                        significance_stars(f.wald_p[j]).to_string(),
                        opt(m.marginal_effects.get(j).copied().flatten()),
                        f.model_chi2.to_string(),
                        f.model_df.to_string(),
                        f.model_p.to_string(),
                        f.n.to_string(),
                        status.to_string(),
                    ])?;
                }
            }
        }
    }
    flush(w)
}

pub fn write_regressions_json<W: Write>(models: &[RegressionModel], writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, models)?;
    Ok(())
}

pub fn read_regressions_json<R: Read>(reader: R) -> Result<Vec<RegressionModel>> {
    Ok(serde_json::from_reader(reader)?)
}

/// One table per dimension: odds ratios with standard errors and stars,
/// crimes across, plus chi-square, model p and N rows.
pub fn format_regression_tables(models: &[RegressionModel]) -> String {
    let mut out = String::new();
    let dims: BTreeSet<_> = models.iter().map(|m| m.dimension).collect();
    for dim in dims {
        let block: Vec<&RegressionModel> = models.iter().filter(|m| m.dimension == dim).collect();
        let mut terms: Vec<String> = Vec::new();
        for m in &block {
            if let Some(f) = &m.fit {
                for name in &f.column_names {
                    if !terms.contains(name) {
                        terms.push(name.clone());
                    }
                }
            }
        }
        // intercept goes last, as a constant row
        if let Some(i) = terms.iter().position(|t| t == crate::firth::INTERCEPT) {
            let t = terms.remove(i);
            terms.push(t);
        }
        let width = terms.iter().map(|t| t.len()).max().unwrap_or(0).max(10);
        let _ = writeln!(out, "{}", dim.title());
        let _ = write!(out, "{:width$}", "");
        for m in &block {
            let _ = write!(out, " {:>22}", m.crime.name());
        }
        out.push('\n');
        for term in &terms {
            let _ = write!(out, "{term:width$}");
            for m in &block {
                let cell = m
                    .fit
                    .as_ref()
                    .and_then(|f| f.coefficient(term).map(|j| (f, j)))
                    .map(|(f, j)| {
                        format!(
                            "{:.3}{} ({:.3})",
                            f.odds_ratios[j],
                            significance_stars(f.wald_p[j]),
                            f.or_se[j]
                        )
                    })
                    .unwrap_or_default();
                let _ = write!(out, " {cell:>22}");
            }
            out.push('\n');
        }
        let footer: [(&str, Box<dyn Fn(&RegressionModel) -> String>); 3] = [
            ("Chi2", Box::new(|m| m.fit.as_ref().map(|f| format!("{:.3}", f.model_chi2)).unwrap_or("skipped".into()))),
            ("Prob > Chi2", Box::new(|m| m.fit.as_ref().map(|f| format!("{:.4}", f.model_p)).unwrap_or_default())),
            ("N", Box::new(|m| m.fit.as_ref().map(|f| f.n.to_string()).unwrap_or_default())),
        ];
        for (label, cell) in footer {
            let _ = write!(out, "{label:width$}");
            for m in &block {
                let _ = write!(out, " {:>22}", cell(m));
            }
            out.push('\n');
        }
        for m in &block {
            if let Some(reason) = &m.skipped {
                let _ = writeln!(out, "note: {} model skipped: {reason}", m.crime);
            }
            for note in &m.notes {
                let _ = writeln!(out, "note: {}: {note}", m.crime);
            }
        }
        out.push('\n');
    }
    out.push_str("Odds ratios (standard errors). * p<0.1, ** p<0.05, *** p<0.01, **** p<0.001\n");
    out
}
