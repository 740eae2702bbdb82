use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::survival::{model_tests, CoxFit, ModelTests, TestStat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown format {s:?} (csv or markdown)")),
        }
    }
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Four significant digits with trailing zeros dropped: 570.2, 12.35, 0.0123.
pub fn signif4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (3 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `<2e-16` below machine precision, two significant digits otherwise.
pub fn format_p(p: f64) -> String {
    if p < 2e-16 {
        "<2e-16".into()
    } else if p >= 1e-4 {
        let decimals = (1 - p.log10().floor() as i32).max(0) as usize;
        let s = format!("{p:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{p:.1e}");
        // 3.0e-7 -> 3e-07
        let (mant, exp) = s.split_once('e').unwrap();
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        let exp: i32 = exp.parse().unwrap();
        format!("{mant}e-{:02}", -exp)
    }
}

/// "570.2 on 15 df, p=<2e-16"
pub fn format_test(t: &TestStat) -> String {
    format!("{} on {} df, p={}", signif4(t.statistic), t.df, format_p(t.p))
}

fn footer(fit: &CoxFit) -> Vec<String> {
    match model_tests(fit) {
        Ok(ModelTests { likelihood_ratio, wald, score }) => vec![
            format!("Likelihood ratio test: {}", format_test(&likelihood_ratio)),
            format!("Wald test: {}", format_test(&wald)),
            format!("Score (logrank) test: {}", format_test(&score)),
        ],
        Err(_) => vec!["Global tests unavailable: the fit did not converge".into()],
    }
}

fn banner(fit: &CoxFit) -> Option<String> {
    (!fit.converged).then(|| {
        let why = if fit.diagnostics.is_empty() { "no diagnostic".to_string() } else { fit.diagnostics.join("; ") };
        format!("NONCONVERGED: {why}")
    })
}

/// Coefficient table in the layout of the published results: Coef with
/// significance stars, EXP(Coef), SE(Coef), Z, and the three global tests.
/// A non-converged fit gets a banner and no stars.
pub fn render_coefficient_table(fit: &CoxFit, format: Format) -> String {
    let mut out = String::new();
    let starred = |j: usize| if fit.converged { stars(fit.p[j]) } else { "" };
    match format {
        Format::Csv => {
            if let Some(b) = banner(fit) {
                writeln!(out, "# {b}").unwrap();
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COEF_HEADER).unwrap();
            for j in 0..fit.beta.len() {
                w.write_record([
                    fit.covariate_names[j].clone(),
                    fit.beta[j].to_string(),
                    fit.exp_beta[j].to_string(),
                    fit.se[j].to_string(),
                    fit.z[j].to_string(),
                    fit.p[j].to_string(),
                    starred(j).to_string(),
                ])
                .unwrap();
            }
            out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
            for line in footer(fit) {
                writeln!(out, "# {line}").unwrap();
            }
        }
        Format::Markdown => {
            if let Some(b) = banner(fit) {
                writeln!(out, "**{b}**\n").unwrap();
            }
            out.push_str("| Covariate | Coef | EXP(Coef) | SE(Coef) | Z |\n");
            out.push_str("|---|---:|---:|---:|---:|\n");
            for j in 0..fit.beta.len() {
                writeln!(
                    out,
                    "| {} | {:.2}{} | {:.2} | {:.2} | {:.2} |",
                    fit.covariate_names[j],
                    fit.beta[j],
                    starred(j),
                    fit.exp_beta[j],
                    fit.se[j],
                    fit.z[j]
                )
                .unwrap();
            }
            out.push('\n');
            for line in footer(fit) {
                writeln!(out, "{line}  ").unwrap();
            }
            if fit.converged {
                out.push_str("\n***p < 0.001, **p < 0.01, *p < 0.05\n");
            }
        }
    }
    out
}

const COEF_HEADER: [&str; 7] = ["name", "coef", "exp_coef", "se", "z", "p", "stars"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub coef: f64,
    pub exp_coef: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub stars: String,
}

/// Reads the CSV flavour of [`render_coefficient_table`]; `#` lines are skipped.
pub fn read_coefficient_csv(text: &str) -> Result<Vec<CoefficientRow>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

pub fn write_hazard_csv(curve: &[(f64, f64)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "hazard"]).unwrap();
    for (t, h) in curve {
        w.write_record([t.to_string(), h.to_string()]).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn read_hazard_csv(text: &str) -> Result<Vec<(f64, f64)>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}
