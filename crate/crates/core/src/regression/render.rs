//! Fixed-width text layout of a regression report.

use std::fmt::Write;

use super::{RegressionReport, TermSs};

fn p_value(p: Option<f64>) -> String {
    match p {
        None => ".".into(),
        Some(p) if p < 1e-4 => "<.0001".into(),
        Some(p) => format!("{p:.4}"),
    }
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_else(|| ".".into())
}

/// Six significant digits, integers past 1e5, E-notation past 1e7.
fn f_value(f: f64) -> String {
    let a = f.abs();
    if a >= 1e7 {
        let exp = a.log10().floor() as i32;
        let mant = f / 10f64.powi(exp);
        format!("{}E{exp}", trim(format!("{mant:.3}")))
    } else if a >= 1e5 {
        format!("{f:.0}")
    } else {
        significant(f, 6)
    }
}

fn significant(v: f64, digits: i32) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (digits - 1 - mag).max(0) as usize;
    trim(format!("{v:.decimals$}"))
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn term_block(out: &mut String, label: &str, rows: &[TermSs], decimals: usize) {
    let _ =
        writeln!(out, "{:<32}{:>6}{:>18}{:>18}{:>12}{:>10}", "Source", "DF", label, "Mean Square", "F Value", "Pr > F");
    for t in rows {
        let _ = writeln!(
            out,
            "{:<32}{:>6}{:>18.d$}{:>18.d$}{:>12}{:>10}",
            t.term,
            t.df,
            t.ss,
            t.ss,
            opt(t.f_value, f_value),
            p_value(t.p_value),
            d = decimals
        );
    }
}

pub(super) fn render(r: &RegressionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Dependent Variable: {}\n", r.response);
    let _ = writeln!(
        out,
        "{:<32}{:>6}{:>18}{:>18}{:>12}{:>10}",
        "Source", "DF", "Sum of Squares", "Mean Square", "F Value", "Pr > F"
    );
    let _ = writeln!(
        out,
        "{:<32}{:>6}{:>18.7}{:>18.7}{:>12}{:>10}",
        "Model",
        r.model_df,
        r.model_ss,
        r.model_ms,
        opt(r.f_value, f_value),
        p_value(r.f_p_value)
    );
    let _ = writeln!(out, "{:<32}{:>6}{:>18.7}{:>18.7}", "Error", r.error_df, r.error_ss, r.error_ms);
    let _ = writeln!(out, "{:<32}{:>6}{:>18.7}\n", "Corrected Total", r.total_df, r.total_ss);

    let mean_label = format!("{} Mean", r.response);
    let _ = writeln!(
        out,
        "{:>12}{:>12}{:>12}{:>w$}",
        "R-Square",
        "Coeff Var",
        "Root MSE",
        mean_label,
        w = mean_label.len().max(12) + 2
    );
    let _ = writeln!(
        out,
        "{:>12.6}{:>12}{:>12.6}{:>w$.6}\n",
        r.r_square,
        opt(r.coeff_var, |v| format!("{v:.6}")),
        r.root_mse,
        r.mean_of_response,
        w = mean_label.len().max(12) + 2
    );

    term_block(&mut out, "Type I SS", &r.type1, 7);
    out.push('\n');
    term_block(&mut out, "Type III SS", &r.type3, 8);
    out.push('\n');

    let _ = writeln!(
        out,
        "{:<32}{:>18}{:>18}{:>12}{:>10}",
        "Parameter", "Estimate", "Standard Error", "t Value", "Pr > |t|"
    );
    for c in &r.coefficients {
        let _ = writeln!(
            out,
            "{:<32}{:>18}{:>18}{:>12}{:>10}",
            c.term,
            significant(c.estimate, 9),
            opt(c.std_error, |v| format!("{v:.8}")),
            opt(c.t_value, |v| format!("{v:.2}")),
            p_value(c.p_value)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_styles() {
        assert_eq!(f_value(1788.7412), "1788.74");
        assert_eq!(f_value(13620.21), "13620.2");
        assert_eq!(f_value(1173112.4), "1173112");
        assert_eq!(f_value(14_640_000.0), "1.464E7");
        assert_eq!(significant(0.9095039791, 9), "0.909503979");
        assert_eq!(significant(-10.895609681, 9), "-10.8956097");
        assert_eq!(p_value(Some(1e-9)), "<.0001");
        assert_eq!(p_value(Some(0.25)), "0.2500");
        assert_eq!(p_value(None), ".");
    }
}
