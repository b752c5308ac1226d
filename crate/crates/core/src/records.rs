//! CSV record formats. Every file has a header row, `,` separators, `.` as
//! the decimal mark and LF line endings.

use std::io::{BufRead, Write};

use crate::coalescent::{GeneTree, Topology};
use crate::error::{Error, Result};
use crate::estimators::{Estimate, MethodGroup};
use crate::montecarlo::McResult;
use crate::rates::{asymptote, RatePoint, Regime};

pub const GENE_TREE_HEADER: &str = "topology,t1,t2,failed";
pub const ESTIMATE_HEADER: &str = "method,topology,tau_cherry,tau_root,tie";
pub const RATE_CURVE_HEADER: &str = "t,alpha_glass,alpha_rstar,alpha_steac,s_star_rstar,s_star_steac,\
asym_rstar_small,asym_rstar_large,asym_steac_small,asym_steac_large";
pub const EXPERIMENT_HEADER: &str =
    "method,t,L,replicates,failures,p_hat,ci_low,ci_high,empirical_rate,analytic_rate,seed";

const MIN_SIGNIFICANT_DIGITS: usize = 12;

/// Scientific notation that round-trips exactly and carries at least twelve
/// significant digits.
pub fn fmt_real(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let shortest = format!("{x:e}");
    let mantissa = shortest.split('e').next().unwrap_or("");
    let digits = mantissa.chars().filter(char::is_ascii_digit).count();
    if digits >= MIN_SIGNIFICANT_DIGITS {
        shortest
    } else {
        format!("{:.*e}", MIN_SIGNIFICANT_DIGITS - 1, x)
    }
}

pub fn write_gene_trees<W: Write>(mut w: W, gene_trees: &[GeneTree]) -> Result<()> {
    writeln!(w, "{GENE_TREE_HEADER}")?;
    for g in gene_trees {
        writeln!(
            w,
            "{},{},{},{}",
            g.topology().token(),
            fmt_real(g.t1()),
            fmt_real(g.t2()),
            g.failed()
        )?;
    }
    Ok(())
}

pub fn read_gene_trees<R: BufRead>(r: R) -> Result<Vec<GeneTree>> {
    let mut lines = r.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).transpose()?;
    if header.as_deref().map(str::trim_end) != Some(GENE_TREE_HEADER) {
        return Err(Error::Parse { line: 1, msg: format!("expected header `{GENE_TREE_HEADER}`") });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let n = i + 1;
        let parse_err = |msg: String| Error::Parse { line: n, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let topology: Topology = fields[0].parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let time = |s: &str| s.trim().parse::<f64>().map_err(|e| parse_err(format!("`{s}`: {e}")));
        let failed = match fields[3].trim() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(parse_err(format!("invalid failed flag `{other}`"))),
        };
        let g = GeneTree::new(topology, time(fields[1])?, time(fields[2])?, failed)
            .map_err(|e| parse_err(e.to_string()))?;
        out.push(g);
    }
    Ok(out)
}

pub fn write_estimates<W: Write>(mut w: W, estimates: &[Estimate]) -> Result<()> {
    writeln!(w, "{ESTIMATE_HEADER}")?;
    for e in estimates {
        let (c, r) = match e.divergence_times {
            Some((c, r)) => (fmt_real(c), fmt_real(r)),
            None => (String::new(), String::new()),
        };
        writeln!(w, "{},{},{c},{r},{}", e.method, e.topology.token(), e.tie)?;
    }
    Ok(())
}

pub fn write_rate_curve<W: Write>(mut w: W, curve: &[RatePoint]) -> Result<()> {
    writeln!(w, "{RATE_CURVE_HEADER}")?;
    for p in curve {
        let cols = [
            p.t,
            p.alpha_glass,
            p.alpha_rstar,
            p.alpha_steac,
            p.s_star_rstar,
            p.s_star_steac,
            asymptote(MethodGroup::Rstar, p.t, Regime::Small),
            asymptote(MethodGroup::Rstar, p.t, Regime::Large),
            asymptote(MethodGroup::Steac, p.t, Regime::Small),
            asymptote(MethodGroup::Steac, p.t, Regime::Large),
        ];
        let row: Vec<String> = cols.iter().map(|&x| fmt_real(x)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// One report row per result. `analytic_rate` is the decay rate of the
/// method's group at `t`.
pub fn write_experiment_report<W: Write>(
    mut w: W,
    t: f64,
    seed: u64,
    results: &[McResult],
) -> Result<()> {
    writeln!(w, "{EXPERIMENT_HEADER}")?;
    for r in results {
        let analytic = match r.method.group() {
            MethodGroup::Glass => crate::rates::alpha_glass(t)?,
            MethodGroup::Rstar => crate::rates::alpha_rstar(t)?.rate,
            MethodGroup::Steac => crate::rates::alpha_steac(t)?.rate,
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            fmt_real(t),
            r.loci,
            r.replicates,
            r.failures,
            fmt_real(r.p_hat),
            fmt_real(r.ci_low),
            fmt_real(r.ci_high),
            r.empirical_rate.map(fmt_real).unwrap_or_default(),
            fmt_real(analytic),
            seed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalescent::SpeciesTree;
    use crate::estimators::{glass_mt, rstar, MethodId, TieBreaker};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fmt_real_pads_to_twelve_digits() {
        assert_eq!(fmt_real(0.1), "1.00000000000e-1");
        assert_eq!(fmt_real(0.0), "0.00000000000e0");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        let third = fmt_real(1.0 / 3.0);
        assert_eq!(third.parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    proptest! {
        #[test]
        fn fmt_real_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = fmt_real(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap();
            prop_assert!(mantissa.chars().filter(char::is_ascii_digit).count() >= 12);
        }
    }

    #[test]
    fn gene_trees_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = SpeciesTree::new(0.2, 0.5).unwrap().sample_gene_trees(50, &mut rng);
        let mut buf = Vec::new();
        write_gene_trees(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("topology,t1,t2,failed\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_gene_trees(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn gene_tree_parse_errors() {
        let bad_header = "topo,t1,t2,failed\nAB_C,0.1,0.2,false\n";
        assert!(read_gene_trees(bad_header.as_bytes()).is_err());
        let bad_topology = "topology,t1,t2,failed\nAB_D,0.1,0.2,false\n";
        assert!(matches!(read_gene_trees(bad_topology.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let bad_order = "topology,t1,t2,failed\nAB_C,0.3,0.2,false\n";
        assert!(read_gene_trees(bad_order.as_bytes()).is_err());
        let ok = "topology,t1,t2,failed\nBC_A,1.5,2,1\n";
        let g = read_gene_trees(ok.as_bytes()).unwrap();
        assert_eq!(g[0].topology(), Topology::BcA);
        assert!(g[0].failed());
    }

    #[test]
    fn estimate_rows() {
        let data = vec![
            GeneTree::new(Topology::AbC, 0.25, 1.5, false).unwrap(),
            GeneTree::new(Topology::AbC, 1.25, 2.0, true).unwrap(),
        ];
        let g = glass_mt(&data, &mut TieBreaker::new(0)).unwrap();
        let r = rstar(&data, &mut TieBreaker::new(0)).unwrap();
        let mut buf = Vec::new();
        write_estimates(&mut buf, &[g, r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ESTIMATE_HEADER);
        assert_eq!(lines[1], "glass_mt,AB_C,2.50000000000e-1,1.50000000000e0,false");
        assert_eq!(lines[2], "rstar,AB_C,,,false");
        assert_eq!(MethodId::GlassMt.to_string(), "glass_mt");
    }

    #[test]
    fn rate_curve_columns() {
        let curve = crate::rates::rate_curve(0.5, 1.0, 3).unwrap();
        let mut buf = Vec::new();
        write_rate_curve(&mut buf, &curve).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 10);
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 10);
        }
    }

    #[test]
    fn experiment_report_rows() {
        let r = McResult::new(MethodId::Rstar, 20, 0, 100);
        let mut buf = Vec::new();
        write_experiment_report(&mut buf, 0.3, 42, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        assert_eq!(row[0], "rstar");
        assert_eq!(row[2], "20");
        assert_eq!(row[8], "");
        assert_eq!(row[10], "42");
    }
}
