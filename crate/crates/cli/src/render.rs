//! TSV rendering. Every float goes through [`fmt17`] so reruns are
//! byte-identical and values survive a parse round trip.

use wmtest::estimator::SmoothedWeights;
use wmtest::hypotheses::{fmt17, WeightVector};
use wmtest::simulate::{LinkageStudy, SurfaceCell};

/// `# key = value` lines, one per pair.
pub fn comments(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (key, value) in pairs {
        out.push_str("# ");
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(value);
        out.push('\n');
    }
    out
}

/// Two-column `quantity<TAB>value` table of named scalars.
pub fn kv(rows: &[(&str, f64)]) -> String {
    let mut out = String::from("quantity\tvalue\n");
    for (name, value) in rows {
        out.push_str(name);
        out.push('\t');
        out.push_str(&fmt17(*value));
        out.push('\n');
    }
    out
}

/// Grid table: header names, then one row per grid point.
pub fn curve(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

/// One row per (epsilon, B) cell.
pub fn surface(cells: &[SurfaceCell]) -> String {
    let mut out = String::from("epsilon\tb\tmean_true_discoveries\tmean_power\tfwer\n");
    for c in cells {
        out.push_str(&fmt17(c.epsilon));
        out.push('\t');
        out.push_str(&fmt17(c.b));
        out.push('\t');
        out.push_str(&fmt17(c.mean_true_discoveries));
        out.push('\t');
        out.push_str(&fmt17(c.mean_power));
        out.push('\t');
        out.push_str(&fmt17(c.fwer));
        out.push('\n');
    }
    out
}

/// Per-position dump of a synthetic study: the trace everywhere, and the
/// weight band and association statistic at positions carrying a test
/// (NA elsewhere).
pub fn study_dump(study: &LinkageStudy, weights: &WeightVector) -> String {
    let total = study.trace.len();
    let mut weight_at = vec![None; total];
    let mut stat_at = vec![None; total];
    for (j, &pos) in study.assoc_position.iter().enumerate() {
        weight_at[pos] = Some(weights.get(j));
        stat_at[pos] = Some(study.assoc_stats[j]);
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), fmt17);

    let mut out = String::from("position\tchrom\ttrace\tweight_band\tassoc_stat\n");
    for pos in 0..total {
        out.push_str(&pos.to_string());
        out.push('\t');
        out.push_str(&study.chrom_of_position[pos].to_string());
        out.push('\t');
        out.push_str(&fmt17(study.trace[pos]));
        out.push('\t');
        out.push_str(&opt(weight_at[pos]));
        out.push('\t');
        out.push_str(&opt(stat_at[pos]));
        out.push('\n');
    }
    out
}

/// Per-group report of the estimate-then-weight pipeline.
pub fn group_report(sw: &SmoothedWeights) -> String {
    let mut out = String::from("group_id\tr\ty\ts2\tpi_hat\txi_hat\traw_w\tsmoothed_w\n");
    for (i, est) in sw.estimates.iter().enumerate() {
        out.push_str(&est.group_id.to_string());
        out.push('\t');
        out.push_str(&est.r.to_string());
        out.push('\t');
        out.push_str(&fmt17(est.y));
        out.push('\t');
        out.push_str(&fmt17(est.s2));
        out.push('\t');
        out.push_str(&fmt17(est.pi_hat.get()));
        out.push('\t');
        out.push_str(&fmt17(est.xi_hat));
        out.push('\t');
        out.push_str(&fmt17(sw.raw[i]));
        out.push('\t');
        out.push_str(&fmt17(sw.smoothed[i]));
        out.push('\n');
    }
    out
}
