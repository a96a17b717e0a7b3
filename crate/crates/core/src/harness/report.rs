use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::FORMATS;
use super::run::{Payload, ResultSet};
use super::HarnessError;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

/// Writes every requested format into `dir` and returns the files written.
///
/// Apart from the provenance timestamp the output depends only on `rs`.
pub fn emit_report(rs: &ResultSet, formats: &[String], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if let Some(bad) = formats.iter().find(|f| !FORMATS.contains(&f.as_str())) {
        return Err(HarnessError::Validation(vec![format!("unknown output format {bad:?}")]));
    }
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        files.push(path);
        Ok(())
    };
    for f in formats {
        match f.as_str() {
            "json" => {
                put("results.json", to_json(rs)?)?;
                put("summary.json", to_json(&rs.summary)?)?;
            }
            "csv" => put("results.csv", csv(&rs.payload))?,
            "table" => put("table.txt", table(rs))?,
            "plot" => put("plot.dat", plot(&rs.payload))?,
            _ => unreachable!(),
        }
    }
    Ok(files)
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, HarnessError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| HarnessError::Io(e.to_string()))
}

/// Reads a `results.json` written by [`emit_report`].
pub fn load_results(path: &Path) -> Result<ResultSet, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Validation(vec![format!("{}: {e}", path.display())]))
}

fn csv(p: &Payload) -> String {
    let mut s = String::new();
    match p {
        Payload::Hits(h) => {
            s.push_str("trial,n,hits,normalizer,ratio\n");
            for t in &h.trials {
                for c in &t.checkpoints {
                    writeln!(s, "{},{},{},{},{}", t.trial, c.n, c.hits, c.normalizer, c.ratio).unwrap();
                }
            }
        }
        Payload::Classification(c) => {
            s.push_str("n,partial_sum,strengthened_sum\n");
            for (i, &(n, v)) in c.partial_sums.iter().enumerate() {
                let st = c.strengthened_sums.as_ref().and_then(|x| x.get(i)).map(|x| x.1);
                writeln!(s, "{n},{v},{}", opt(st)).unwrap();
            }
        }
        Payload::Entropy(e) => {
            s.push_str("trial,value\n");
            if e.trial_values.is_empty() {
                writeln!(s, "0,{}", e.value).unwrap();
            }
            for (i, v) in e.trial_values.iter().enumerate() {
                writeln!(s, "{i},{v}").unwrap();
            }
        }
        Payload::Bounds(b) => {
            s.push_str("formula,grid_lower,hausdorff_lower,upper\n");
            for x in &b.bounds {
                writeln!(s, "{},{},{},{}", x.formula, opt(x.grid_lower), opt(x.hausdorff_lower), opt(x.upper)).unwrap();
            }
            for &(k, v) in &b.kappa_table {
                writeln!(s, "kappa={k},,{v},").unwrap();
            }
        }
        Payload::Cantor(c) => {
            s.push_str("level,size,k,depth,alpha,beta,gamma,delta\n");
            for (i, l) in c.stage.levels.iter().enumerate() {
                writeln!(s, "{},{},{},{},{},{},{},{}", i + 1, l.size, l.k, l.depth, l.alpha, l.beta, l.gamma, l.delta)
                    .unwrap();
            }
        }
        Payload::Grid(g) => {
            s.push_str("k,n,ball_mass,union_mass,ratio\n");
            for q in &g.points {
                writeln!(s, "{},{},{},{},{}", q.k, q.n, q.ball_mass, q.union_mass, q.ratio).unwrap();
            }
        }
    }
    s
}

fn table(rs: &ResultSet) -> String {
    let mut s = String::new();
    let c = &rs.config;
    writeln!(s, "experiment  {}", c.experiment.name()).unwrap();
    writeln!(s, "map         {}", serde_json::to_string(&c.map).unwrap()).unwrap();
    writeln!(s, "seed        {}", rs.provenance.seed).unwrap();
    let m = &rs.summary;
    if let Some(mean) = m.mean {
        writeln!(s, "mean        {mean:.6}").unwrap();
    }
    if let Some(se) = m.stderr {
        writeln!(s, "stderr      {se:.6}").unwrap();
    }
    if let Some((lo, hi)) = m.ci95 {
        writeln!(s, "ci95        [{lo:.6}, {hi:.6}]").unwrap();
    }
    if let Some(v) = m.verdict {
        writeln!(s, "verdict     {}", serde_json::to_string(&v).unwrap().trim_matches('"')).unwrap();
    }
    if let Some(v) = m.value {
        writeln!(s, "value       {v:.6}").unwrap();
    }
    match &rs.payload {
        Payload::Bounds(b) => {
            writeln!(s, "\n{:<28} {:>12} {:>12} {:>12}", "formula", "grid", "hausdorff", "upper").unwrap();
            for x in &b.bounds {
                let f = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.6}"));
                writeln!(s, "{:<28} {:>12} {:>12} {:>12}", x.formula, f(x.grid_lower), f(x.hausdorff_lower), f(x.upper))
                    .unwrap();
            }
        }
        Payload::Cantor(c) => {
            writeln!(s, "\nnesting violations {}", c.stage.nesting_violations).unwrap();
            writeln!(s, "nu sums exact      {}", c.stage.nu_level_sums_exact && c.stage.nu_parent_sums_exact).unwrap();
            if let Some(f) = &c.frostman {
                writeln!(s, "frostman gamma     {:.6} (cap {})", f.gamma, f.cap).unwrap();
            }
            if let Some(e) = &c.frostman_error {
                writeln!(s, "frostman           {e}").unwrap();
            }
        }
        _ => {}
    }
    s
}

/// Whitespace-separated columns for gnuplot and friends.
fn plot(p: &Payload) -> String {
    let mut s = String::new();
    match p {
        Payload::Hits(h) => {
            s.push_str("# n mean_ratio\n");
            let k = h.trials.first().map_or(0, |t| t.checkpoints.len());
            for i in 0..k {
                let n = h.trials[0].checkpoints[i].n;
                let mean = h.trials.iter().map(|t| t.checkpoints[i].ratio).sum::<f64>() / h.trials.len() as f64;
                writeln!(s, "{n} {mean}").unwrap();
            }
        }
        Payload::Classification(c) => {
            s.push_str("# n partial_sum\n");
            for (n, v) in &c.partial_sums {
                writeln!(s, "{n} {v}").unwrap();
            }
        }
        Payload::Entropy(e) => {
            s.push_str("# trial value\n");
            for (i, v) in e.trial_values.iter().enumerate() {
                writeln!(s, "{i} {v}").unwrap();
            }
        }
        Payload::Bounds(b) => {
            s.push_str("# kappa lower\n");
            for (k, v) in &b.kappa_table {
                writeln!(s, "{k} {v}").unwrap();
            }
        }
        Payload::Cantor(c) => {
            s.push_str("# level depth alpha beta gamma delta\n");
            for (i, l) in c.stage.levels.iter().enumerate() {
                writeln!(s, "{} {} {} {} {} {}", i + 1, l.depth, l.alpha, l.beta, l.gamma, l.delta).unwrap();
            }
        }
        Payload::Grid(g) => {
            s.push_str("# k ratio\n");
            for q in &g.points {
                writeln!(s, "{} {}", q.k, q.ratio).unwrap();
            }
        }
    }
    s
}
