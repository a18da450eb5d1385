//! Side-by-side pushforward statistics of the trained MMD map and the
//! Sinkhorn barycentric map on the same data.

use std::fmt::Write as _;
use std::time::Instant;

use crate::config::{Method, RunConfig};
use crate::error::{Error, Result};
use crate::sample::SampleSet;
use crate::sinkhorn::{
    barycentric_map, cost_matrix, median_entry, sinkhorn_solve, uniform, SinkhornOptions,
};
use crate::train::train;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub data_size: usize,
    /// Sinkhorn regularization; `None` for the MMD map.
    pub epsilon: Option<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub runtime_seconds: f64,
}

fn check_size(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        let mib = (n as f64) * (n as f64) * 8.0 * 3.0 / (1024.0 * 1024.0);
        return Err(Error::config(
            "compare.sizes",
            format!(
                "size {n} exceeds max_points {cap}; dense Sinkhorn at this size needs about {mib:.0} MiB"
            ),
        ));
    }
    Ok(())
}

/// Runs every configured method at every configured size.
///
/// Source and target data for size `n` are the run's `[source]`/`[target]`
/// distributions drawn with `n` points and their configured seeds.
pub fn compare_runs(run: &RunConfig) -> Result<Vec<ComparisonRow>> {
    let cfg = &run.compare;
    for &n in &cfg.sizes {
        check_size(n, cfg.max_points)?;
    }
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let source = run.source.with_n_and_seed(n, run.source.seed()).generate()?;
        let target = run.target.with_n_and_seed(n, run.target.seed()).generate()?;
        for &method in &cfg.methods {
            let started = Instant::now();
            let (epsilon, images) = match method {
                Method::Sinkhorn => {
                    let (eps, img) = sinkhorn_images(run, &source, &target)?;
                    (Some(eps), img)
                }
                Method::Mmd => {
                    let mut train_cfg = run.train.clone();
                    if let Some(e) = cfg.mmd_epochs {
                        train_cfg.epochs = e;
                    }
                    let out = train(&train_cfg, &source, &target)?;
                    (None, out.params.forward_batch(&source)?)
                }
            };
            rows.push(ComparisonRow {
                method,
                data_size: n,
                epsilon,
                mean: images.mean()?,
                sd: images.std_dev()?,
                runtime_seconds: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

/// Barycentric images of `source` under the Sinkhorn plan, with the
/// regularization used.
pub fn sinkhorn_images(
    run: &RunConfig,
    source: &SampleSet,
    target: &SampleSet,
) -> Result<(f64, SampleSet)> {
    let cfg = &run.compare;
    let cost = cost_matrix(source, target, &run.train.cost)?;
    let epsilon = match cfg.epsilon {
        Some(e) => e,
        None => cfg.epsilon_scale * median_entry(&cost)?,
    };
    let opts = SinkhornOptions {
        epsilon,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        log_domain: cfg.log_domain,
    };
    let coupling = sinkhorn_solve(&cost, &uniform(source.len()), &uniform(target.len()), &opts)?;
    Ok((epsilon, barycentric_map(&coupling, target)?))
}

/// CSV with header `method,data_size,epsilon,mean0,..,sd0,..,runtime_seconds`.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let dim = rows.first().map_or(2, |r| r.mean.len());
    let mut out = String::from("method,data_size,epsilon");
    for i in 0..dim {
        let _ = write!(out, ",mean{i}");
    }
    for i in 0..dim {
        let _ = write!(out, ",sd{i}");
    }
    out.push_str(",runtime_seconds\n");
    for r in rows {
        let _ = write!(out, "{},{},", r.method.name(), r.data_size);
        if let Some(e) = r.epsilon {
            let _ = write!(out, "{e:e}");
        }
        for v in r.mean.iter().chain(&r.sd) {
            let _ = write!(out, ",{v:e}");
        }
        let _ = writeln!(out, ",{:.3}", r.runtime_seconds);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(sizes: &str, methods: &str) -> RunConfig {
        let text = format!(
            r#"
[source]
family = "isotropic_gaussian"
n = 10
seed = 1
[target]
family = "isotropic_gaussian"
n = 10
mean = [5.0, 5.0]
seed = 2
[train]
epochs = 3
[compare]
sizes = {sizes}
methods = {methods}
max_points = 300
"#
        );
        RunConfig::from_toml(&text, &[]).unwrap()
    }

    #[test]
    fn size_cap_is_a_config_error() {
        let c = config("[50, 400]", "[\"sinkhorn\"]");
        match compare_runs(&c) {
            Err(Error::Config { field, message }) => {
                assert_eq!(field, "compare.sizes");
                assert!(message.contains("MiB"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rows_and_csv_shape() {
        let c = config("[20, 30]", "[\"sinkhorn\", \"mmd\"]");
        let rows = compare_runs(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].method, Method::Sinkhorn);
        assert!(rows[0].epsilon.is_some());
        assert!(rows[1].epsilon.is_none());
        let csv = comparison_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,data_size,epsilon,mean0,mean1,sd0,sd1,runtime_seconds"
        );
        assert!(lines.next().unwrap().starts_with("sinkhorn,20,"));
        assert!(lines.next().unwrap().starts_with("mmd,20,,"));
    }
}
