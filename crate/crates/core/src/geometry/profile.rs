//! Named analytic profile families and two-column CSV profiles.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Const(f64),
    /// scale·exp(amp·cos(freq·x))
    ExpCos { scale: f64, amp: f64, freq: f64 },
    /// scale·exp(amp·sin(freq·x))
    ExpSin { scale: f64, amp: f64, freq: f64 },
    /// mean + amp·cos(freq·x)
    Cos { mean: f64, amp: f64, freq: f64 },
    /// mean + amp·sin(freq·x)
    Sin { mean: f64, amp: f64, freq: f64 },
    Csv(PathBuf),
}

impl Profile {
    /// Parses `family:p1,p2[,p3]`, e.g. `exp_cos:0.7,0.1` or `csv:warp.csv`.
    pub fn parse(s: &str) -> Result<Profile> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let name = name.trim();
        if name == "csv" {
            return Ok(Profile::Csv(PathBuf::from(args.trim())));
        }
        let nums: Vec<f64> = if args.trim().is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| Error::Profile(format!("bad number '{a}' in '{s}'"))))
                .collect::<Result<_>>()?
        };
        let need = |lo: usize, hi: usize| -> Result<()> {
            if nums.len() < lo || nums.len() > hi {
                return Err(Error::Profile(format!("'{name}' takes {lo}..={hi} parameters, got {}", nums.len())));
            }
            Ok(())
        };
        let freq = nums.get(2).copied().unwrap_or(1.0);
        Ok(match name {
            "const" => {
                need(1, 1)?;
                Profile::Const(nums[0])
            }
            "exp_cos" => {
                need(2, 3)?;
                Profile::ExpCos { scale: nums[0], amp: nums[1], freq }
            }
            "exp_sin" => {
                need(2, 3)?;
                Profile::ExpSin { scale: nums[0], amp: nums[1], freq }
            }
            "cos" => {
                need(2, 3)?;
                Profile::Cos { mean: nums[0], amp: nums[1], freq }
            }
            "sin" => {
                need(2, 3)?;
                Profile::Sin { mean: nums[0], amp: nums[1], freq }
            }
            other => return Err(Error::Profile(format!("unknown profile family '{other}'"))),
        })
    }

    /// Resolves relative CSV paths against `base`.
    pub fn with_base(self, base: &Path) -> Profile {
        match self {
            Profile::Csv(p) if p.is_relative() => Profile::Csv(base.join(p)),
            other => other,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<ScalarField> {
        let v = match self {
            Profile::Const(c) => vec![*c; grid.len()],
            Profile::ExpCos { scale, amp, freq } => grid.sample(|x| scale * (amp * (freq * x).cos()).exp()),
            Profile::ExpSin { scale, amp, freq } => grid.sample(|x| scale * (amp * (freq * x).sin()).exp()),
            Profile::Cos { mean, amp, freq } => grid.sample(|x| mean + amp * (freq * x).cos()),
            Profile::Sin { mean, amp, freq } => grid.sample(|x| mean + amp * (freq * x).sin()),
            Profile::Csv(p) => load_csv(p, grid)?.values,
        };
        ScalarField::new(v)
    }
}

/// Reads (x, value) rows and resamples periodically by linear interpolation.
pub fn load_csv(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Profile(format!("{}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Profile(format!("{}: {e}", path.display())))?;
        if rec.len() != 2 {
            return Err(Error::Profile(format!("{}: row {} has {} columns", path.display(), k + 1, rec.len())));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(v)) => pts.push((x, v)),
            _ if k == 0 => continue,
            _ => return Err(Error::Profile(format!("{}: row {} is not numeric", path.display(), k + 1))),
        }
    }
    resample(&pts, grid)
}

pub fn resample(points: &[(f64, f64)], grid: &Grid) -> Result<ScalarField> {
    if points.is_empty() {
        return Err(Error::Profile("empty profile".into()));
    }
    let p = grid.period();
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(x, v)| (x.rem_euclid(p), v)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-14 * p);
    let m = pts.len();
    let out = (0..grid.len())
        .map(|j| {
            let x = grid.x(j);
            let k = pts.partition_point(|q| q.0 <= x);
            let (x0, v0) = if k == 0 { (pts[m - 1].0 - p, pts[m - 1].1) } else { pts[k - 1] };
            let (x1, v1) = if k == m { (pts[0].0 + p, pts[0].1) } else { pts[k] };
            if x1 - x0 <= 0.0 {
                v0
            } else {
                v0 + (v1 - v0) * (x - x0) / (x1 - x0)
            }
        })
        .collect();
    ScalarField::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Order;
    use std::io::Write;

    #[test]
    fn parse_families() {
        assert_eq!(Profile::parse("const:2").unwrap(), Profile::Const(2.0));
        assert_eq!(Profile::parse("exp_cos:0.7, 0.1").unwrap(), Profile::ExpCos { scale: 0.7, amp: 0.1, freq: 1.0 });
        assert!(Profile::parse("exp_cos:1").is_err());
        assert!(Profile::parse("wobble:1").is_err());
    }

    #[test]
    fn csv_resampling_is_linear_and_periodic() {
        let grid = Grid::periodic(16, Order::Two).unwrap();
        let dir = std::env::temp_dir().join(format!("conflab_profile_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x,value").unwrap();
        for k in 0..8 {
            let x = k as f64 * std::f64::consts::PI / 4.0;
            writeln!(f, "{x},{}", 2.0 + x.cos()).unwrap();
        }
        drop(f);
        let s = load_csv(&path, &grid).unwrap();
        for j in (0..16).step_by(2) {
            assert!((s[j] - (2.0 + grid.x(j).cos())).abs() < 1e-12);
        }
        let mid = 0.5 * ((2.0 + grid.x(14).cos()) + 3.0);
        assert!((s[15] - mid).abs() < 1e-12);
        std::fs::remove_dir_all(&dir).ok();
    }
}
