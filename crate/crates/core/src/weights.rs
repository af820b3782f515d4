//! Muckenhoupt weights on a grid and numerical `A_2` characteristics.
//!
//! A weight is stored by its cell averages: sample `i` is the mean of `w`
//! over `[u_i - h/2, u_i + h/2]`, computed in closed form where possible.
//! Power weights with a negative exponent thus stay finite when the
//! singularity sits on a grid point, and interval means over whole cells are
//! exact.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::schrodinger::Grid;

/// Analytic description of a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightFamily {
    Constant,
    /// `|u - center|^exponent`, `exponent in (-1, 1)`.
    Power { center: f64, exponent: f64 },
    /// `exp(clamp(rate (u - offset), -clamp, clamp))`.
    ClampedExponential { rate: f64, clamp: f64, offset: f64 },
    /// `levels[k]` on `[breaks[k-1], breaks[k])`; one more level than breaks.
    PiecewiseStep { breaks: Vec<f64>, levels: Vec<f64> },
}

impl WeightFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightFamily::Constant => Ok(()),
            WeightFamily::Power { center, exponent } => {
                if !center.is_finite() || !(*exponent > -1.0 && *exponent < 1.0) {
                    return Err(Error::Config(format!("power weight needs a in (-1, 1), got {exponent}")));
                }
                Ok(())
            }
            WeightFamily::ClampedExponential { rate, clamp, offset } => {
                if !(rate.is_finite() && offset.is_finite() && *clamp > 0.0 && *clamp < 300.0) {
                    return Err(Error::Config(format!("invalid clamped exponential ({rate}, {clamp}, {offset})")));
                }
                Ok(())
            }
            WeightFamily::PiecewiseStep { breaks, levels } => {
                if levels.len() != breaks.len() + 1 {
                    return Err(Error::Config("step weight needs one more level than breaks".into()));
                }
                if levels.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                    return Err(Error::Config("step levels must be positive".into()));
                }
                if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("step breaks must be finite and increasing".into()));
                }
                Ok(())
            }
        }
    }

    /// `w(u)` pointwise (infinite at the center of a negative power).
    pub fn value(&self, u: f64) -> f64 {
        match self {
            WeightFamily::Constant => 1.0,
            WeightFamily::Power { center, exponent } => (u - center).abs().powf(*exponent),
            WeightFamily::ClampedExponential { rate, clamp, offset } => {
                (rate * (u - offset)).clamp(-clamp, *clamp).exp()
            }
            WeightFamily::PiecewiseStep { breaks, levels } => levels[breaks.partition_point(|&b| b <= u)],
        }
    }

    /// The family of `u -> w(u + s)`.
    pub fn translated(&self, s: f64) -> WeightFamily {
        match self {
            WeightFamily::Constant => WeightFamily::Constant,
            WeightFamily::Power { center, exponent } => WeightFamily::Power {
                center: center - s,
                exponent: *exponent,
            },
            WeightFamily::ClampedExponential { rate, clamp, offset } => WeightFamily::ClampedExponential {
                rate: *rate,
                clamp: *clamp,
                offset: offset - s,
            },
            WeightFamily::PiecewiseStep { breaks, levels } => WeightFamily::PiecewiseStep {
                breaks: breaks.iter().map(|b| b - s).collect(),
                levels: levels.clone(),
            },
        }
    }

    /// Points where the weight is not smooth; a weight whose features all
    /// leave the grid loses its structure under translation.
    pub fn features(&self) -> Vec<f64> {
        match self {
            WeightFamily::Constant => vec![],
            WeightFamily::Power { center, .. } => vec![*center],
            WeightFamily::ClampedExponential { rate, clamp, offset } => {
                if *rate == 0.0 {
                    vec![]
                } else {
                    let a = offset - clamp / rate;
                    let b = offset + clamp / rate;
                    vec![a.min(b), a.max(b)]
                }
            }
            WeightFamily::PiecewiseStep { breaks, .. } => breaks.clone(),
        }
    }

    /// Mean of `w^p` over `[a, b]` for `p = +-1`.
    pub fn mean_power(&self, p: f64, a: f64, b: f64) -> f64 {
        if let WeightFamily::Power { center, exponent } = self {
            let q = p * exponent + 1.0;
            let anti = |u: f64| {
                let d = u - center;
                d.signum() * d.abs().powf(q) / q
            };
            return (anti(b) - anti(a)) / (b - a);
        }
        let mut cuts = vec![a];
        cuts.extend(self.features().into_iter().filter(|&k| k > a && k < b));
        cuts.push(b);
        let rule = GaussLegendre::ten();
        let total: f64 = cuts
            .windows(2)
            .map(|w| rule.integrate(|u| self.value(u).powf(p), w[0], w[1]))
            .sum();
        total / (b - a)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFamily::Constant => write!(f, "constant"),
            WeightFamily::Power { center, exponent } => write!(f, "power:a={exponent}:center={center}"),
            WeightFamily::ClampedExponential { rate, clamp, offset } => {
                write!(f, "clamped-exp:rate={rate}:clamp={clamp}")?;
                if *offset != 0.0 {
                    write!(f, ":offset={offset}")?;
                }
                Ok(())
            }
            WeightFamily::PiecewiseStep { breaks, levels } => {
                write!(f, "step:breaks={}:levels={}", join(breaks), join(levels))
            }
        }
    }
}

impl FromStr for WeightFamily {
    type Err = Error;

    /// Parses ids such as `constant`, `power:a=0.3:center=0`,
    /// `clamped-exp:rate=1:clamp=2[:offset=0]`, `step:breaks=0:levels=1,10`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default();
        let mut keys = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("weight id '{s}': expected key=value, got '{p}'")))?;
            keys.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |k: &str, default: Option<f64>| -> Result<f64> {
            match keys.get(k) {
                Some(v) => v
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("weight id '{s}': bad number for {k}"))),
                None => default.ok_or_else(|| Error::Config(format!("weight id '{s}': missing {k}"))),
            }
        };
        let list = |k: &str| -> Result<Vec<f64>> {
            match keys.get(k) {
                Some(v) if v.is_empty() => Ok(vec![]),
                Some(v) => v
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("weight id '{s}': bad list for {k}")))
                    })
                    .collect(),
                None => Err(Error::Config(format!("weight id '{s}': missing {k}"))),
            }
        };
        let fam = match kind {
            "constant" => WeightFamily::Constant,
            "power" => WeightFamily::Power {
                exponent: num("a", None)?,
                center: num("center", Some(0.0))?,
            },
            "clamped-exp" => WeightFamily::ClampedExponential {
                rate: num("rate", None)?,
                clamp: num("clamp", None)?,
                offset: num("offset", Some(0.0))?,
            },
            "step" => WeightFamily::PiecewiseStep {
                breaks: list("breaks")?,
                levels: list("levels")?,
            },
            other => return Err(Error::Config(format!("unknown weight family '{other}'"))),
        };
        fam.validate()?;
        Ok(fam)
    }
}

/// Interval ladder for [`a2_characteristic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSweep {
    /// Shortest interval, in cells.
    pub min_cells: usize,
    /// Lengths per doubling; `1` is the dyadic ladder. Doubling this value
    /// gives a superset of lengths.
    pub per_octave: usize,
}

impl Default for IntervalSweep {
    fn default() -> Self {
        IntervalSweep {
            min_cells: 4,
            per_octave: 2,
        }
    }
}

impl IntervalSweep {
    pub fn refined(&self) -> IntervalSweep {
        IntervalSweep {
            per_octave: self.per_octave * 2,
            ..*self
        }
    }

    /// Interval lengths in cells, ascending, always ending with `count`.
    pub fn lengths(&self, count: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let k = self.per_octave.max(1) as f64;
        let mut j = 0;
        loop {
            let len = (self.min_cells as f64 * 2f64.powf(j as f64 / k)).round() as usize;
            if len >= count {
                break;
            }
            if out.last() != Some(&len) {
                out.push(len);
            }
            j += 1;
        }
        out.push(count);
        out
    }
}

/// Result of an interval sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2Estimate {
    pub value: f64,
    /// First cell and number of cells of the maximising interval.
    pub start: usize,
    pub cells: usize,
    /// The maximising interval in `u`.
    pub interval: (f64, f64),
}

/// A weight sampled on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Weight {
    family: WeightFamily,
    grid: Grid,
    samples: Vec<f64>,
    inverse_samples: Vec<f64>,
    a2: A2Estimate,
}

impl Weight {
    pub fn new(family: WeightFamily, grid: &Grid) -> Result<Weight> {
        Self::with_sweep(family, grid, IntervalSweep::default())
    }

    pub fn with_sweep(family: WeightFamily, grid: &Grid, sweep: IntervalSweep) -> Result<Weight> {
        family.validate()?;
        let h = grid.h();
        let cell = |i: usize, p: f64| {
            let u = grid.point(i);
            family.mean_power(p, u - 0.5 * h, u + 0.5 * h)
        };
        let samples: Vec<f64> = (0..grid.count()).map(|i| cell(i, 1.0)).collect();
        let inverse_samples: Vec<f64> = (0..grid.count()).map(|i| cell(i, -1.0)).collect();
        if samples.iter().chain(&inverse_samples).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::domain(format!("weight {family} is not positive and finite on the grid")));
        }
        let a2 = sweep_a2(grid, &samples, &inverse_samples, sweep);
        Ok(Weight {
            family,
            grid: *grid,
            samples,
            inverse_samples,
            a2,
        })
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn id(&self) -> String {
        self.family.to_string()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Cell means of `w`.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Cell means of `1/w`.
    pub fn inverse_samples(&self) -> &[f64] {
        &self.inverse_samples
    }

    pub fn a2_estimate(&self) -> f64 {
        self.a2.value
    }

    pub fn a2(&self) -> &A2Estimate {
        &self.a2
    }

    /// The same weight resampled on another grid.
    pub fn resampled(&self, grid: &Grid) -> Result<Weight> {
        Weight::new(self.family.clone(), grid)
    }
}

fn sweep_a2(grid: &Grid, w: &[f64], winv: &[f64], sweep: IntervalSweep) -> A2Estimate {
    let n = w.len();
    let prefix = |v: &[f64]| {
        let mut p = vec![0.0; v.len() + 1];
        for (i, x) in v.iter().enumerate() {
            p[i + 1] = p[i] + x;
        }
        p
    };
    let pw = prefix(w);
    let pv = prefix(winv);
    let lengths = sweep.lengths(n);
    let best = lengths
        .par_iter()
        .map(|&len| {
            let mut best = (f64::NEG_INFINITY, 0usize, len);
            for s in 0..=n - len {
                let aw = (pw[s + len] - pw[s]) / len as f64;
                let av = (pv[s + len] - pv[s]) / len as f64;
                let r = aw * av;
                if r > best.0 {
                    best = (r, s, len);
                }
            }
            best
        })
        // ties resolved towards the shorter, then leftmost interval
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && (b.2, b.1) < (a.2, a.1)) {
                    b
                } else {
                    a
                }
            },
        );
    let h = grid.h();
    let (value, start, cells) = best;
    A2Estimate {
        // Cauchy-Schwarz gives >= 1 exactly; rounding may land just below
        value: value.max(1.0),
        start,
        cells,
        interval: (grid.point(start) - 0.5 * h, grid.point(start + cells - 1) + 0.5 * h),
    }
}

/// `sup_I (mean_I w)(mean_I w^{-1})` over the swept intervals: a lower bound
/// for `[w]_{A_2}` that can only grow under refinement of the sweep.
pub fn a2_characteristic(w: &Weight, sweep: IntervalSweep) -> A2Estimate {
    sweep_a2(&w.grid, &w.samples, &w.inverse_samples, sweep)
}

/// Outcome of [`translate_weight`].
#[derive(Debug, Clone)]
pub struct Translation {
    pub weight: Weight,
    /// Set when a feature of the weight (center, clamp edge, step) moved off
    /// the grid.
    pub coverage_warning: Option<String>,
}

/// `u -> w(u + s)` on the same grid, with the `A_2` estimate recomputed.
pub fn translate_weight(w: &Weight, s: f64) -> Result<Translation> {
    let family = w.family.translated(s);
    let (lo, hi) = (w.grid.u_min(), w.grid.u_max());
    let inside = |x: &f64| *x >= lo && *x <= hi;
    let before = w.family.features().iter().filter(|x| inside(x)).count();
    let after = family.features().iter().filter(|x| inside(x)).count();
    let coverage_warning = (after < before).then(|| {
        format!(
            "translation by {s} moves {} feature(s) of {} off [{lo}, {hi}]",
            before - after,
            w.family
        )
    });
    Ok(Translation {
        weight: Weight::new(family, &w.grid)?,
        coverage_warning,
    })
}

/// The sweep set: constant; `|u - u0|^a` for `a in {-0.7, -0.3, 0.3, 0.7}`,
/// `u0 in {-2, 0, 3}`; two clamped exponentials; one two-level step.
pub fn registered_families() -> Vec<WeightFamily> {
    let mut out = vec![WeightFamily::Constant];
    for &center in &[-2.0, 0.0, 3.0] {
        for &exponent in &[-0.7, -0.3, 0.3, 0.7] {
            out.push(WeightFamily::Power { center, exponent });
        }
    }
    out.push(WeightFamily::ClampedExponential {
        rate: 1.0,
        clamp: 1.0,
        offset: 0.0,
    });
    out.push(WeightFamily::ClampedExponential {
        rate: 1.0,
        clamp: 3.0,
        offset: 0.0,
    });
    out.push(WeightFamily::PiecewiseStep {
        breaks: vec![0.0],
        levels: vec![1.0, 10.0],
    });
    out
}

/// [`registered_families`] sampled on `grid`, in that order.
pub fn registered_family(grid: &Grid) -> Result<Vec<Weight>> {
    registered_families().into_iter().map(|f| Weight::new(f, grid)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::aligned_range(-6.0, 6.0, 0.02).unwrap()
    }

    #[test]
    fn constant_weight_is_exactly_one() {
        let w = Weight::new(WeightFamily::Constant, &grid()).unwrap();
        assert_eq!(w.a2_estimate(), 1.0);
        let t = translate_weight(&w, 0.4).unwrap();
        assert_eq!(t.weight.a2_estimate(), 1.0);
        assert!(t.coverage_warning.is_none());
    }

    #[test]
    fn square_root_weight() {
        let w = Weight::new(
            WeightFamily::Power {
                center: 0.0,
                exponent: 0.5,
            },
            &grid(),
        )
        .unwrap();
        assert!(w.a2_estimate() >= 4.0 / 3.0 * (1.0 - 1e-3), "{}", w.a2_estimate());
        let (a, b) = w.a2().interval;
        assert!(a <= 0.0 && b >= 0.0, "maximiser ({a}, {b}) misses the center");
        // direct integral on [0, 1]
        let f = w.family();
        let direct = f.mean_power(1.0, 0.0, 1.0) * f.mean_power(-1.0, 0.0, 1.0);
        assert!((direct - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_maximiser_touches_center() {
        for fam in registered_families() {
            if let WeightFamily::Power { center, .. } = fam {
                let w = Weight::new(fam.clone(), &grid()).unwrap();
                let (a, b) = w.a2().interval;
                assert!(a <= center + 1e-12 && b >= center - 1e-12, "{fam}: ({a}, {b})");
            }
        }
    }

    #[test]
    fn clamped_exponential_grows_with_clamp() {
        let g = grid();
        let mut last = 1.0;
        for &b in &[0.5, 1.0, 2.0, 4.0] {
            let w = Weight::new(
                WeightFamily::ClampedExponential {
                    rate: 1.0,
                    clamp: b,
                    offset: 0.0,
                },
                &g,
            )
            .unwrap();
            assert!(w.a2_estimate().is_finite());
            assert!(w.a2_estimate() > last, "clamp {b}");
            last = w.a2_estimate();
        }
    }

    #[test]
    fn registry_shape() {
        let fams = registered_families();
        assert_eq!(fams.len(), 16);
        assert_eq!(fams, registered_families());
        let ws = registered_family(&grid()).unwrap();
        assert!(ws.iter().all(|w| w.a2_estimate() >= 1.0));
        for f in &fams {
            let back: WeightFamily = f.to_string().parse().unwrap();
            assert_eq!(&back, f);
        }
        assert!("power:a=1.5".parse::<WeightFamily>().is_err());
        assert!("wobble".parse::<WeightFamily>().is_err());
        assert_eq!(
            "power:a=0.3:center=0".parse::<WeightFamily>().unwrap(),
            WeightFamily::Power {
                center: 0.0,
                exponent: 0.3
            }
        );
    }

    #[test]
    fn translation_keeps_the_characteristic() {
        let g = grid();
        let w = Weight::new(
            WeightFamily::Power {
                center: 0.0,
                exponent: -0.3,
            },
            &g,
        )
        .unwrap();
        let same = translate_weight(&w, 0.0).unwrap();
        assert_eq!(same.weight.samples(), w.samples());
        let moved = translate_weight(&w, 50.0 * g.h()).unwrap();
        assert!(moved.coverage_warning.is_none());
        assert!((moved.weight.a2_estimate() - w.a2_estimate()).abs() < 1e-10 * w.a2_estimate());
        let gone = translate_weight(&w, 10.0).unwrap();
        assert!(gone.coverage_warning.is_some());
    }

    #[test]
    fn ladder_lengths() {
        let s = IntervalSweep::default();
        let l = s.lengths(600);
        assert_eq!(l[0], 4);
        assert_eq!(*l.last().unwrap(), 600);
        let r = s.refined().lengths(600);
        assert!(l.iter().all(|x| r.contains(x)));
    }

    proptest! {
        #[test]
        fn refinement_never_lowers_the_estimate(a in -0.9f64..0.9, c in -4.0f64..4.0) {
            let g = Grid::aligned_range(-6.0, 6.0, 0.05).unwrap();
            let w = Weight::new(WeightFamily::Power { center: c, exponent: a }, &g).unwrap();
            let s = IntervalSweep::default();
            let coarse = a2_characteristic(&w, s).value;
            let fine = a2_characteristic(&w, s.refined()).value;
            prop_assert!(fine >= coarse);
            prop_assert!(coarse >= 1.0);
        }
    }
}
