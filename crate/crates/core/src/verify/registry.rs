//! The estimate registry.

use std::sync::Arc;

use super::layout;
use super::{EstimateSpec, Expectation, Lhs, Region, Rhs, Sample, Source, Suite};
use crate::kernels::{cutoff, cutoff_prime};
use crate::special::gamma;

/// Off-diagonal threshold separating the near-diagonal case.
const C: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Case {
    Near,
    Positive,
    Mixed,
    Negative,
}

impl Case {
    const ALL: [Case; 4] = [Case::Near, Case::Positive, Case::Mixed, Case::Negative];

    fn of(u: f64, v: f64) -> Case {
        if (u - v).abs() <= C {
            Case::Near
        } else if u > 0.0 && v > 0.0 {
            Case::Positive
        } else if u < 0.0 && v < 0.0 {
            Case::Negative
        } else {
            Case::Mixed
        }
    }

    fn number(self) -> usize {
        self as usize + 1
    }
}

fn region(f: impl Fn(&[f64; 3]) -> bool + Send + Sync + 'static) -> Region {
    Arc::new(f)
}

fn lhs(f: impl Fn(&Sample) -> f64 + Send + Sync + 'static) -> Lhs {
    Arc::new(f)
}

fn rhs(f: impl Fn(&[f64; 3]) -> f64 + Send + Sync + 'static) -> Rhs {
    Arc::new(f)
}

fn field(i: usize) -> Lhs {
    lhs(move |s| s.record[i])
}

fn spec(id: String, anchor: &str, suite: Suite, source: Source, region: Region, lhs: Lhs, rhs: Rhs) -> EstimateSpec {
    EstimateSpec {
        id,
        anchor: anchor.to_string(),
        suite,
        source,
        region,
        lhs,
        rhs,
        expected: Expectation::Pass,
        notes: Vec::new(),
    }
}

/// Majorant of the t-kernels at `(t, u, v)`.
fn t_kernel_bound(case: Case, zero_zero: bool, t: f64, u: f64, v: f64) -> f64 {
    let d = (u - v).abs();
    match case {
        Case::Near => 1.0,
        Case::Positive => (-(u + v) / 2.0).exp(),
        Case::Mixed => (-u.max(v).exp() / 2.0 - t * u.min(v).abs()).exp(),
        Case::Negative if zero_zero => (-t * d).exp(),
        Case::Negative => (t * (u + v)).exp() + ((-u.abs()).exp() + (-v.abs()).exp()) * (-t * d).exp(),
    }
}

/// Majorant of the t-integrated kernels at `(u, v)`.
fn integrated_bound(case: Case, zero_zero: bool, u: f64, v: f64) -> f64 {
    let d = (u - v).abs();
    match case {
        Case::Near => 1.0,
        Case::Positive => (-(u + v) / 2.0).exp(),
        Case::Mixed => (-u.max(v).exp() / 2.0).exp() / (u.min(v).abs() + 1.0),
        Case::Negative if zero_zero => 1.0 / (d + 1.0),
        Case::Negative => 1.0 / (u.abs() + v.abs() + 1.0) + ((-u.abs()).exp() + (-v.abs()).exp()) / (d + 1.0),
    }
}

fn small_t_note() -> String {
    "t is sampled down to 1/80 (about 1/167 on the refined lattice); smaller t is extrapolated".into()
}

fn bessel_specs(out: &mut Vec<EstimateSpec>) {
    out.push(spec(
        "bessel-bounded".into(),
        "eq:1",
        Suite::Bessel,
        Source::BesselJ,
        region(|_| true),
        field(0),
        rhs(|_| 1.0),
    ));
    out.push(spec(
        "bessel-landau".into(),
        "eq:4",
        Suite::Bessel,
        Source::BesselJ,
        region(|p| p[0] > 0.0),
        field(0),
        rhs(|p| p[1].powf(-1.0 / 3.0)),
    ));
    out.push(spec(
        "bessel-small-argument".into(),
        "eq:7",
        Suite::Bessel,
        Source::BesselJ,
        region(|_| true),
        field(0),
        rhs(|p| (p[0] * (0.5 * p[1]).ln()).exp() / gamma(p[0] + 1.0)),
    ));
    for n in 0..=4usize {
        let nf = n as f64;
        out.push(spec(
            format!("elementary-n{n}"),
            "eq:3",
            Suite::Bessel,
            Source::Elementary,
            region(move |p| p[0] == nf),
            lhs(move |s| {
                let (z0, z) = (s.point[1], s.point[2]);
                let pow = if n == 0 { 1.0 } else { z.powi(n as i32) };
                pow * (z0 - z).exp()
            }),
            rhs(move |p| (1.0 + p[1]).powi(n as i32)),
        ));
    }

    let i = layout::IK_I;
    let k = layout::IK_K;
    out.push(spec(
        "lm5-i-upper".into(),
        "lm:5",
        Suite::Bessel,
        Source::BesselIk,
        region(|p| p[0] > 0.0),
        lhs(move |s| s.record[i] / s.point[1].powf(s.point[0])),
        rhs(|_| 1.0),
    ));
    out.push(spec(
        "lm5-i-lower".into(),
        "lm:5",
        Suite::Bessel,
        Source::BesselIk,
        region(|p| p[0] > 0.0),
        lhs(move |s| s.point[1].powf(s.point[0]) / s.record[i]),
        rhs(|_| 1.0),
    ));
    out.push(spec(
        "lm5-k-upper".into(),
        "lm:5",
        Suite::Bessel,
        Source::BesselIk,
        region(|p| p[0] > 0.25 && p[0] < 4.0),
        lhs(move |s| s.record[k] * s.point[1].powf(s.point[0])),
        rhs(|_| 1.0),
    ));
    out.push(spec(
        "lm5-k-lower".into(),
        "lm:5",
        Suite::Bessel,
        Source::BesselIk,
        region(|p| p[0] > 0.25 && p[0] < 4.0),
        lhs(move |s| s.point[1].powf(-s.point[0]) / s.record[k]),
        rhs(|_| 1.0),
    ));
    out.push(spec(
        "lm5-k-small-order".into(),
        "lm:5",
        Suite::Bessel,
        Source::BesselIk,
        region(|p| p[0] > 0.0 && p[0] < 0.5),
        lhs(move |s| s.record[k] * s.point[1].powf(1.0 - s.point[0])),
        rhs(|_| 1.0),
    ));

    // Products: p = (t, ln x, ln y).
    let lm1 = |p: &[f64; 3], n: usize| {
        let (x, y) = (p[1].exp(), p[2].exp());
        let d = y - x;
        (p[0] + 1.0) * (1.0 + d).powi(n as i32 + 1) * (-d).exp() / (0.5 * (p[1] + p[2])).exp()
    };
    for n in 0..=2 {
        out.push(spec(
            format!("lm1-eq5-n{n}"),
            "lm:1 eq:5",
            Suite::Bessel,
            Source::Product,
            region(|_| true),
            field(layout::product_p(n)),
            rhs(move |p| lm1(p, n)),
        ));
        out.push(spec(
            format!("lm1-eq6-n{n}"),
            "lm:1 eq:6",
            Suite::Bessel,
            Source::Product,
            region(|_| true),
            field(layout::product_q(n)),
            rhs(move |p| (p[1].exp() + p[2].exp()) * lm1(p, n)),
        ));
    }
    // Majorant with c = 1, eps = 1/4.
    let lm2 = |p: &[f64; 3]| (p[0] * (p[1] + p[2]) - 0.75 * (p[2].exp() - p[1].exp())).exp();
    let far = |p: &[f64; 3]| p[2].exp() - p[1].exp() >= 1.0 - 1e-12;
    for n in 0..=2 {
        out.push(spec(
            format!("lm2-first-n{n}"),
            "lm:2",
            Suite::Bessel,
            Source::Product,
            region(far),
            field(layout::product_p(n)),
            rhs(lm2),
        ));
        out.push(spec(
            format!("lm2-second-n{n}"),
            "lm:2",
            Suite::Bessel,
            Source::Product,
            region(far),
            field(layout::product_q(n)),
            rhs(move |p| (p[1].exp() + p[2].exp()) * lm2(p)),
        ));
    }

    let mut neg = spec(
        "neg-lm1-eq5-weak".into(),
        "lm:1 eq:5",
        Suite::Bessel,
        Source::Product,
        region(|_| true),
        field(layout::product_p(0)),
        rhs(|p| (-2.0 * (p[2].exp() - p[1].exp())).exp()),
    );
    neg.expected = Expectation::Fail;
    neg.notes.push("negative control: decay rate doubled".into());
    out.push(neg);
}

fn kernel_specs(out: &mut Vec<EstimateSpec>) {
    for case in Case::ALL {
        for j in 0..2 {
            for n in 0..=2 {
                let zz = n == 0 && j == 0;
                let anchor = if zz { "lm:3 est_S_00" } else { "lm:3 est_S_nj" };
                let mut s = spec(
                    format!("lm3-case{}-n{n}-j{j}", case.number()),
                    anchor,
                    Suite::Kernels,
                    Source::TKernel,
                    region(move |p| Case::of(p[1], p[2]) == case),
                    field(layout::t_kernel(j, n)),
                    rhs(move |p| t_kernel_bound(case, zz, p[0], p[1], p[2])),
                );
                if case == Case::Negative {
                    s.notes.push(small_t_note());
                }
                out.push(s);
            }
        }
    }
    for case in Case::ALL {
        for j in 0..2 {
            for n in 0..=2 {
                let zz = n == 0 && j == 0;
                out.push(spec(
                    format!("cor1-case{}-n{n}-j{j}", case.number()),
                    "cor:1 eq:12",
                    Suite::Kernels,
                    Source::Integrated,
                    region(move |p| Case::of(p[0], p[1]) == case),
                    field(layout::integrated(j, n)),
                    rhs(move |p| integrated_bound(case, zz, p[0], p[1])),
                ));
            }
        }
    }
    for case in Case::ALL {
        out.push(spec(
            format!("prop7-k2-case{}", case.number()),
            "prop:7 eq:12_K2",
            Suite::Kernels,
            Source::Integrated,
            region(move |p| Case::of(p[0], p[1]) == case),
            field(layout::K2),
            rhs(move |p| integrated_bound(case, false, p[0], p[1])),
        ));
    }

    let negative = |p: &[f64; 3]| p[0] < 0.0 && p[1] < 0.0;
    let off_negative = |p: &[f64; 3]| p[0] < 0.0 && p[1] < 0.0 && p[0] != p[1];
    let ordered = |p: &[f64; 3]| p[0] < p[1] && p[1] < 0.0;
    let dist2 = |p: &[f64; 3]| 1.0 / (1.0 + (p[0] - p[1]).powi(2));

    out.push(spec(
        "stanker-size-K1".into(),
        "eq:StanKer",
        Suite::Kernels,
        Source::Integrated,
        region(off_negative),
        field(layout::K1),
        rhs(|p| 1.0 / (p[0] - p[1]).abs()),
    ));
    let mut grad = spec(
        "stanker-grad-K1".into(),
        "eq:StanKer",
        Suite::Kernels,
        Source::Integrated,
        region(off_negative),
        lhs(|s| s.record[layout::K1_DU].abs() + s.record[layout::K1_DV].abs()),
        rhs(|p| (p[0] - p[1]).powi(-2)),
    );
    grad.notes.push("partial derivatives from the analytic t-integrals".into());
    out.push(grad);

    out.push(spec(
        "prop7-s01-size".into(),
        "prop:7 eq:14",
        Suite::Kernels,
        Source::Integrated,
        region(negative),
        field(layout::S01),
        rhs(|p| 1.0 / ((p[0] - p[1]).abs() + 1.0)),
    ));
    out.push(spec(
        "prop7-s02-size".into(),
        "prop:7 S0012",
        Suite::Kernels,
        Source::Integrated,
        region(negative),
        field(layout::S02),
        rhs(|p| 1.0 / (p[0].abs() + p[1].abs() + 1.0)),
    ));
    out.push(spec(
        "prop7-s01-du".into(),
        "prop:7 eq:15",
        Suite::Kernels,
        Source::Integrated,
        region(ordered),
        field(layout::S01_DU),
        rhs(move |p| (2.0 * p[0]).exp() + dist2(p)),
    ));
    out.push(spec(
        "prop7-s01-dv".into(),
        "prop:7 eq:16",
        Suite::Kernels,
        Source::Integrated,
        region(ordered),
        field(layout::S01_DV),
        rhs(move |p| p[1].exp() + dist2(p)),
    ));
    let cone = move |p: &[f64; 3]| ordered(p) && cutoff(p[0] / p[1]) != 0.0;
    let cone_rhs = |p: &[f64; 3]| (1.0 + (p[0] - p[1]).abs()).powi(-2);
    out.push(spec(
        "prop7-s01-du-cone".into(),
        "prop:7 eq:17",
        Suite::Kernels,
        Source::Integrated,
        region(cone),
        field(layout::S01_DU),
        rhs(cone_rhs),
    ));
    out.push(spec(
        "prop7-s01-dv-cone".into(),
        "prop:7 eq:17",
        Suite::Kernels,
        Source::Integrated,
        region(cone),
        field(layout::S01_DV),
        rhs(cone_rhs),
    ));
    out.push(spec(
        "prop7-cutoff-du".into(),
        "prop:7 eq:19",
        Suite::Kernels,
        Source::Plane,
        region(off_negative),
        lhs(|s| {
            let (u, v) = (s.point[0], s.point[1]);
            cutoff_prime(u / v) / v
        }),
        rhs(|p| 1.0 / (p[0] - p[1]).abs()),
    ));
    out.push(spec(
        "prop7-cutoff-dv".into(),
        "prop:7 eq:19",
        Suite::Kernels,
        Source::Plane,
        region(off_negative),
        lhs(|s| {
            let (u, v) = (s.point[0], s.point[1]);
            u * cutoff_prime(u / v) / (v * v)
        }),
        rhs(|p| 1.0 / (p[0] - p[1]).abs()),
    ));

    // Shifted products on the closed negative quadrant: p = (t, u, v).
    for k in 0..2 {
        for l in 0..2 {
            let kf = k as f64;
            out.push(spec(
                format!("shifted-product-k{k}-l{l}"),
                "eq:13",
                Suite::Kernels,
                Source::TKernel,
                region(|p| p[1] <= 0.0 && p[2] <= 0.0),
                field(layout::shifted(k, l)),
                rhs(move |p| {
                    let (t, u, v) = (p[0], p[1], p[2]);
                    if l != 0 {
                        (2.0 * kf * u - (v - u) * t).exp()
                    } else {
                        (2.0 * kf * u - v + (u + v) * t).exp()
                    }
                }),
            ));
        }
    }

    let mut neg = spec(
        "neg-lm3-case4-n0-j0-fast".into(),
        "lm:3 est_S_00",
        Suite::Kernels,
        Source::TKernel,
        region(|p| Case::of(p[1], p[2]) == Case::Negative),
        field(layout::t_kernel(0, 0)),
        rhs(|p| (-(p[1] - p[2]).abs() / 2.0).exp()),
    );
    neg.expected = Expectation::Fail;
    neg.notes.push("negative control: decay e^{-|u-v|/2} in place of e^{-t|u-v|}".into());
    out.push(neg);
}

/// Every registered estimate, Bessel specs first. Ids are unique.
pub fn registry() -> Vec<EstimateSpec> {
    let mut out = Vec::new();
    bessel_specs(&mut out);
    kernel_specs(&mut out);
    out
}
