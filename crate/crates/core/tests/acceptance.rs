//! Acceptance criteria, one line each. Runs without the libtest harness so
//! that the summary is always printed.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cmcface::expr::{pole_order_of_two_differential, schwarzian, Puncture, Tape};
use cmcface::frames::ClosedLift;
use cmcface::gallery::{self, gauss_coherence, metric_identity_error, random_points};
use cmcface::mink::Mat2;
use cmcface::monodromy::{end_classify, loop_monodromy, singular_set_accumulates, EndOptions, EndReport, EndType};
use cmcface::osserman::{end_winding, global_report, local_order_check, Verdict};
use cmcface::su11::{canonical_matrix, classify, conjugator, lambda_e, Su11Class};
use cmcface::surface::export::{build_mesh, MeshOptions};
use cmcface::surface::{ray_crossings, trace_singular_set, Annotation, SectorSet, TraceOptions, Window};

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: Mat2, b: Mat2) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// 1. The explicit 2-noid frame against hand-written closed forms.
fn parabolic_catenoid_consistency() -> Outcome {
    let t0 = Instant::now();
    let spec = gallery::parabolic_catenoid_spec();
    let face = spec.face().map_err(|e| e.to_string())?;
    let lift = face.closed_lift().ok_or("frame spec without a closed lift")?.clone();
    let tape = lift.tape();
    let k = c(0.0, 1.0 / (2.0 * 2f64.sqrt()));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_ode, mut worst_f, mut worst_det) = (0.0f64, 0.0f64, 0.0f64);
    for z in random_points(&Window::annulus(c(0.0, 0.0), 0.2, 0.8), 100, &mut rng) {
        let (v, _) = tape.eval_fresh(z).map_err(|e| e.to_string())?;
        let f = ClosedLift::frame_from(&v, z).map_err(|e| e.to_string())?;
        let df = ClosedLift::derivative_from(&v, z).map_err(|e| e.to_string())?;

        // oracle: F = k diag(sqrt z, 1/sqrt z) M(log z)
        let (l, s) = (z.ln(), z.sqrt());
        let m = [[3.0 - l, -1.0 + l], [1.0 + l, -3.0 - l]];
        let dm = [[-1.0, 1.0], [1.0, -1.0]].map(|r| r.map(|x| c(x, 0.0) / z));
        let f_or = Mat2::new(k * s * m[0][0], k * s * m[0][1], k / s * m[1][0], k / s * m[1][1]);
        let (ds, dis) = (0.5 / s, -0.5 / (s * z));
        let df_or = Mat2::new(
            k * (ds * m[0][0] + s * dm[0][0]),
            k * (ds * m[0][1] + s * dm[0][1]),
            k * (dis * m[1][0] + dm[1][0] / s),
            k * (dis * m[1][1] + dm[1][1] / s),
        );
        worst_f = worst_f.max(rel(f, f_or)).max(rel(df, df_or));
        worst_det = worst_det.max((f.det() - 1.0).norm());

        let g = (l + 1.0) / (l - 1.0);
        let dg = -2.0 / (z * (l - 1.0) * (l - 1.0));
        let q = 1.0 / (4.0 * z * z);
        let omega = q / dg;
        let want = Mat2::new(g * omega, -g * g * omega, omega, -g * omega);
        let got = f.inverse().map_err(|e| e.to_string())? * df;
        worst_ode = worst_ode.max(rel(got, want));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(
        worst_det < 1e-9 && worst_ode < 1e-9 && worst_f < 1e-9 && secs < 1.0,
        format!("|det F - 1| {worst_det:.1e}, F^-1 dF {worst_ode:.1e}, F vs closed form {worst_f:.1e}, {secs:.3} s"),
    )
}

/// 2. `S(g) - S(G) = 2Q`, with `Q = omega dg` and `omega` read off the frame.
fn schwarzian_identity() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for e in gallery::gallery() {
        let Some((big_g, g)) = e.spec.gauss_pair() else { continue };
        let face = e.spec.face().map_err(|x| x.to_string())?;
        let lift = face.closed_lift().ok_or("gauss pair without a closed lift")?;
        let (sg, sbig) = (schwarzian(&g).map_err(|x| x.to_string())?, schwarzian(&big_g).map_err(|x| x.to_string())?);
        let mut exprs = lift.exprs();
        exprs.extend([sg.coeff, sbig.coeff, g.diff()]);
        let tape = Tape::new(&exprs);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut worst = 0.0f64;
        for z in random_points(&e.spec.domain.window, 100, &mut rng) {
            let (v, _) = tape.eval_fresh(z).map_err(|x| x.to_string())?;
            let f = ClosedLift::frame_from(&v, z).map_err(|x| x.to_string())?;
            let df = ClosedLift::derivative_from(&v, z).map_err(|x| x.to_string())?;
            let omega = (f.inverse().map_err(|x| x.to_string())? * df).a21();
            let get = |k: usize| v[k].c().ok_or(format!("pole at {z}"));
            let (a, b, dg) = (get(8)?, get(9)?, get(10)?);
            let q2 = 2.0 * omega * dg;
            worst = worst.max((a - b - q2).norm() / a.norm().max(b.norm()).max(q2.norm()).max(1e-300));
        }
        ok &= worst < 1e-8;
        lines.push(format!("{} {worst:.1e}", e.spec.name));
    }
    ensure(ok && !lines.is_empty(), lines.join(", "))
}

/// 3. Classification of random SU(1,1) conjugates of canonical forms.
fn su11_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut worst_param, mut worst_conj) = (0.0f64, 0.0f64);
    let mut mismatches = 0;
    for n in 0..1000 {
        let class = match n % 3 {
            0 => {
                let s = rng.gen_range(0.01..PI - 0.01);
                Su11Class::Elliptic { s: if rng.gen() { s } else { -s } }
            }
            1 => Su11Class::Parabolic {
                sign_outer: if rng.gen() { 1 } else { -1 },
                sign_t: if rng.gen() { 1 } else { -1 },
            },
            _ => Su11Class::Hyperbolic {
                sign_outer: if rng.gen() { 1 } else { -1 },
                t: rng.gen_range(0.05..3.0),
            },
        };
        let r: f64 = rng.gen_range(0.0..2.0);
        let a = Complex64::from_polar(r.cosh(), rng.gen_range(-PI..PI));
        let b = Complex64::from_polar(r.sinh(), rng.gen_range(-PI..PI));
        let p = Mat2::new(a, b, b.conj(), a.conj());
        let m = p.inverse().map_err(|e| e.to_string())? * canonical_matrix(&class) * p;
        let got = classify(&m).map_err(|e| e.to_string())?;
        let same_family = std::mem::discriminant(&got) == std::mem::discriminant(&class);
        let param = match (got, class) {
            (Su11Class::Elliptic { s: x }, Su11Class::Elliptic { s: y }) => (x - y).abs(),
            (Su11Class::Hyperbolic { sign_outer: o1, t: x }, Su11Class::Hyperbolic { sign_outer: o2, t: y }) if o1 == o2 => (x - y).abs(),
            (Su11Class::Parabolic { sign_outer: o1, sign_t: t1 }, Su11Class::Parabolic { sign_outer: o2, sign_t: t2 }) if (o1, t1) == (o2, t2) => 0.0,
            _ => f64::INFINITY,
        };
        if !same_family || param > 1e-9 {
            mismatches += 1;
        }
        worst_param = worst_param.max(param);
        let (w, _, _) = conjugator(&m).map_err(|e| e.to_string())?;
        worst_conj = worst_conj.max(w.residual);
    }
    let pos = classify(&lambda_e(0.7)).map_err(|e| e.to_string())?;
    let neg = classify(&lambda_e(-0.7)).map_err(|e| e.to_string())?;
    let split = !pos.approx_eq(&neg, 1e-6) && (lambda_e(0.7).trace() - lambda_e(-0.7).trace()).norm() < 1e-15;
    ensure(
        mismatches == 0 && worst_conj < 1e-8 && split,
        format!("1000 conjugates, {mismatches} mismatches, parameter error {worst_param:.1e}, conjugator residual {worst_conj:.1e}, Lambda_e(+-0.7) distinguished: {split}"),
    )
}

/// 4. Loop monodromy of the catenoids and the hyperbolic demo.
fn monodromy() -> Outcome {
    let zero = Puncture::Finite(c(0.0, 0.0));
    let run = |name: &str| -> Result<_, String> {
        let face = gallery::entry(name).map_err(|e| e.to_string())?.spec.face().map_err(|e| e.to_string())?;
        loop_monodromy(&face, &zero, 0.5, 4096).map_err(|e| e.to_string())
    };
    let ell = run("elliptic-catenoid-0.3")?;
    let par = run("parabolic-catenoid")?;
    let hyp = run("hyperbolic-w10i")?;
    let want = 2.0 * (0.3 * PI).cos();
    let tr_e = ell.normalized.trace();
    let tr_p = par.normalized.trace();
    let ok_e = (tr_e - want).norm() < 1e-6 && matches!(ell.class, Some(Su11Class::Elliptic { .. }));
    let ok_p = (tr_p.norm() - 2.0).abs() < 1e-6 && matches!(par.class, Some(Su11Class::Parabolic { .. }));
    let ok_h = matches!(hyp.class, Some(Su11Class::Hyperbolic { .. }));
    let res = [&ell, &par, &hyp].iter().map(|m| m.residual.form_residual).fold(0.0, f64::max);
    ensure(
        ok_e && ok_p && ok_h && res < 1e-6,
        format!(
            "elliptic trace {:.9} (want {want:.9}), parabolic |trace| {:.9}, hyperbolic {:?}, max residual {res:.1e}",
            tr_e.re,
            tr_p.norm(),
            hyp.class.map(|c| c.name())
        ),
    )
}

/// 5. Singular sets of the m = 3 example and of the hyperbolic demo.
fn singular_sets() -> Outcome {
    let m3 = gallery::entry("integral-elliptic-m3").map_err(|e| e.to_string())?.spec.face().map_err(|e| e.to_string())?;
    let curves = trace_singular_set(&m3, &Window::annulus(c(0.0, 0.0), 0.02, 1.5), 96, &TraceOptions::default()).map_err(|e| e.to_string())?;
    let pts: Vec<Complex64> = curves.iter().flat_map(|c| c.points.clone()).collect();
    let residual = pts.iter().map(|z| (z.norm().powi(6) - 2.0 * z.powi(3).re).abs()).fold(0.0, f64::max);
    let sector = SectorSet { m: 3, eps: 0.2, delta: PI / 6.0 };
    let inner: Vec<&Complex64> = pts.iter().filter(|z| z.norm() < 0.3).collect();
    let contained = !inner.is_empty() && inner.iter().all(|z| sector.contains(c(0.0, 0.0), **z));

    let hyp = gallery::entry("hyperbolic-w10i").map_err(|e| e.to_string())?.spec.face().map_err(|e| e.to_string())?;
    let want: Vec<f64> = (1..=5).map(|n| (-(n as f64) * PI / 10.0).exp()).collect();
    let circles = trace_singular_set(&hyp, &Window::annulus(c(0.0, 0.0), 0.19, 0.95), 128, &TraceOptions::default()).map_err(|e| e.to_string())?;
    let mut radii: Vec<f64> = circles
        .iter()
        .filter_map(|cv| match cv.annotation {
            Annotation::Circle { r, .. } if cv.closed => Some(r),
            _ => None,
        })
        .collect();
    radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let circle_err = if radii.len() == 5 { radii.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) } else { f64::INFINITY };
    let mut crossings = ray_crossings(&hyp, c(0.0, 0.0), 0.0, (-PI / 2.0).exp(), 1.0, 400);
    crossings.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cross_err = if crossings.len() == 5 { crossings.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) } else { f64::INFINITY };
    ensure(
        residual < 1e-6 && contained && circle_err < 1e-4 && cross_err < 1e-4,
        format!(
            "m=3 residual {residual:.1e}, {} points in S(3, 0.2, pi/6): {contained}; {} circles, radius error {circle_err:.1e}; {} ray crossings, error {cross_err:.1e}",
            inner.len(),
            radii.len(),
            crossings.len()
        ),
    )
}

fn ends_of(name: &str) -> Result<(cmcface::spec::SurfaceSpec, cmcface::face::Face, Vec<EndReport>), String> {
    let spec = gallery::entry(name).map_err(|e| e.to_string())?.spec;
    let face = spec.face().map_err(|e| e.to_string())?;
    let obstacles = spec.obstacles();
    let ends = spec
        .punctures()
        .par_iter()
        .map(|p| end_classify(&face, p, &obstacles, &EndOptions::default()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("{name}: {e}"))?;
    Ok((spec, face, ends))
}

/// 6. The Osserman-type inequality over the gallery.
fn osserman_table() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, lhs, rhs, verdict) in [
        ("4noid", 6, 6, Verdict::Equality),
        ("elliptic-catenoid-0.3", 2, 2, Verdict::Equality),
        ("elliptic-catenoid-0.5", 2, 2, Verdict::Equality),
        ("parabolic-catenoid", 2, 2, Verdict::Equality),
        ("3-noid", 2, 4, Verdict::Violated),
    ] {
        let (spec, face, ends) = ends_of(name)?;
        let r = global_report(&face, spec.genus, spec.flags.complete, &ends, 1).map_err(|e| e.to_string())?;
        let good = r.core.lhs == lhs && r.core.rhs == rhs && r.core.verdict == verdict && r.consistent;
        ok &= good;
        parts.push(format!("{name} {} vs {} {:?}", r.core.lhs, r.core.rhs, r.core.verdict));
        if name == "3-noid" {
            ok &= spec.flags.complete == Some(false);
        }
        if name == "parabolic-catenoid" {
            for e in &ends {
                let w = end_winding(&face, e).map_err(|x| x.to_string())?.0;
                let l = local_order_check(e).map_err(|x| x.to_string())?;
                ok &= w.abs() == 1 && l.m == 1 && l.ord_q == -2 && l.status == Verdict::Equality;
                parts.push(format!("end {}: winding {w}, local {} = {} + 3", e.puncture, l.m, l.ord_q));
            }
        }
    }
    ensure(ok, parts.join("; "))
}

/// 7. Light-cone Gauss map against G, boundary sides, and the metric identity.
fn gauss_coherence_all() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for e in gallery::gallery() {
        let face = e.spec.face().map_err(|x| x.to_string())?;
        let w = e.spec.domain.window;
        match gauss_coherence(&face, &w, 50, 17).map_err(|x| format!("{}: {x}", e.spec.name))? {
            Some((err, sides, n)) => {
                ok &= err < 1e-6 && sides && n == 50;
                parts.push(format!("{} {err:.0e}", e.spec.name));
            }
            // the lightlike line has no regular point
            None => {
                ok &= e.expected.lightlike_line;
                parts.push(format!("{} degenerate", e.spec.name));
            }
        }
        if !e.expected.lightlike_line {
            let m = metric_identity_error(&face, &w, 100, 18).map_err(|x| format!("{}: {x}", e.spec.name))?;
            ok &= m < 1e-8;
        }
    }
    ensure(ok, parts.join(", "))
}

/// 8. Ends with a nonsingular hyperbolic metric nearby have a regular singularity and are never hyperbolic.
fn regular_singularity() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for e in gallery::gallery() {
        if e.spec.punctures.is_empty() {
            continue;
        }
        let (_, face, ends) = ends_of(&e.spec.name)?;
        let sg = schwarzian(&face.g).map_err(|x| x.to_string())?;
        for r in &ends {
            if singular_set_accumulates(&face.g, &r.puncture, r.monodromy.radius) {
                continue;
            }
            checked += 1;
            let ord = pole_order_of_two_differential(&sg, &r.puncture).map_err(|x| x.to_string())?.order;
            let hyperbolic = matches!(r.end_type, Some(EndType::Hyperbolic { .. }));
            if ord < -2 || hyperbolic {
                bad.push(format!("{} at {}: order {ord}, {:?}", e.spec.name, r.puncture, r.end_type));
            }
        }
    }
    ensure(bad.is_empty() && checked > 0, format!("{checked} ends checked, violations: {bad:?}"))
}

/// 9. Mesh of the parabolic catenoid and the full gallery verification.
fn mesh_and_verify(start: Instant) -> Outcome {
    let spec = gallery::parabolic_catenoid_spec();
    let face = spec.face().map_err(|e| e.to_string())?;
    let mesh = build_mesh(&face, &spec.domain.window, 64, 64, MeshOptions::default()).map_err(|e| e.to_string())?;
    let on_s31 = mesh.vertices.iter().map(|v| v.raw.de_sitter_residual()).fold(0.0, f64::max);
    // the catenoid window stays in x0 <= 1, so the shell is also checked on meshes that project
    let mut shell_ok = true;
    let mut projected = 0;
    for (name, m) in [("parabolic-catenoid", Some(mesh.clone())), ("integral-elliptic-m3", None), ("hyperbolic-w10i", None), ("3-noid", None)] {
        let m = match m {
            Some(m) => m,
            None => {
                let s = gallery::entry(name).map_err(|e| e.to_string())?.spec;
                build_mesh(&s.face().map_err(|e| e.to_string())?, &s.domain.window, 32, 32, MeshOptions::default()).map_err(|e| e.to_string())?
            }
        };
        for v in m.vertices.iter().filter(|v| v.projected) {
            projected += 1;
            let n2 = v.pos.iter().map(|x| x * x).sum::<f64>();
            let x0 = v.raw.x0();
            let want = (1.0 + x0 * x0) / ((1.0 + x0) * (1.0 + x0));
            shell_ok &= n2 > 0.5 && n2 < 1.0 && (n2 - want).abs() < 1e-8;
        }
    }
    let checks = gallery::verify_all(&Default::default());
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.entry, c.name)).collect();
    let secs = start.elapsed().as_secs_f64();
    ensure(
        on_s31 < 1e-8 && shell_ok && projected > 0 && failed.is_empty() && mesh.vertices.len() == 65 * 64 && secs < 300.0,
        format!(
            "{} vertices, S31 residual {on_s31:.1e}; {projected} projected vertices in the shell: {shell_ok}; gallery verify {} checks, failed {failed:?}; {secs:.1} s so far",
            mesh.vertices.len(),
            checks.len()
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let start = Instant::now();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("parabolic catenoid consistency", Box::new(parabolic_catenoid_consistency)),
        ("schwarzian identity", Box::new(schwarzian_identity)),
        ("su(1,1) classification round trip", Box::new(su11_round_trip)),
        ("monodromy", Box::new(monodromy)),
        ("singular sets", Box::new(singular_sets)),
        ("osserman table", Box::new(osserman_table)),
        ("gauss map coherence", Box::new(gauss_coherence_all)),
        ("regular singularity prediction", Box::new(regular_singularity)),
        ("mesh and gallery verify", Box::new(move || mesh_and_verify(start))),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match out {
            Ok(d) => println!("acceptance {}: PASS {name}: {d}", k + 1),
            Err(d) => {
                failures += 1;
                println!("acceptance {}: FAIL {name}: {d}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed in {:.1} s", criteria.len() - failures, criteria.len(), start.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
