use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use cmcface::expr::{parse, Puncture, Tape};
use cmcface::frames::{time_reverse_frame, GaussPair};
use cmcface::face::Face;
use cmcface::mink::{e3, mobius_apply, su11_membership, ExtComplex, HermMat, Mat2, MinkowskiVec};
use cmcface::spec::{Domain, Flags, PunctureSpec, SpecData, SurfaceSpec};
use cmcface::su11::{canonical_matrix, classify, conjugator, Su11Class};
use cmcface::surface::{project_to_s31, SectorSet, Window};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

/// Random element of SL(2,C) with entries of moderate size.
fn sl2c() -> impl Strategy<Value = Mat2> {
    (complex(2.0), complex(2.0), complex(2.0)).prop_filter_map("a11 too small", |(a, b, cc)| {
        if a.norm() < 0.2 {
            return None;
        }
        // d chosen so that det = 1
        let d = (1.0 + b * cc) / a;
        Some(Mat2::new(a, b, cc, d))
    })
}

/// Random element of SU(1,1): `[[a, b], [conj b, conj a]]`, `|a|^2 - |b|^2 = 1`.
fn su11() -> impl Strategy<Value = Mat2> {
    (0.0..2.0f64, -PI..PI, -PI..PI).prop_map(|(r, al, be)| {
        let a = Complex64::from_polar(r.cosh(), al);
        let b = Complex64::from_polar(r.sinh(), be);
        Mat2::new(a, b, b.conj(), a.conj())
    })
}

fn su11_class() -> impl Strategy<Value = Su11Class> {
    let sign = prop_oneof![Just(-1i8), Just(1i8)];
    prop_oneof![
        (0.01..PI - 0.01, any::<bool>()).prop_map(|(s, neg)| Su11Class::Elliptic { s: if neg { -s } else { s } }),
        (sign.clone(), prop_oneof![Just(-1i8), Just(1i8)]).prop_map(|(o, t)| Su11Class::Parabolic { sign_outer: o, sign_t: t }),
        (sign, 0.05..3.0f64).prop_map(|(o, t)| Su11Class::Hyperbolic { sign_outer: o, t }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn su11_classification_round_trip(class in su11_class(), p in su11()) {
        let a = p.inverse().unwrap() * canonical_matrix(&class) * p;
        let got = classify(&a).unwrap();
        prop_assert!(got.approx_eq(&class, 1e-9), "{got:?} vs {class:?}");
        if let (Su11Class::Parabolic { sign_outer: a1, sign_t: b1 }, Su11Class::Parabolic { sign_outer: a2, sign_t: b2 }) = (got, class) {
            prop_assert_eq!((a1, b1), (a2, b2));
        }
        let (w, _, canon) = conjugator(&a).unwrap();
        prop_assert!(w.residual < 1e-8, "conjugator residual {}", w.residual);
        prop_assert!(su11_membership(&w.p, 1e-10).member, "{:?}", su11_membership(&w.p, 1e-10));
        prop_assert!((w.p * a * w.p.inverse().unwrap() - canon).norm() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn elliptic_rotation_direction_is_detected(s in 0.01..PI - 0.01, p in su11()) {
        let conj = |m: Mat2| p.inverse().unwrap() * m * p;
        let a = classify(&conj(canonical_matrix(&Su11Class::Elliptic { s }))).unwrap();
        let b = classify(&conj(canonical_matrix(&Su11Class::Elliptic { s: -s }))).unwrap();
        prop_assert!(!a.approx_eq(&b, 1e-6));
        let (ta, tb) = (canonical_matrix(&Su11Class::Elliptic { s }).trace(), canonical_matrix(&Su11Class::Elliptic { s: -s }).trace());
        prop_assert!((ta - tb).norm() < 1e-12);
    }

    #[test]
    fn lorentz_norm_is_minus_determinant(x in prop::array::uniform4(-10.0..10.0f64)) {
        let v = MinkowskiVec(x);
        let h = v.to_herm();
        let scale = x.iter().map(|t| t * t).sum::<f64>().max(1.0);
        prop_assert!((v.norm_sq() + h.det()).abs() <= 1e-14 * scale);
        let back = h.to_minkowski();
        for k in 0..4 {
            prop_assert!((back.0[k] - x[k]).abs() <= 1e-14 * scale.sqrt());
        }
    }

    #[test]
    fn isometry_action_preserves_the_norm(x in prop::array::uniform4(-3.0..3.0f64), a in sl2c()) {
        let v = MinkowskiVec(x);
        let w = HermMat::symmetrize(a.congruence(&v.to_herm().0)).to_minkowski();
        let scale = v.0.iter().map(|t| t * t).sum::<f64>().max(1.0) * a.norm().powi(4);
        prop_assert!((v.norm_sq() - w.norm_sq()).abs() <= 1e-10 * scale);
    }

    #[test]
    fn moebius_action_is_a_left_action(a in sl2c(), b in sl2c(), z in complex(3.0)) {
        let lhs = mobius_apply(&(a * b), ExtComplex::Finite(z));
        let rhs = mobius_apply(&a, mobius_apply(&b, ExtComplex::Finite(z)));
        prop_assert!(lhs.chordal_distance(rhs) < 1e-9);
    }

    #[test]
    fn frames_project_to_de_sitter_space(a in sl2c()) {
        let x = project_to_s31(&a).unwrap();
        prop_assert!(x.de_sitter_residual() < 1e-8);
        // time reversal is the antipodal map
        let y = project_to_s31(&time_reverse_frame(&a)).unwrap();
        for k in 0..4 {
            prop_assert!((x.0[k] + y.0[k]).abs() < 1e-9 * x.0[k].abs().max(1.0));
        }
    }

    #[test]
    fn sector_sets_repeat_every_pi_over_m(m in 1u32..6, eps in 0.01..0.5f64, delta in -1.0..1.0f64, theta in -PI..PI) {
        let s = SectorSet { m, eps: eps.min(PI / (2.0 * m as f64) - 1e-3), delta };
        let shifted = theta + PI / m as f64;
        // away from the sector edges the two answers must agree
        if (s.axis_distance(theta) - s.eps).abs() > 1e-9 {
            prop_assert_eq!(s.contains_angle(theta), s.contains_angle(shifted));
        }
        prop_assert!(s.contains_angle(delta));
    }
}

fn catenoid() -> Face {
    Face::from_gauss_pair(GaussPair::new(parse("z").unwrap(), parse("z^0.3").unwrap()).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn left_factor_is_a_rigid_motion(b in sl2c(), r in 0.3..1.5f64, t in -3.0..3.0f64) {
        let face = catenoid();
        let f = face.at(Complex64::from_polar(r, t)).unwrap().frame;
        let x = project_to_s31(&f).unwrap();
        let moved = project_to_s31(&(b * f)).unwrap();
        let want = HermMat::symmetrize(b.congruence(&x.to_herm().0)).to_minkowski();
        let scale = b.norm().powi(2) * f.norm().powi(2);
        for k in 0..4 {
            prop_assert!((moved.0[k] - want.0[k]).abs() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn right_su11_factor_keeps_the_surface(a in su11(), r in 0.3..1.5f64, t in -3.0..3.0f64) {
        let face = catenoid();
        let f = face.at(Complex64::from_polar(r, t)).unwrap().frame;
        let x = project_to_s31(&f).unwrap();
        let y = project_to_s31(&(f * a.inverse().unwrap())).unwrap();
        let scale = f.norm().powi(2) * a.norm().powi(2);
        for k in 0..4 {
            prop_assert!((x.0[k] - y.0[k]).abs() < 1e-10 * scale.max(1.0));
        }
        prop_assert!((a.congruence(&e3()) - e3()).norm() < 1e-9 * a.norm().powi(2));
    }

    #[test]
    fn moebius_quotients_differentiate_like_finite_differences(
        m in sl2c(),
        k in 1i32..4,
        z in complex(1.5),
    ) {
        let fmt = |w: Complex64| format!("({} + {}i)", w.re, w.im);
        let h = format!("(z^{k} + exp(z))");
        let text = format!("({}*{h} + {})/({}*{h} + {})", fmt(m.a11()), fmt(m.a12()), fmt(m.a21()), fmt(m.a22()));
        let e = parse(&text).unwrap();
        let tape = Tape::new(&[e.clone(), e.diff()]);
        let at = |w: Complex64| tape.eval_fresh(w).ok().and_then(|v| Some((v.0[0].c()?, v.0[1].c()?)));
        let step = 1e-5;
        if let (Some((_, d)), Some((fp, _)), Some((fm, _))) = (at(z), at(z + step), at(z - step)) {
            let fd = (fp - fm) / (2.0 * step);
            // skip points near poles, where the difference quotient is unreliable
            prop_assume!(d.norm() < 1e3);
            prop_assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0), "{fd} vs {d} for {text} at {z}");
        }
    }
}

fn spec_strategy() -> impl Strategy<Value = SurfaceSpec> {
    let puncture = prop_oneof![
        Just(PunctureSpec(Puncture::Infinity)),
        (5.0..9.0f64, -PI..PI).prop_map(|(r, t)| PunctureSpec(Puncture::Finite(Complex64::from_polar(r, t)))),
    ];
    let data = prop_oneof![
        (1u32..4, 1u32..5).prop_map(|(a, b)| SpecData::GaussPair {
            big_g: format!("z^{a}"),
            g: format!("1 - z^{b}"),
        }),
        (0.1..0.9f64).prop_map(|mu| SpecData::Weierstrass {
            g: format!("z^{mu}"),
            omega: "1/z".into(),
            base: [1.0, 0.0],
            base_frame: None,
        }),
    ];
    (
        "[a-z][a-z0-9-]{0,12}",
        data,
        prop::collection::vec(puncture, 0..3),
        0u32..3,
        prop::option::of(any::<bool>()),
        (0.2..1.0f64, 1.5..4.0f64, 4usize..64, 4usize..64),
    )
        .prop_map(|(name, data, mut punctures, genus, complete, (r0, r1, n1, n2))| {
            punctures.dedup();
            if punctures.iter().filter(|p| p.0 == Puncture::Infinity).count() > 1 {
                punctures.retain(|p| p.0 != Puncture::Infinity);
            }
            SurfaceSpec {
                name,
                data,
                punctures,
                genus,
                flags: Flags { complete, horosphere: false },
                domain: Domain {
                    window: Window::annulus(c(0.0, 0.0), r0, r1),
                    resolution: [n1, n2],
                },
                singular_points: vec![],
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spec_round_trip_is_byte_identical(spec in spec_strategy()) {
        let a = spec.to_json();
        let parsed = SurfaceSpec::from_json(&a).unwrap();
        prop_assert_eq!(&parsed, &spec);
        prop_assert_eq!(parsed.to_json(), a);
    }
}
