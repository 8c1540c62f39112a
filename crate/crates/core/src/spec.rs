//! JSON description of a surface: its data, declared punctures and a default
//! sampling domain.

use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, Expr, ParseError, Puncture};
use crate::face::Face;
use crate::frames::{ClosedLift, FrameError, GaussPair, WeierstrassData};
use crate::mink::Mat2;
use crate::surface::Window;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("json: {0}")]
    Json(String),
    #[error("expression {field}: {source}")]
    Expr { field: String, source: ParseError },
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// A puncture written as `[re, im]` or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PunctureSpec(pub Puncture);

impl Serialize for PunctureSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Puncture::Finite(c) => [c.re, c.im].serialize(s),
            Puncture::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PunctureSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = PunctureSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("[re, im] or \"inf\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<PunctureSpec, E> {
                if v == "inf" {
                    Ok(PunctureSpec(Puncture::Infinity))
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_seq<A: de::SeqAccess<'de>>(self, mut a: A) -> Result<PunctureSpec, A::Error> {
                let re: f64 = a.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: f64 = a.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if a.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(PunctureSpec(Puncture::Finite(Complex64::new(re, im))))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecData {
    GaussPair {
        #[serde(rename = "G")]
        big_g: String,
        g: String,
    },
    Weierstrass {
        g: String,
        omega: String,
        /// Where the frame is `base_frame` (identity when absent).
        #[serde(default)]
        base: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_frame: Option<[[[f64; 2]; 2]; 2]>,
    },
    Frame {
        #[serde(rename = "F")]
        f: [[String; 2]; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complete: Option<bool>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub horosphere: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub window: Window,
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub name: String,
    pub data: SpecData,
    #[serde(default)]
    pub punctures: Vec<PunctureSpec>,
    #[serde(default)]
    pub genus: u32,
    #[serde(default)]
    pub flags: Flags,
    pub domain: Domain,
    /// Further points to keep loops away from (poles of the data that are not ends).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singular_points: Vec<[f64; 2]>,
}

fn expr(field: &str, text: &str) -> Result<Expr, SpecError> {
    parse(text).map_err(|source| SpecError::Expr {
        field: field.to_string(),
        source,
    })
}

impl SurfaceSpec {
    pub fn from_json(text: &str) -> Result<SurfaceSpec, SpecError> {
        let s: SurfaceSpec = serde_json::from_str(text).map_err(|e| SpecError::Json(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("specs serialize") + "\n"
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let ps = self.punctures();
        for (i, a) in ps.iter().enumerate() {
            if let Puncture::Finite(c) = a {
                if !c.is_finite() {
                    return Err(SpecError::Invalid(format!("puncture {i} is not finite")));
                }
            }
            if ps[..i].contains(a) {
                return Err(SpecError::Invalid(format!("puncture {a} is declared twice")));
            }
        }
        self.domain.window.validate().map_err(SpecError::Invalid)?;
        if self.domain.resolution.iter().any(|n| *n == 0) {
            return Err(SpecError::Invalid("resolution must be positive".into()));
        }
        for p in &ps {
            if let Puncture::Finite(c) = p {
                if self.domain.window.distance_to(*c) == 0.0 {
                    return Err(SpecError::Invalid(format!("puncture {c} lies in the domain window")));
                }
            }
        }
        match &self.data {
            SpecData::GaussPair { big_g, g } => {
                expr("G", big_g)?;
                expr("g", g)?;
            }
            SpecData::Weierstrass { g, omega, .. } => {
                expr("g", g)?;
                expr("omega", omega)?;
            }
            SpecData::Frame { f } => {
                for (k, e) in f.iter().flatten().enumerate() {
                    expr(&format!("F{}{}", k / 2 + 1, k % 2 + 1), e)?;
                }
            }
        }
        Ok(())
    }

    pub fn punctures(&self) -> Vec<Puncture> {
        self.punctures.iter().map(|p| p.0).collect()
    }

    /// Punctures together with the extra singular points, for choosing loop radii.
    pub fn obstacles(&self) -> Vec<Puncture> {
        let mut v = self.punctures();
        v.extend(self.singular_points.iter().map(|p| Puncture::Finite(Complex64::new(p[0], p[1]))));
        v
    }

    pub fn face(&self) -> Result<Face, SpecError> {
        Ok(match &self.data {
            SpecData::GaussPair { big_g, g } => Face::from_gauss_pair(GaussPair::new(expr("G", big_g)?, expr("g", g)?)?)?,
            SpecData::Weierstrass {
                g,
                omega,
                base,
                base_frame,
            } => {
                let w = WeierstrassData {
                    g: expr("g", g)?,
                    omega: expr("omega", omega)?,
                };
                let c = |x: [f64; 2]| Complex64::new(x[0], x[1]);
                let f0 = base_frame.map(|m| Mat2::new(c(m[0][0]), c(m[0][1]), c(m[1][0]), c(m[1][1])));
                Face::from_weierstrass(w, c(*base), f0)
            }
            SpecData::Frame { f } => {
                let e = |i: usize, j: usize| expr(&format!("F{}{}", i + 1, j + 1), &f[i][j]);
                Face::from_frame(ClosedLift::new([e(0, 0)?, e(0, 1)?, e(1, 0)?, e(1, 1)?]))
            }
        })
    }

    /// The `(G, g)` pair when the spec gives one.
    pub fn gauss_pair(&self) -> Option<(Expr, Expr)> {
        match &self.data {
            SpecData::GaussPair { big_g, g } => Some((parse(big_g).ok()?, parse(g).ok()?)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SurfaceSpec {
        SurfaceSpec {
            name: "catenoid".into(),
            data: SpecData::GaussPair {
                big_g: "z".into(),
                g: "z^0.3".into(),
            },
            punctures: vec![PunctureSpec(Puncture::Finite(Complex64::new(0.0, 0.0))), PunctureSpec(Puncture::Infinity)],
            genus: 0,
            flags: Flags {
                complete: Some(true),
                horosphere: false,
            },
            domain: Domain {
                window: Window::annulus(Complex64::new(0.0, 0.0), 0.2, 2.0),
                resolution: [32, 64],
            },
            singular_points: vec![],
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let a = sample().to_json();
        let b = SurfaceSpec::from_json(&a).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"inf\""));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = sample();
        s.punctures.push(PunctureSpec(Puncture::Infinity));
        assert!(matches!(s.validate(), Err(SpecError::Invalid(_))));
        let mut s = sample();
        s.data = SpecData::GaussPair {
            big_g: "z".into(),
            g: "z^".into(),
        };
        assert!(matches!(s.validate(), Err(SpecError::Expr { .. })));
        let two = r#"{"name":"x","data":{"gauss_pair":{"G":"z","g":"z^2"},"frame":{"F":[["1","0"],["0","1"]]}},
            "domain":{"window":{"kind":"rect","min":[0,0],"max":[1,1]},"resolution":[4,4]}}"#;
        assert!(SurfaceSpec::from_json(two).is_err());
    }
}
