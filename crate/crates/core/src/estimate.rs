//! Interval estimates with certification flags and the witnesses behind them.

use serde::{Deserialize, Serialize};

use crate::space::Exponent;

/// An interval [lower, upper] containing the quantity.
///
/// `lower_certified` means the lower value is attained by an explicit
/// witness evaluated under an exact constraint; `upper_certified` means the
/// upper value comes from a valid bound rather than a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    #[serde(with = "ext_f64")]
    pub lower: f64,
    #[serde(with = "ext_f64")]
    pub upper: f64,
    pub lower_certified: bool,
    pub upper_certified: bool,
    pub method: Vec<String>,
    pub witness: Option<WitnessFamily>,
}

impl NormEstimate {
    pub fn exact(value: f64, method: &str) -> Self {
        NormEstimate {
            lower: value,
            upper: value,
            lower_certified: true,
            upper_certified: true,
            method: vec![method.to_string()],
            witness: None,
        }
    }

    pub fn unbounded() -> Self {
        NormEstimate {
            lower: 0.0,
            upper: f64::INFINITY,
            lower_certified: false,
            upper_certified: false,
            method: Vec::new(),
            witness: None,
        }
    }

    /// Both ends certified and equal up to `tol` (relative above 1).
    pub fn is_exact(&self, tol: f64) -> bool {
        self.lower_certified && self.upper_certified && self.upper - self.lower <= tol * self.upper.abs().max(1.0)
    }

    pub fn value(&self) -> f64 {
        self.lower
    }

    pub fn tag(&mut self, method: impl Into<String>) {
        let m = method.into();
        if !self.method.contains(&m) {
            self.method.push(m);
        }
    }

    /// Replaces the lower end if `value` improves it. A certified value
    /// always beats an uncertified one.
    pub fn offer_lower(&mut self, value: f64, certified: bool, method: &str) -> bool {
        let better = match (certified, self.lower_certified) {
            (true, false) => true,
            (false, true) => false,
            _ => value > self.lower,
        };
        if better && value.is_finite() {
            self.lower = value;
            self.lower_certified = certified;
            self.tag(method);
        }
        better
    }

    /// Replaces the upper end if `value` is a smaller bound of equal or better standing.
    pub fn offer_upper(&mut self, value: f64, certified: bool, method: &str) {
        let better = match (certified, self.upper_certified) {
            (true, false) => true,
            (false, true) => false,
            _ => value < self.upper,
        };
        if better {
            self.upper = value;
            self.upper_certified = certified;
            self.tag(method);
        }
    }

    /// Clamp the two ends so that lower ≤ upper holds when the upper end is
    /// only a search value that the lower bound has overtaken.
    pub(crate) fn settle(&mut self) {
        if self.lower > self.upper && !self.upper_certified {
            self.upper = self.lower;
        }
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.lower *= c;
        self.upper *= c;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyStructure {
    /// The functionals themselves.
    Explicit,
    /// All sign combinations Σ ε_i φ_i of the listed functionals.
    SignOrbit,
}

/// A finite family of dual functionals normalized by its weak-p constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessFamily {
    pub functionals: Vec<Vec<f64>>,
    pub structure: FamilyStructure,
    pub p: Exponent,
    /// Weak-p value of the stored family (1 after normalization).
    pub constraint: f64,
    pub constraint_exact: bool,
    /// (Σ |f(x_k*)|^p)^{1/p} over the members.
    pub objective: f64,
}

impl WitnessFamily {
    pub fn members(&self) -> usize {
        match self.structure {
            FamilyStructure::Explicit => self.functionals.len(),
            FamilyStructure::SignOrbit => 1usize << self.functionals.len().min(63),
        }
    }
}

pub(crate) mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
