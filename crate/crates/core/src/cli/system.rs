//! JSON system descriptions: polynomial maps with exact coefficients, linear
//! systems built from a small set of closed-form entries, and built-ins.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::dichotomy::OscillatingScalar;
use crate::injectivity::{builtin_family, FamilyParams, ParamFamily, BUILTIN_FAMILIES};
use crate::odeint::LinearField;
use crate::polyalg::{
    catalog, rat_from_f64, ratio_serde, BindingKind, GaussianRational, Monomial, ParamBinding, ParamPolyMap, Poly,
    PolyError, Symbol,
};

/// Exact coefficient: `"p/q"` or a `["re", "im"]` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient(pub GaussianRational);

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_real() {
            s.serialize_str(&ratio_serde::to_string(self.0.re()))
        } else {
            [ratio_serde::to_string(self.0.re()), ratio_serde::to_string(self.0.im())].serialize(s)
        }
    }
}

fn float_rejection(v: f64) -> String {
    let hint = rat_from_f64(v).map(|r| ratio_serde::to_string(&r)).unwrap_or_else(|| "p/q".into());
    format!("coefficient {v} is a floating point literal; write it as the exact rational string \"{hint}\"")
}

impl<'de> Deserialize<'de> for Coefficient {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Coefficient;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational string \"p/q\", an integer or a [re, im] pair")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Coefficient, E> {
                if let Ok(x) = v.trim().parse::<f64>() {
                    if ratio_serde::parse(v).is_err() {
                        return Err(E::custom(float_rejection(x)));
                    }
                }
                ratio_serde::parse(v).map(|r| Coefficient(GaussianRational::real(r))).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Coefficient, E> {
                Ok(Coefficient(GaussianRational::from_integer(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Coefficient, E> {
                Ok(Coefficient(GaussianRational::real(BigRational::from_integer(v.into()))))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Coefficient, E> {
                Err(E::custom(float_rejection(v)))
            }

            fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<Coefficient, A::Error> {
                let re: Coefficient = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: Coefficient = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                if !(re.0.is_real() && im.0.is_real()) {
                    return Err(de::Error::custom("complex pair entries must be real rationals"));
                }
                Ok(Coefficient(GaussianRational::new(re.0.re().clone(), im.0.re().clone())))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDesc {
    pub coefficient: Coefficient,
    pub state_exponents: Vec<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub param_exponents: BTreeMap<String, u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BindingDesc {
    /// `e^{-rate t}`.
    ExpDecay { symbol: String, rate: f64 },
    Constant { symbol: String, value: f64 },
    /// `sin(freq t)` or `cos(freq t)` with supremum 1.
    Bounded { symbol: String, function: String, #[serde(default = "one")] freq: f64 },
}

fn one() -> f64 {
    1.0
}

/// Time functions allowed in linear entries.
pub const LINEAR_FUNCTIONS: [&str; 7] = ["1", "t", "sin t", "cos t", "t sin t", "t cos t", "exp(-t)"];

fn basis(name: &str, t: f64) -> f64 {
    match name {
        "1" => 1.0,
        "t" => t,
        "sin t" => t.sin(),
        "cos t" => t.cos(),
        "t sin t" => t * t.sin(),
        "t cos t" => t * t.cos(),
        "exp(-t)" => (-t).exp(),
        _ => f64::NAN,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryTerm {
    #[serde(with = "ratio_serde")]
    pub coefficient: BigRational,
    pub function: String,
}

/// A matrix entry: a rational constant or a sum of `coefficient * function(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryDesc {
    Constant(Coefficient),
    Terms(Vec<EntryTerm>),
}

impl EntryDesc {
    fn terms(&self) -> Result<Vec<(f64, String)>, SystemError> {
        match self {
            EntryDesc::Constant(c) if c.0.is_real() => Ok(vec![(c.0.re().to_f64().unwrap_or(f64::NAN), "1".into())]),
            EntryDesc::Constant(_) => Err(SystemError::Invalid("linear entries must be real".into())),
            EntryDesc::Terms(ts) => ts
                .iter()
                .map(|e| {
                    if !LINEAR_FUNCTIONS.contains(&e.function.as_str()) {
                        return Err(SystemError::Invalid(format!(
                            "unknown function `{}`; expected one of {LINEAR_FUNCTIONS:?}",
                            e.function
                        )));
                    }
                    Ok((e.coefficient.to_f64().unwrap_or(f64::NAN), e.function.clone()))
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemDescription {
    /// `lambda X + H` when `lambda` is given, otherwise the coordinates are the
    /// whole map.
    PolyMap {
        #[serde(default)]
        name: Option<String>,
        dimension: usize,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_ratio")]
        lambda: Option<BigRational>,
        coordinates: Vec<Vec<TermDesc>>,
        #[serde(default)]
        bindings: Vec<BindingDesc>,
    },
    LinearClosedForm {
        #[serde(default)]
        name: Option<String>,
        dimension: usize,
        matrix: Vec<Vec<EntryDesc>>,
        /// Declared invariant splitting, as groups of coordinate indices.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<Vec<Vec<usize>>>,
    },
    Builtin {
        id: String,
        #[serde(default)]
        parameters: BTreeMap<String, Coefficient>,
    },
}

mod opt_ratio {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => crate::polyalg::ratio_serde::serialize(r, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "crate::polyalg::ratio_serde")] BigRational);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("invalid system: {0}")]
    Invalid(String),
}

/// A loaded system.
#[derive(Clone, Debug)]
pub enum System {
    Poly { name: String, map: ParamPolyMap },
    Linear { name: String, field: LinearField, oscillating: Option<OscillatingScalar> },
    /// Built-in family without a polynomial form.
    Family(ParamFamily),
}

impl System {
    pub fn name(&self) -> &str {
        match self {
            System::Poly { name, .. } | System::Linear { name, .. } => name,
            System::Family(f) => f.id(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            System::Poly { .. } => "polynomial map",
            System::Linear { .. } => "linear system",
            System::Family(_) => "family",
        }
    }
}

pub fn load_system_file(path: &Path) -> Result<(SystemDescription, Vec<u8>), SystemError> {
    let bytes = std::fs::read(path).map_err(|source| SystemError::Io { path: path.display().to_string(), source })?;
    let desc = parse_description(&bytes).map_err(|source| SystemError::Parse { path: path.display().to_string(), source })?;
    Ok((desc, bytes))
}

/// Parses a description. Floating point coefficients are reported with their
/// JSON path, since tagged variants lose the line of a failing field.
pub fn parse_description(bytes: &[u8]) -> Result<SystemDescription, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    if let Some((path, v)) = find_float(&value, &mut String::new()) {
        return Err(de::Error::custom(format!("at {path}: {}", float_rejection(v))));
    }
    serde_json::from_value(value)
}

/// Float-valued fields of a description; everything else must be exact.
const FLOAT_FIELDS: [&str; 2] = ["rate", "freq"];

fn find_float(v: &serde_json::Value, path: &mut String) -> Option<(String, f64)> {
    use serde_json::Value as J;
    match v {
        J::Number(n) if n.is_f64() => n.as_f64().map(|x| (path.clone(), x)),
        J::String(s) => match (s.trim().parse::<f64>(), ratio_serde::parse(s)) {
            (Ok(x), Err(_)) => Some((path.clone(), x)),
            _ => None,
        },
        J::Array(items) => items.iter().enumerate().find_map(|(i, item)| {
            let len = path.len();
            path.push_str(&format!("/{i}"));
            let found = find_float(item, path);
            path.truncate(len);
            found
        }),
        J::Object(map) => map.iter().filter(|(k, _)| !FLOAT_FIELDS.contains(&k.as_str())).find_map(|(k, item)| {
            let len = path.len();
            path.push('/');
            path.push_str(k);
            let found = find_float(item, path);
            path.truncate(len);
            found
        }),
        _ => None,
    }
}

fn param(params: &BTreeMap<String, Coefficient>, key: &str) -> Result<Option<BigRational>, SystemError> {
    match params.get(key) {
        None => Ok(None),
        Some(c) if c.0.is_real() => Ok(Some(c.0.re().clone())),
        Some(_) => Err(SystemError::Invalid(format!("parameter `{key}` must be real"))),
    }
}

fn family_params(params: &BTreeMap<String, Coefficient>) -> Result<FamilyParams, SystemError> {
    if let Some(k) = params.keys().find(|k| !["lambda0", "a", "lambda"].contains(&k.as_str())) {
        return Err(SystemError::Invalid(format!("unknown parameter `{k}`")));
    }
    let mut p = FamilyParams::default();
    let f = |r: BigRational| r.to_f64().unwrap_or(f64::NAN);
    if let Some(v) = param(params, "lambda0")? {
        p.lambda0 = f(v);
    }
    if let Some(v) = param(params, "a")? {
        p.a = f(v);
    }
    if let Some(v) = param(params, "lambda")? {
        p.lambda = v;
    }
    Ok(p)
}

fn binding(b: &BindingDesc) -> Result<ParamBinding, SystemError> {
    Ok(match b {
        BindingDesc::ExpDecay { symbol, rate } => ParamBinding::exp_decay(Symbol::new(symbol.as_str()), *rate),
        BindingDesc::Constant { symbol, value } => ParamBinding::constant(Symbol::new(symbol.as_str()), *value),
        BindingDesc::Bounded { symbol, function, freq } => {
            let w = *freq;
            let name = format!("{function}({w} t)");
            let sym = Symbol::new(symbol.as_str());
            match function.as_str() {
                "sin" => ParamBinding::bounded(sym, name, move |t| (w * t).sin(), 1.0)?,
                "cos" => ParamBinding::bounded(sym, name, move |t| (w * t).cos(), 1.0)?,
                other => return Err(SystemError::Invalid(format!("unknown bounded function `{other}` (sin or cos)"))),
            }
        }
    })
}

impl SystemDescription {
    pub fn build(&self) -> Result<System, SystemError> {
        match self {
            SystemDescription::PolyMap { name, dimension, lambda, coordinates, bindings } => {
                let n = *dimension;
                if coordinates.len() != n {
                    return Err(SystemError::Dimension(format!("{} coordinates for dimension {n}", coordinates.len())));
                }
                let mut coords = Vec::with_capacity(n);
                for (i, terms) in coordinates.iter().enumerate() {
                    let mut p = Poly::zero(n);
                    for (j, term) in terms.iter().enumerate() {
                        if term.state_exponents.len() != n {
                            return Err(SystemError::Dimension(format!(
                                "coordinate {i}, term {j}: {} state exponents for dimension {n}",
                                term.state_exponents.len()
                            )));
                        }
                        let params = term.param_exponents.iter().map(|(k, e)| (Symbol::new(k.as_str()), *e)).collect();
                        p = p.add(&Poly::term(Monomial::new(term.state_exponents.clone(), params), term.coefficient.0.clone()));
                    }
                    coords.push(p);
                }
                let bindings = bindings.iter().map(binding).collect::<Result<Vec<_>, _>>()?;
                let map = match lambda {
                    Some(l) => ParamPolyMap::with_linear_part(l.clone(), coords, bindings)?,
                    None => ParamPolyMap::new(coords, bindings)?.detect_linear_part(),
                };
                Ok(System::Poly { name: name.clone().unwrap_or_else(|| "poly_map".into()), map })
            }
            SystemDescription::LinearClosedForm { name, dimension, matrix, blocks } => {
                let n = *dimension;
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(SystemError::Dimension(format!("matrix must be {n}x{n}")));
                }
                let entries: Vec<Vec<Vec<(f64, String)>>> =
                    matrix.iter().map(|r| r.iter().map(EntryDesc::terms).collect()).collect::<Result<_, _>>()?;
                let oscillating = oscillating_form(&entries);
                let name = name.clone().unwrap_or_else(|| "linear".into());
                let field = LinearField::new(name.clone(), n, move |t| {
                    DMatrix::from_fn(n, n, |i, j| entries[i][j].iter().map(|(c, f)| c * basis(f, t)).sum())
                });
                let field = match blocks {
                    Some(b) => {
                        let mut seen: Vec<usize> = b.iter().flatten().copied().collect();
                        seen.sort_unstable();
                        if seen != (0..n).collect::<Vec<_>>() {
                            return Err(SystemError::Invalid("blocks must partition the coordinates".into()));
                        }
                        field.with_blocks(b.clone())
                    }
                    None => field,
                };
                Ok(System::Linear { name, field, oscillating })
            }
            SystemDescription::Builtin { id, parameters } => {
                let p = family_params(parameters)?;
                match id.as_str() {
                    "example_3_4" => {
                        let o = OscillatingScalar::new(p.lambda0, p.a);
                        Ok(System::Linear { name: id.clone(), field: o.field(), oscillating: Some(o) })
                    }
                    "example_4_2" | "example_3_3" | "noninjective_demo" => {
                        let map = match id.as_str() {
                            "example_4_2" => {
                                if !(p.lambda < BigRational::zero()) {
                                    return Err(SystemError::Invalid(format!("lambda must be negative, got {}", p.lambda)));
                                }
                                catalog::cubic_nilpotent_map(p.lambda)
                            }
                            "example_3_3" => catalog::eventual_cubic_map(),
                            _ => catalog::noninjective_cubic(),
                        };
                        Ok(System::Poly { name: id.clone(), map })
                    }
                    "example_3_2" => Ok(System::Family(
                        builtin_family(id, &p).map_err(|e| SystemError::Invalid(e.to_string()))?,
                    )),
                    other => Err(SystemError::Invalid(format!(
                        "unknown builtin `{other}`; expected one of {BUILTIN_FAMILIES:?}"
                    ))),
                }
            }
        }
    }

    /// Description of `map`, with the linear part split off when known.
    pub fn from_map(name: &str, map: &ParamPolyMap) -> Self {
        let n = map.dimension();
        let (lambda, coords) = match (map.linear_coefficient(), map.nonlinear_part()) {
            (Some(l), Ok(h)) => (Some(l.clone()), h),
            _ => (None, map.coords().to_vec()),
        };
        let coordinates = coords
            .iter()
            .map(|p| {
                p.terms()
                    .map(|(m, c)| TermDesc {
                        coefficient: Coefficient(c.clone()),
                        state_exponents: m.state_exponents().to_vec(),
                        param_exponents: m.param_exponents().iter().map(|(s, e)| (s.to_string(), *e)).collect(),
                    })
                    .collect()
            })
            .collect();
        let bindings = map
            .bindings()
            .filter_map(|b| match &b.kind {
                BindingKind::ExpDecay { rate } => Some(BindingDesc::ExpDecay { symbol: b.symbol.to_string(), rate: *rate }),
                BindingKind::Constant { value } => {
                    Some(BindingDesc::Constant { symbol: b.symbol.to_string(), value: *value })
                }
                BindingKind::BoundedGeneric { name, .. } => {
                    let (function, rest) = name.split_once('(')?;
                    let freq = rest.split_whitespace().next()?.parse().ok()?;
                    Some(BindingDesc::Bounded { symbol: b.symbol.to_string(), function: function.into(), freq })
                }
            })
            .collect();
        SystemDescription::PolyMap { name: Some(name.into()), dimension: n, lambda, coordinates, bindings }
    }
}

/// `x' = (lambda0 + a t sin t) x` written as a 1x1 matrix.
fn oscillating_form(entries: &[Vec<Vec<(f64, String)>>]) -> Option<OscillatingScalar> {
    if entries.len() != 1 {
        return None;
    }
    let (mut l0, mut a) = (0.0, 0.0);
    for (c, f) in &entries[0][0] {
        match f.as_str() {
            "1" => l0 += c,
            "t sin t" => a += c,
            _ => return None,
        }
    }
    Some(OscillatingScalar::new(l0, a))
}
