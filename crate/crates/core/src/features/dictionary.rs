use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::FeatureError;

/// Spatial multi-index `(order in x, order in y)`.
pub type MultiIndex = [u8; 2];

/// One partial derivative `d^alpha field`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factor {
    pub field: String,
    pub alpha: MultiIndex,
}

impl Factor {
    pub fn new(field: &str, alpha: MultiIndex) -> Self {
        Factor { field: field.to_string(), alpha }
    }

    pub fn order(&self) -> usize {
        (self.alpha[0] + self.alpha[1]) as usize
    }
}

// fields by name, then total order, then x-derivatives before y-derivatives
impl Ord for Factor {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.field
            .cmp(&other.field)
            .then(self.order().cmp(&other.order()))
            .then(other.alpha[0].cmp(&self.alpha[0]))
    }
}

impl PartialOrd for Factor {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.field)?;
        if self.order() > 0 {
            f.write_str("_")?;
            for _ in 0..self.alpha[0] {
                f.write_str("x")?;
            }
            for _ in 0..self.alpha[1] {
                f.write_str("y")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Factor {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, FeatureError> {
        let bad = || FeatureError::InvalidDescriptor(s.to_string());
        let s = s.trim();
        let (field, suffix) = match s.split_once('_') {
            Some((f, d)) => (f, Some(d)),
            None => (s, None),
        };
        if field.is_empty() || !field.chars().all(|c| c.is_alphanumeric()) || !field.starts_with(|c: char| c.is_alphabetic()) {
            return Err(bad());
        }
        let mut alpha = [0u8; 2];
        if let Some(d) = suffix {
            if d.is_empty() {
                return Err(bad());
            }
            let mut seen_y = false;
            for c in d.chars() {
                match c {
                    'x' if !seen_y => alpha[0] += 1,
                    'y' => {
                        seen_y = true;
                        alpha[1] += 1
                    }
                    _ => return Err(bad()),
                }
            }
        }
        Ok(Factor { field: field.to_string(), alpha })
    }
}

/// A candidate right-hand-side term: a product of partial derivatives, or
/// `sin`/`cos` of one partial derivative.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FeatureDescriptor {
    Product(Vec<Factor>),
    Sin(Factor),
    Cos(Factor),
}

impl FeatureDescriptor {
    /// A product with factors put in canonical order.
    pub fn product(mut factors: Vec<Factor>) -> Result<Self, FeatureError> {
        if factors.is_empty() {
            return Err(FeatureError::InvalidDescriptor("empty product".into()));
        }
        factors.sort();
        Ok(FeatureDescriptor::Product(factors))
    }

    pub fn factors(&self) -> Vec<&Factor> {
        match self {
            FeatureDescriptor::Product(f) => f.iter().collect(),
            FeatureDescriptor::Sin(f) | FeatureDescriptor::Cos(f) => vec![f],
        }
    }

    pub fn max_order(&self) -> usize {
        self.factors().iter().map(|f| f.order()).max().unwrap_or(0)
    }

    /// Evaluates given a lookup of base derivative values.
    pub fn eval(&self, base: impl Fn(&Factor) -> f64) -> f64 {
        match self {
            FeatureDescriptor::Product(f) => f.iter().map(&base).product(),
            FeatureDescriptor::Sin(f) => base(f).sin(),
            FeatureDescriptor::Cos(f) => base(f).cos(),
        }
    }
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureDescriptor::Product(fs) => {
                for (i, x) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
            FeatureDescriptor::Sin(x) => write!(f, "sin({x})"),
            FeatureDescriptor::Cos(x) => write!(f, "cos({x})"),
        }
    }
}

impl FromStr for FeatureDescriptor {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, FeatureError> {
        let s = s.trim();
        for (name, ctor) in [("sin(", FeatureDescriptor::Sin as fn(Factor) -> _), ("cos(", FeatureDescriptor::Cos)] {
            if let Some(rest) = s.strip_prefix(name) {
                let inner = rest.strip_suffix(')').ok_or_else(|| FeatureError::InvalidDescriptor(s.to_string()))?;
                return Ok(ctor(inner.parse()?));
            }
        }
        let factors = s.split('*').map(Factor::from_str).collect::<Result<Vec<_>, _>>()?;
        FeatureDescriptor::product(factors)
    }
}

impl Serialize for FeatureDescriptor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureDescriptor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered, duplicate-free list of features; index `k` is stable for the
/// dictionary's lifetime.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    fields: Vec<String>,
    space_dim: usize,
    entries: Vec<FeatureDescriptor>,
}

/// Multi-indices with `|alpha| <= order`, by total order and then x-first.
pub fn multi_indices(space_dim: usize, order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for n in 0..=order {
        if space_dim == 1 {
            out.push([n as u8, 0]);
        } else {
            for b in 0..=n {
                out.push([(n - b) as u8, b as u8]);
            }
        }
    }
    out
}

// all multisets of `size` elements of 0..n as non-decreasing index lists
fn multisets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, size, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, size, 0, &mut Vec::new(), &mut out);
    out
}

/// Builds the product dictionary: every multiset of 1..=`max_product_terms`
/// base derivatives (`|alpha| <= max_derivative_order`, all fields), in order
/// of product size and then lexicographically by base index, followed by
/// the trig terms.
pub fn build_dictionary(
    field_names: &[&str],
    space_dim: usize,
    max_derivative_order: usize,
    max_product_terms: usize,
    trig_terms: &[FeatureDescriptor],
) -> Result<Dictionary, FeatureError> {
    if field_names.is_empty() {
        return Err(FeatureError::EmptyFields);
    }
    if max_product_terms == 0 {
        return Err(FeatureError::InvalidDescriptor("max_product_terms must be at least 1".into()));
    }
    if !(1..=2).contains(&space_dim) {
        return Err(FeatureError::InvalidDescriptor(format!("space dimension {space_dim}")));
    }
    let alphas = multi_indices(space_dim, max_derivative_order);
    let base: Vec<Factor> =
        field_names.iter().flat_map(|f| alphas.iter().map(move |&a| Factor::new(f, a))).collect();
    let mut entries = Vec::new();
    for size in 1..=max_product_terms {
        for m in multisets(base.len(), size) {
            entries.push(FeatureDescriptor::product(m.iter().map(|&i| base[i].clone()).collect())?);
        }
    }
    entries.extend(trig_terms.iter().cloned());
    Dictionary::new(field_names.iter().map(|s| s.to_string()).collect(), space_dim, entries)
}

impl Dictionary {
    pub fn new(fields: Vec<String>, space_dim: usize, entries: Vec<FeatureDescriptor>) -> Result<Self, FeatureError> {
        if fields.is_empty() {
            return Err(FeatureError::EmptyFields);
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].contains(e) {
                return Err(FeatureError::InvalidDescriptor(format!("duplicate entry `{e}`")));
            }
            for f in e.factors() {
                if !fields.contains(&f.field) {
                    return Err(FeatureError::UnknownField(f.field.clone()));
                }
                if space_dim == 1 && f.alpha[1] > 0 {
                    return Err(FeatureError::InvalidDescriptor(format!("`{e}` uses y in a 1D dictionary")));
                }
            }
        }
        Ok(Dictionary { fields, space_dim, entries })
    }

    /// Rebuilds a dictionary from descriptor strings; fields are taken in
    /// order of first appearance.
    pub fn from_strings<S: AsRef<str>>(items: &[S]) -> Result<Self, FeatureError> {
        let entries = items.iter().map(|s| s.as_ref().parse()).collect::<Result<Vec<FeatureDescriptor>, _>>()?;
        let mut fields: Vec<String> = Vec::new();
        let mut space_dim = 1;
        for e in &entries {
            for f in e.factors() {
                if !fields.contains(&f.field) {
                    fields.push(f.field.clone());
                }
                if f.alpha[1] > 0 {
                    space_dim = 2;
                }
            }
        }
        Dictionary::new(fields, space_dim, entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeatureDescriptor] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &FeatureDescriptor {
        &self.entries[k]
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.to_string()).collect()
    }

    pub fn index_of(&self, d: &FeatureDescriptor) -> Option<usize> {
        self.entries.iter().position(|e| e == d)
    }

    pub fn index_of_str(&self, s: &str) -> Result<usize, FeatureError> {
        let d: FeatureDescriptor = s.parse()?;
        self.index_of(&d).ok_or_else(|| FeatureError::NotInDictionary(s.to_string()))
    }

    pub fn max_order(&self) -> usize {
        self.entries.iter().map(|e| e.max_order()).max().unwrap_or(0)
    }

    /// Distinct `(field index, alpha)` pairs any entry needs, sorted.
    pub fn base_terms(&self) -> Vec<(usize, MultiIndex)> {
        let mut out: Vec<(usize, MultiIndex)> = Vec::new();
        for e in &self.entries {
            for f in e.factors() {
                let fi = self.fields.iter().position(|n| n == &f.field).expect("validated");
                if !out.contains(&(fi, f.alpha)) {
                    out.push((fi, f.alpha));
                }
            }
        }
        out.sort_by_key(|&(fi, a)| (fi, a[0] + a[1], std::cmp::Reverse(a[0])));
        out
    }
}

impl Serialize for Dictionary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dictionary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<String>::deserialize(d)?;
        Dictionary::from_strings(&items).map_err(serde::de::Error::custom)
    }
}

/// Dictionary recipe as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionarySpec {
    pub fields: Vec<String>,
    #[serde(default = "one")]
    pub space_dim: usize,
    pub max_derivative_order: usize,
    pub max_product_terms: usize,
    #[serde(default)]
    pub trig_terms: Vec<FeatureDescriptor>,
}

fn one() -> usize {
    1
}

impl DictionarySpec {
    pub fn build(&self) -> Result<Dictionary, FeatureError> {
        let names: Vec<&str> = self.fields.iter().map(|s| s.as_str()).collect();
        build_dictionary(&names, self.space_dim, self.max_derivative_order, self.max_product_terms, &self.trig_terms)
    }
}
