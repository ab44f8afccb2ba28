//! Output monoids and the undefined value.
//!
//! Cost functions take values in a monoid `D`. Inside the library a value is an
//! `Option<D>` where `None` stands for the undefined value, rendered as `bot`.
//! Two instances ship: [`Word`] (strings under concatenation) and
//! [`Additive`] over any `num_traits` scalar (integers by default).

use std::fmt::{self, Debug, Display};
use std::hash::Hash;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;
use serde_json::Value as Json;
use thiserror::Error;

/// Errors raised by monoid values and literals.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonoidError {
    #[error("cannot combine a {0} value with a {1} value")]
    Mixed(&'static str, &'static str),
    #[error("invalid {kind} literal `{text}`")]
    BadLiteral { kind: &'static str, text: String },
}

/// A monoid used as the codomain of cost functions.
pub trait Monoid: Clone + Eq + Ord + Hash + Debug + Send + Sync + 'static {
    /// Whether `plus` is commutative.
    const COMMUTATIVE: bool;
    /// Short name used in messages (`str`, `int`, ...).
    const NAME: &'static str;

    fn zero() -> Self;
    fn plus(&self, rhs: &Self) -> Self;
    fn is_zero(&self) -> bool;

    /// Text form: strings quoted, numbers in decimal.
    fn render(&self) -> String;
    /// Text form used by the surface syntax for constant outputs.
    fn surface(&self) -> String;
    /// Parses a literal written in the surface syntax or on the command line.
    fn parse_literal(text: &str) -> Result<Self, MonoidError>;

    fn to_json(&self) -> Json;
    fn from_json(value: &Json) -> Result<Self, MonoidError>;

    /// Converts into the dynamically typed value.
    fn to_value(&self) -> MonoidValue;
}

/// `a + b` with the undefined value absorbing on both sides.
pub fn plus_opt<D: Monoid>(a: &Option<D>, b: &Option<D>) -> Option<D> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.plus(y)),
        _ => None,
    }
}

/// Renders an optional value, printing `bot` for the undefined value.
pub fn render_opt<D: Monoid>(v: &Option<D>) -> String {
    match v {
        Some(d) => d.render(),
        None => "bot".to_string(),
    }
}

/// Strings over an output alphabet under concatenation.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub String);

impl Word {
    pub fn new(s: impl Into<String>) -> Self {
        Word(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn chars(&self) -> Vec<char> {
        self.0.chars().collect()
    }
}

impl Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Word {
    fn from(s: &str) -> Self {
        Word(s.to_string())
    }
}

impl Monoid for Word {
    const COMMUTATIVE: bool = false;
    const NAME: &'static str = "str";

    fn zero() -> Self {
        Word(String::new())
    }

    fn plus(&self, rhs: &Self) -> Self {
        let mut s = String::with_capacity(self.0.len() + rhs.0.len());
        s.push_str(&self.0);
        s.push_str(&rhs.0);
        Word(s)
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn render(&self) -> String {
        format!("{:?}", self.0)
    }

    fn surface(&self) -> String {
        let bare = !self.0.is_empty() && self.0.chars().all(|c| !c.is_whitespace() && !SURFACE_RESERVED.contains(c));
        if bare {
            self.0.clone()
        } else {
            format!("{:?}", self.0)
        }
    }

    fn parse_literal(text: &str) -> Result<Self, MonoidError> {
        let t = text.trim();
        if t.starts_with('"') {
            match serde_json::from_str::<String>(t) {
                Ok(s) => Ok(Word(s)),
                Err(_) => Err(MonoidError::BadLiteral { kind: "str", text: text.to_string() }),
            }
        } else {
            Ok(Word(t.to_string()))
        }
    }

    fn to_json(&self) -> Json {
        Json::String(self.0.clone())
    }

    fn from_json(value: &Json) -> Result<Self, MonoidError> {
        match value {
            Json::String(s) => Ok(Word(s.clone())),
            other => Err(MonoidError::BadLiteral { kind: "str", text: other.to_string() }),
        }
    }

    fn to_value(&self) -> MonoidValue {
        MonoidValue::Str(self.0.clone())
    }
}

/// Characters that force quoting of a string constant in the surface syntax.
pub const SURFACE_RESERVED: &str = "()[]|+/\"\\,;=<>";

/// Numbers under addition. Any `num_traits` scalar with exact equality works;
/// the default instance is arbitrary-precision integers.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Additive<T>(pub T);

/// Bounds required of a scalar carried by [`Additive`].
pub trait Scalar:
    Zero + Add<Output = Self> + Clone + Eq + Ord + Hash + Debug + Display + FromStr + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Zero + Add<Output = T> + Clone + Eq + Ord + Hash + Debug + Display + FromStr + Send + Sync + 'static
{
}

impl<T: Scalar> Debug for Additive<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<T: Scalar> Display for Additive<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<T: Scalar> Monoid for Additive<T> {
    const COMMUTATIVE: bool = true;
    const NAME: &'static str = "int";

    fn zero() -> Self {
        Additive(T::zero())
    }

    fn plus(&self, rhs: &Self) -> Self {
        Additive(self.0.clone() + rhs.0.clone())
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn render(&self) -> String {
        self.0.to_string()
    }

    fn surface(&self) -> String {
        self.0.to_string()
    }

    fn parse_literal(text: &str) -> Result<Self, MonoidError> {
        text.trim()
            .parse::<T>()
            .map(Additive)
            .map_err(|_| MonoidError::BadLiteral { kind: "int", text: text.to_string() })
    }

    fn to_json(&self) -> Json {
        match self.0.to_string().parse::<i64>() {
            Ok(n) => Json::from(n),
            Err(_) => Json::String(self.0.to_string()),
        }
    }

    fn from_json(value: &Json) -> Result<Self, MonoidError> {
        match value {
            Json::Number(n) => Self::parse_literal(&n.to_string()),
            Json::String(s) => Self::parse_literal(s),
            other => Err(MonoidError::BadLiteral { kind: "int", text: other.to_string() }),
        }
    }

    fn to_value(&self) -> MonoidValue {
        match self.0.to_string().parse::<BigInt>() {
            Ok(n) => MonoidValue::Int(n),
            Err(_) => MonoidValue::Str(self.0.to_string()),
        }
    }
}

/// A value of one of the built-in monoids, or the undefined value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MonoidValue {
    Str(String),
    Int(BigInt),
    Bottom,
}

impl MonoidValue {
    fn kind(&self) -> Option<&'static str> {
        match self {
            MonoidValue::Str(_) => Some("str"),
            MonoidValue::Int(_) => Some("int"),
            MonoidValue::Bottom => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, MonoidValue::Bottom)
    }

    pub fn from_opt<D: Monoid>(v: &Option<D>) -> Self {
        v.as_ref().map_or(MonoidValue::Bottom, Monoid::to_value)
    }
}

impl Display for MonoidValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonoidValue::Str(s) => write!(f, "{s:?}"),
            MonoidValue::Int(n) => write!(f, "{n}"),
            MonoidValue::Bottom => f.write_str("bot"),
        }
    }
}

/// The monoid operation on dynamically typed values.
///
/// The undefined value absorbs; combining a string with an integer is an error.
pub fn mplus(a: &MonoidValue, b: &MonoidValue) -> Result<MonoidValue, MonoidError> {
    use MonoidValue::*;
    match (a, b) {
        (Str(x), Str(y)) => Ok(Str(format!("{x}{y}"))),
        (Int(x), Int(y)) => Ok(Int(x + y)),
        (Bottom, _) | (_, Bottom) => Ok(Bottom),
        _ => Err(MonoidError::Mixed(a.kind().unwrap_or("bot"), b.kind().unwrap_or("bot"))),
    }
}

/// Which built-in monoid an artifact is valued in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MonoidKind {
    Str,
    Int,
}

impl FromStr for MonoidKind {
    type Err = MonoidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "str" | "string" => Ok(MonoidKind::Str),
            "int" | "integer" => Ok(MonoidKind::Int),
            _ => Err(MonoidError::BadLiteral { kind: "monoid", text: s.to_string() }),
        }
    }
}

/// Description of a built-in monoid instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonoidSpec {
    pub identity: MonoidValue,
    pub commutative: bool,
    /// Output alphabet of the string instance; `None` for integers.
    pub alphabet: Option<Vec<char>>,
}

impl MonoidSpec {
    pub fn strings(alphabet: Vec<char>) -> Self {
        MonoidSpec { identity: MonoidValue::Str(String::new()), commutative: false, alphabet: Some(alphabet) }
    }

    pub fn integers() -> Self {
        MonoidSpec { identity: MonoidValue::Int(BigInt::zero()), commutative: true, alphabet: None }
    }

    pub fn kind(&self) -> MonoidKind {
        match self.identity {
            MonoidValue::Int(_) => MonoidKind::Int,
            _ => MonoidKind::Str,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> MonoidValue {
        MonoidValue::Str(x.to_string())
    }

    fn i(x: i64) -> MonoidValue {
        MonoidValue::Int(BigInt::from(x))
    }

    #[test]
    fn mplus_examples() {
        assert_eq!(mplus(&s("ab"), &s("ba")).unwrap(), s("abba"));
        assert_eq!(mplus(&MonoidValue::Bottom, &i(5)).unwrap(), MonoidValue::Bottom);
        assert_eq!(mplus(&i(0), &i(7)).unwrap(), i(7));
    }

    #[test]
    fn mixing_is_rejected() {
        assert!(matches!(mplus(&s("a"), &i(1)), Err(MonoidError::Mixed("str", "int"))));
    }

    #[test]
    fn rendering() {
        assert_eq!(s("ab").to_string(), "\"ab\"");
        assert_eq!(i(-3).to_string(), "-3");
        assert_eq!(MonoidValue::Bottom.to_string(), "bot");
        assert_eq!(render_opt::<Word>(&None), "bot");
    }

    #[test]
    fn spec_flags() {
        assert!(MonoidSpec::integers().commutative);
        assert!(!MonoidSpec::strings(vec!['a']).commutative);
        const { assert!(Additive::<BigInt>::COMMUTATIVE && !Word::COMMUTATIVE) };
    }

    #[test]
    fn literals() {
        assert_eq!(Word::parse_literal("\"a b\"").unwrap(), Word::new("a b"));
        assert_eq!(Word::parse_literal("xy").unwrap(), Word::new("xy"));
        assert_eq!(Additive::<BigInt>::parse_literal("-12").unwrap(), Additive(BigInt::from(-12)));
        assert!(Additive::<BigInt>::parse_literal("x").is_err());
        assert_eq!(Word::new("").surface(), "\"\"");
        assert_eq!(Word::new("a(").surface(), "\"a(\"");
    }
}
