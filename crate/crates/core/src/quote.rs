use serde::{Deserialize, Serialize};

/// How a price was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Series,
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Series => "series",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A price with its method and an error estimate. For Monte Carlo the error
/// estimate is the standard error; for closed forms it is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub value: f64,
    pub method: Method,
    pub err_est: f64,
}

impl PriceQuote {
    pub fn closed_form(value: f64) -> Self {
        Self { value, method: Method::ClosedForm, err_est: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let q = PriceQuote { value: 0.5, method: Method::MonteCarlo, err_est: 0.01 };
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"value":0.5,"method":"monte-carlo","err_est":0.01}"#);
        let back: PriceQuote = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        assert_eq!(Method::ClosedForm.to_string(), "closed-form");
    }
}
