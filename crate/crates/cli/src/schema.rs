//! JSON system files.
//!
//! Matrices are written with rows and columns in the order of
//! `poset.elements`; internally everything is indexed by the poset's linear
//! extension, so loading and saving permute accordingly.

use nalgebra::DMatrix;
use poset_mobius::{Poset, PosetSpec, System};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub poset: PosetSpec,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub enum LoadError {
    /// Malformed JSON or wrong field types, with the JSON path.
    Parse { path: String, message: String },
    /// Well-formed JSON describing an invalid system.
    Schema(String),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Parse { path, message } => write!(f, "parse error at `{path}`: {message}"),
            LoadError::Schema(m) => write!(f, "schema error: {m}"),
        }
    }
}

impl SystemSpec {
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| LoadError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn build(&self) -> Result<System, LoadError> {
        let poset = self.poset.build().map_err(|e| LoadError::Schema(e.to_string()))?;
        let s = poset.len();
        let a = matrix("A", &self.a, Some(s), s)?;
        let b = matrix("B", &self.b, Some(s), s)?;
        let c = matrix("C", &self.c, None, s)?;
        let d = matrix("D", &self.d, None, s)?;
        if c.nrows() != d.nrows() {
            return Err(LoadError::Schema(format!("C has {} rows but D has {}", c.nrows(), d.nrows())));
        }
        let order = poset.linear_extension().to_vec();
        let square = |m: &DMatrix<f64>| DMatrix::from_fn(s, s, |r, q| m[(order[r], order[q])]);
        let columns = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), s, |r, q| m[(r, order[q])]);
        System::new(poset.clone(), square(&a), square(&b), columns(&c), columns(&d))
            .map_err(|e| LoadError::Schema(e.to_string()))
    }

    /// Inverse of [`SystemSpec::build`].
    pub fn from_system(sys: &System) -> Self {
        let poset = sys.poset();
        let s = poset.len();
        let position = input_positions(poset);
        let square = |m: &DMatrix<f64>| {
            (0..s).map(|r| (0..s).map(|q| m[(position[r], position[q])]).collect()).collect()
        };
        let columns = |m: &DMatrix<f64>| {
            (0..m.nrows()).map(|r| (0..s).map(|q| m[(r, position[q])]).collect()).collect()
        };
        SystemSpec {
            poset: poset.to_spec(),
            a: square(&sys.a),
            b: square(&sys.b),
            c: columns(&sys.c),
            d: columns(&sys.d),
        }
    }
}

/// `position[k]` is the linear-extension position of the `k`-th listed element.
pub fn input_positions(poset: &Poset) -> Vec<usize> {
    let mut position = vec![0; poset.len()];
    for (pos, &k) in poset.linear_extension().iter().enumerate() {
        position[k] = pos;
    }
    position
}

fn matrix(name: &str, rows: &[Vec<f64>], nrows: Option<usize>, ncols: usize) -> Result<DMatrix<f64>, LoadError> {
    if let Some(n) = nrows {
        if rows.len() != n {
            return Err(LoadError::Schema(format!("{name} has {} rows, expected {n}", rows.len())));
        }
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(LoadError::Schema(format!("{name}[{r}] has {} entries, expected {ncols}", row.len())));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, q| rows[r][q]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHUFFLED: &str = r#"{
        "poset": {"elements": ["b", "a"], "covers": [["a", "b"]]},
        "A": [[-2.0, 3.0], [0.0, -1.0]],
        "B": [[1.0, 0.5], [0.0, 1.0]],
        "C": [[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]],
        "D": [[0.0, 0.0], [0.0, 0.0], [7.0, 0.0]]
    }"#;

    #[test]
    fn listed_order_is_mapped_to_the_linear_extension() {
        let sys = SystemSpec::parse(SHUFFLED).unwrap().build().unwrap();
        assert_eq!(sys.poset().labels(), ["a", "b"]);
        assert_eq!(sys.a, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 3.0, -2.0]));
        assert_eq!(sys.b, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]));
        assert_eq!(sys.c.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(sys.d.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 7.0]);
    }

    #[test]
    fn round_trip() {
        let spec = SystemSpec::parse(SHUFFLED).unwrap();
        let again = SystemSpec::from_system(&spec.build().unwrap());
        assert_eq!(again, spec);
        assert_eq!(SystemSpec::parse(&again.to_json()).unwrap(), spec);
    }

    #[test]
    fn parse_errors_carry_a_path() {
        let bad = SHUFFLED.replace("[0.0, -1.0]", "[0.0, \"x\"]");
        match SystemSpec::parse(&bad) {
            Err(LoadError::Parse { path, .. }) => assert_eq!(path, "A[1][1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_causal_dynamics_are_rejected() {
        let bad = SHUFFLED.replace("[[-2.0, 3.0], [0.0, -1.0]]", "[[-2.0, 0.0], [3.0, -1.0]]");
        assert!(matches!(SystemSpec::parse(&bad).unwrap().build(), Err(LoadError::Schema(_))));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let bad = SHUFFLED.replace("[[1.0, 0.5], [0.0, 1.0]]", "[[1.0], [0.0, 1.0]]");
        assert!(matches!(SystemSpec::parse(&bad).unwrap().build(), Err(LoadError::Schema(_))));
    }
}
