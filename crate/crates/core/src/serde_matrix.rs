//! Serialize a `DMatrix<f64>` as a list of rows.

use nalgebra::DMatrix;
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(D::Error::custom("ragged matrix rows"));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

pub mod option {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => super::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super")] DMatrix<f64>);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}
