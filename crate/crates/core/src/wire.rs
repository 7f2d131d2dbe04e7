//! JSON encoding of complex matrices: row-major nested arrays whose entries
//! are `[re, im]` pairs.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::CMatrix;

type Rows = Vec<Vec<[f64; 2]>>;

pub fn to_rows(m: &CMatrix) -> Rows {
    m.row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn from_rows(rows: &Rows) -> Result<CMatrix, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!(
            "ragged matrix: row {i} has {} entries, row 0 has {ncols}",
            r.len()
        ));
    }
    let mut out = CMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(format!("non-finite entry at ({i}, {j})"));
            }
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(out)
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Rows::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

pub mod matrices {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        let all = Vec::<Rows>::deserialize(d)?;
        all.iter()
            .enumerate()
            .map(|(k, rows)| from_rows(rows).map_err(|e| format!("matrix {k}: {e}")))
            .collect::<Result<_, _>>()
            .map_err(D::Error::custom)
    }
}

pub mod vectors {
    use super::*;
    use crate::numerics::CVector;

    pub fn serialize<S: Serializer>(vs: &[CVector], s: S) -> Result<S::Ok, S::Error> {
        vs.iter()
            .map(|v| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVector>, D::Error> {
        let all = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(all
            .into_iter()
            .map(|v| CVector::from_iterator(v.len(), v.into_iter().map(|[re, im]| Complex64::new(re, im))))
            .collect())
    }
}
