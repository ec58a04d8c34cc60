//! JSON document types for connections and results.
//!
//! A connection serializes as
//! `{"poles":[{"re":..,"im":..},..], "ranks":[..],
//!   "coeffs":[[[[re,im],..4 entries..],..],..], "normalization":"trivial"}`
//! with matrices row-major and complex entries as `[re, im]` pairs.

use serde::{Deserialize, Serialize};

use crate::connection::{Normalization, Pole, RationalConnection};
use crate::error::{Error, Result};
use crate::{C64, CMat2};

/// A complex number as a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair(pub [f64; 2]);

impl From<C64> for ComplexPair {
    fn from(z: C64) -> Self {
        ComplexPair([z.re, z.im])
    }
}

impl From<ComplexPair> for C64 {
    fn from(p: ComplexPair) -> Self {
        C64::new(p.0[0], p.0[1])
    }
}

/// Pole positions carry named fields in the document schema.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolePosition {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for PolePosition {
    fn from(z: C64) -> Self {
        PolePosition { re: z.re, im: z.im }
    }
}

impl From<PolePosition> for C64 {
    fn from(p: PolePosition) -> Self {
        C64::new(p.re, p.im)
    }
}

/// Row-major 2x2 matrix of `[re, im]` pairs.
pub type MatrixDoc = [ComplexPair; 4];

pub fn matrix_to_doc(m: &CMat2) -> MatrixDoc {
    [m[(0, 0)].into(), m[(0, 1)].into(), m[(1, 0)].into(), m[(1, 1)].into()]
}

pub fn matrix_from_doc(doc: &MatrixDoc) -> CMat2 {
    CMat2::new(doc[0].into(), doc[1].into(), doc[2].into(), doc[3].into())
}

/// Serializable form of a [`RationalConnection`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionDoc {
    pub poles: Vec<PolePosition>,
    pub ranks: Vec<usize>,
    /// `coeffs[i][j]` multiplies `(z - a_i)^{-(j+1)}`.
    pub coeffs: Vec<Vec<MatrixDoc>>,
    pub normalization: Normalization,
}

impl ConnectionDoc {
    pub fn from_connection(c: &RationalConnection) -> Self {
        ConnectionDoc {
            poles: c.poles.iter().map(|p| p.position.into()).collect(),
            ranks: c.poles.iter().map(|p| p.rank).collect(),
            coeffs: c
                .poles
                .iter()
                .map(|p| p.coeffs.iter().map(matrix_to_doc).collect())
                .collect(),
            normalization: c.normalization,
        }
    }

    pub fn to_connection(&self) -> Result<RationalConnection> {
        if self.poles.len() != self.ranks.len() || self.poles.len() != self.coeffs.len() {
            return Err(Error::Shape(format!(
                "inconsistent lengths: {} poles, {} ranks, {} coefficient lists",
                self.poles.len(),
                self.ranks.len(),
                self.coeffs.len()
            )));
        }
        let poles = self
            .poles
            .iter()
            .zip(&self.ranks)
            .zip(&self.coeffs)
            .map(|((pos, &rank), mats)| Pole {
                position: (*pos).into(),
                rank,
                coeffs: mats.iter().map(matrix_from_doc).collect(),
            })
            .collect();
        RationalConnection::new(poles, self.normalization)
    }
}

impl RationalConnection {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConnectionDoc::from_connection(self))
            .expect("connection serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ConnectionDoc = serde_json::from_str(text)
            .map_err(|e| Error::Shape(format!("connection document: {e}")))?;
        doc.to_connection()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::{diag, k_matrix};

    #[test]
    fn connection_json_roundtrip() {
        let b = diag(C64::new(0.25, 1.0), C64::new(-0.5, 0.0));
        let conn = RationalConnection::new(
            vec![
                Pole { position: C64::new(0.0, 0.0), rank: 1, coeffs: vec![b, k_matrix()] },
                Pole { position: C64::new(1.5, -0.5), rank: 0, coeffs: vec![k_matrix() - b] },
            ],
            Normalization::Auxiliary,
        )
        .unwrap();
        let text = conn.to_json();
        let back = RationalConnection::from_json(&text).unwrap();
        assert_eq!(conn, back);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"{"poles":[{"re":0,"im":0}],"ranks":[0],"coeffs":[[[[1,0],[0,0],[0,0],[1,0]]]],"normalization":"trivial","extra":1}"#;
        assert!(RationalConnection::from_json(text).is_err());
    }
}
